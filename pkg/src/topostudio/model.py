"""Shared domain types, grid conventions, and problem validation.

Grid convention (image convention): the origin is the top-left corner and y
increases downward, so raster inputs map onto the element grid without a
vertical flip.  Elements and nodes are indexed row-major:

    element e = ey * nelx + ex          for a nelx x nely element grid
    node    n = iy * (nelx + 1) + ix    for the (nelx+1) x (nely+1) node grid

Every type in this module is an immutable value object once constructed and
is safe to share across threads.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GridDims:
    """Element-grid dimensions; the node grid is (nelx+1) x (nely+1)."""

    nelx: int
    nely: int

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise ValueError(f"grid dims must be >= 1, got {self.nelx}x{self.nely}")

    @property
    def num_elements(self) -> int:
        return self.nelx * self.nely

    @property
    def num_nodes(self) -> int:
        return (self.nelx + 1) * (self.nely + 1)

    @property
    def num_dofs(self) -> int:
        return 2 * self.num_nodes

    def node_at(self, ix: int, iy: int) -> int:
        """Row-major node index for node column ix, node row iy."""
        if not (0 <= ix <= self.nelx and 0 <= iy <= self.nely):
            raise IndexError(f"node ({ix},{iy}) outside {self.nelx}x{self.nely} grid")
        return iy * (self.nelx + 1) + ix

    def node_xy(self, node: int) -> tuple[int, int]:
        """Inverse of node_at: (ix, iy) for a node index."""
        if not (0 <= node < self.num_nodes):
            raise IndexError(f"node index {node} outside grid")
        return node % (self.nelx + 1), node // (self.nelx + 1)

    def element_at(self, ex: int, ey: int) -> int:
        if not (0 <= ex < self.nelx and 0 <= ey < self.nely):
            raise IndexError(f"element ({ex},{ey}) outside {self.nelx}x{self.nely} grid")
        return ey * self.nelx + ex

    def element_xy(self, e: int) -> tuple[int, int]:
        if not (0 <= e < self.num_elements):
            raise IndexError(f"element index {e} outside grid")
        return e % self.nelx, e // self.nelx


@dataclass(frozen=True, eq=False)
class DensityField:
    """Per-element pseudo-densities in [0, 1], row-major."""

    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size != self.dims.num_elements:
            raise ValueError(
                f"expected {self.dims.num_elements} densities, got {v.size}"
            )
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("densities must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    def as_grid(self) -> np.ndarray:
        """(nely, nelx) view, rows running top to bottom."""
        return self.values.reshape(self.dims.nely, self.dims.nelx)

    @classmethod
    def uniform(cls, dims: GridDims, value: float) -> "DensityField":
        return cls(dims, np.full(dims.num_elements, float(value)))


@dataclass(frozen=True)
class Load:
    """Point load at a node.  Direction is kept, magnitude is normalized to 1."""

    node: int
    fx: float
    fy: float

    def __post_init__(self):
        mag = float(np.hypot(self.fx, self.fy))
        if mag == 0.0:
            raise ValueError("load must have a nonzero direction")
        object.__setattr__(self, "fx", float(self.fx) / mag)
        object.__setattr__(self, "fy", float(self.fy) / mag)


@dataclass(frozen=True)
class Support:
    """Fixed node; at least one of the two directions must be constrained."""

    node: int
    fix_x: bool
    fix_y: bool

    def __post_init__(self):
        if not (self.fix_x or self.fix_y):
            raise ValueError("support must constrain at least one direction")


@dataclass(frozen=True)
class MaterialParams:
    """Physical parameters of the interpolated material model."""

    e0: float = 1.0
    emin: float = 1e-9
    nu: float = 0.3
    penal: float = 3.0
    rmin: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.emin < self.e0):
            raise ValueError("require 0 < emin < e0")
        if not (0.0 < self.nu < 0.5):
            raise ValueError("require 0 < nu < 0.5")
        if self.penal < 1.0:
            raise ValueError("require penal >= 1")
        if self.rmin < 1.0:
            raise ValueError("require rmin >= 1")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Complete input for one generation run.

    shape marks elements belonging to the design part; mask marks elements
    preserved as solid (a subset of shape).  Elements outside shape are
    passive void, elements under mask are passive solid, and only the rest
    are free design variables.
    """

    dims: GridDims
    shape: np.ndarray
    mask: np.ndarray
    loads: tuple[Load, ...]
    supports: tuple[Support, ...]
    volfrac: float
    strength: float = 0.8
    seed: int = 0
    material: MaterialParams = field(default_factory=MaterialParams)

    def __post_init__(self):
        shape = np.asarray(self.shape, dtype=bool).ravel()
        mask = np.asarray(self.mask, dtype=bool).ravel()
        if shape.size != self.dims.num_elements:
            raise ValueError("shape length does not match grid")
        if mask.size != self.dims.num_elements:
            raise ValueError("mask length does not match grid")
        object.__setattr__(self, "shape", _frozen(shape))
        object.__setattr__(self, "mask", _frozen(mask))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "supports", tuple(self.supports))
        if not (0.0 <= self.strength <= 1.0):
            raise ValueError("strength must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    @property
    def num_shape_elements(self) -> int:
        return int(self.shape.sum())

    def free_elements(self) -> np.ndarray:
        """Boolean array of elements that are actual design variables."""
        return self.shape & ~self.mask

    def replace(self, **overrides) -> "ProblemSpec":
        return dataclasses.replace(self, **overrides)


@dataclass(frozen=True, eq=False)
class FeaSolution:
    """Linear-elastic response for one density field."""

    displacements: np.ndarray  # length 2 * num_nodes, zeros at fixed DOFs
    compliance: float
    element_energy: np.ndarray  # u_e^T k0 u_e per element, >= 0

    def __post_init__(self):
        object.__setattr__(self, "displacements", _frozen(self.displacements))
        object.__setattr__(self, "element_energy", _frozen(self.element_energy))


@dataclass(frozen=True, eq=False)
class GenerationResult:
    """Output of one generation: the field plus locally computed metrics."""

    density: DensityField
    compliance: float
    achieved_volfrac: float
    iterations: int
    seed: int
    converged: bool


def elements_touching_node(dims: GridDims, node: int) -> list[int]:
    """Indices of the up-to-four elements sharing a grid node."""
    ix, iy = dims.node_xy(node)
    out = []
    for ey in (iy - 1, iy):
        for ex in (ix - 1, ix):
            if 0 <= ex < dims.nelx and 0 <= ey < dims.nely:
                out.append(ey * dims.nelx + ex)
    return out


def _rigid_body_constrained(dims: GridDims, supports: tuple[Support, ...]) -> bool:
    """True when the constrained DOFs block all three planar rigid modes.

    Each constrained DOF contributes one row of the rigid-mode matrix
    (x-translation, y-translation, in-plane rotation); full rank 3 means no
    rigid motion survives.
    """
    rows = []
    for s in supports:
        ix, iy = dims.node_xy(s.node)
        if s.fix_x:
            rows.append((1.0, 0.0, -float(iy)))
        if s.fix_y:
            rows.append((0.0, 1.0, float(ix)))
    if len(rows) < 3:
        return False
    return np.linalg.matrix_rank(np.array(rows), tol=1e-9) == 3


def validate_problem(spec: ProblemSpec) -> list[str]:
    """All violated invariants of a ProblemSpec, as human-readable issues.

    An empty list means the spec is solvable.  Issues are returned rather
    than raised so callers (CLI, HTTP API) can surface the complete list.
    """
    issues: list[str] = []
    if spec.num_shape_elements == 0:
        issues.append("empty shape")
    if np.any(spec.mask & ~spec.shape):
        issues.append("mask exceeds shape")
    if not (0.0 < spec.volfrac <= 1.0):
        issues.append("volume fraction out of range (0, 1]")
    elif spec.num_shape_elements:
        mask_frac = spec.mask.sum() / spec.num_shape_elements
        if mask_frac > spec.volfrac + 1e-12:
            issues.append("infeasible volume: mask alone exceeds target")
    if not _rigid_body_constrained(spec.dims, spec.supports):
        issues.append("unconstrained rigid body motion")
    for kind, items in (("load", spec.loads), ("support", spec.supports)):
        for item in items:
            if not (0 <= item.node < spec.dims.num_nodes):
                issues.append(f"{kind} node {item.node} outside grid")
            elif not any(spec.shape[e] for e in elements_touching_node(spec.dims, item.node)):
                issues.append(f"{kind} node {item.node} not adjacent to any shape element")
    return issues


# --- JSON wire format -------------------------------------------------------
#
# Field names match the type definitions.  shape/mask are row-major 0/1
# arrays; load and support positions may be given either as a node index
# ("node") or as node coordinates ("node": [ix, iy]).


def _node_from_json(dims: GridDims, value) -> int:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"node coordinate must be [ix, iy], got {value!r}")
        return dims.node_at(int(value[0]), int(value[1]))
    return int(value)


def spec_from_dict(data: dict) -> ProblemSpec:
    """Parse the ProblemSpec wire format; raises ValueError on bad payloads."""
    try:
        dims = GridDims(int(data["dims"]["nelx"]), int(data["dims"]["nely"]))
        shape = np.asarray(data["shape"], dtype=bool)
        mask_raw = data.get("mask")
        mask = (
            np.zeros(dims.num_elements, dtype=bool)
            if mask_raw is None
            else np.asarray(mask_raw, dtype=bool)
        )
        if data.get("mask_mode", "preserve") == "restrict":
            # exclude-region variant: optimization happens only inside the
            # marked region, everything else in the part is kept solid
            mask = shape.ravel() & ~mask.ravel()
        loads = tuple(
            Load(_node_from_json(dims, ld["node"]), float(ld["fx"]), float(ld["fy"]))
            for ld in data.get("loads", [])
        )
        supports = tuple(
            Support(
                _node_from_json(dims, s["node"]),
                bool(s.get("fix_x", False)),
                bool(s.get("fix_y", False)),
            )
            for s in data.get("supports", [])
        )
        mat = data.get("material", {})
        material = MaterialParams(
            e0=float(mat.get("e0", 1.0)),
            emin=float(mat.get("emin", 1e-9)),
            nu=float(mat.get("nu", 0.3)),
            penal=float(mat.get("penal", 3.0)),
            rmin=float(mat.get("rmin", 2.0)),
        )
        return ProblemSpec(
            dims=dims,
            shape=shape,
            mask=mask,
            loads=loads,
            supports=supports,
            volfrac=float(data["volfrac"]),
            strength=float(data.get("strength", 0.8)),
            seed=int(data.get("seed", 0)),
            material=material,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed problem spec: {exc}") from exc


def spec_to_dict(spec: ProblemSpec) -> dict:
    return {
        "dims": {"nelx": spec.dims.nelx, "nely": spec.dims.nely},
        "shape": spec.shape.astype(int).tolist(),
        "mask": spec.mask.astype(int).tolist(),
        "loads": [{"node": ld.node, "fx": ld.fx, "fy": ld.fy} for ld in spec.loads],
        "supports": [
            {"node": s.node, "fix_x": s.fix_x, "fix_y": s.fix_y}
            for s in spec.supports
        ],
        "volfrac": spec.volfrac,
        "strength": spec.strength,
        "seed": spec.seed,
        "material": {
            "e0": spec.material.e0,
            "emin": spec.material.emin,
            "nu": spec.material.nu,
            "penal": spec.material.penal,
            "rmin": spec.material.rmin,
        },
    }


def spec_from_json(text: str | bytes) -> ProblemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError("problem spec must be a JSON object")
    return spec_from_dict(data)


def spec_to_json(spec: ProblemSpec, indent: int | None = None) -> str:
    return json.dumps(spec_to_dict(spec), indent=indent, sort_keys=True)
