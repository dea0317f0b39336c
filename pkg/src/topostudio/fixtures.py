"""Shipped example problems and the benchmark suite loader.

Geometries are simple structural archetypes sized so the full set solves
in well under a minute: cantilevers, a half-beam, a bridge deck, an
L-bracket, and three mask-driven design studies (chair frame, gripper
jaw, wall hook).  Every fixture passes validate_problem with no issues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .backends import BackendKind, StochasticParams
from .model import GridDims, Load, ProblemSpec, Support, spec_from_dict


def _rect(dims: GridDims) -> np.ndarray:
    return np.ones(dims.num_elements, dtype=bool)


def _edge_supports(dims: GridDims, ix: int) -> list:
    return [Support(dims.node_at(ix, iy), True, True) for iy in range(dims.nely + 1)]


def cantilever(nelx: int = 60, nely: int = 20, volfrac: float = 0.5) -> ProblemSpec:
    """Left edge clamped, unit downward tip load at the right mid-edge."""
    dims = GridDims(nelx, nely)
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=np.zeros(dims.num_elements, dtype=bool),
        loads=[Load(dims.node_at(nelx, nely // 2), 0.0, 1.0)],
        supports=_edge_supports(dims, 0),
        volfrac=volfrac,
    )


def multiload(nelx: int = 64, nely: int = 64, volfrac: float = 0.3) -> ProblemSpec:
    """Clamped left edge with opposing corner loads on the right; admits
    several near-equal load paths, so regenerated designs vary."""
    dims = GridDims(nelx, nely)
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=np.zeros(dims.num_elements, dtype=bool),
        loads=[
            Load(dims.node_at(nelx, 0), 0.0, 1.0),
            Load(dims.node_at(nelx, nely), 0.0, -1.0),
        ],
        supports=_edge_supports(dims, 0),
        volfrac=volfrac,
    )


def task1(volfrac: float = 0.30) -> ProblemSpec:
    """Half of a simply supported beam: symmetry plane on the left edge,
    roller at the bottom-right corner, load at the top-left corner."""
    dims = GridDims(40, 16)
    supports = [Support(dims.node_at(0, iy), True, False) for iy in range(dims.nely + 1)]
    supports.append(Support(dims.node_at(dims.nelx, dims.nely), False, True))
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=np.zeros(dims.num_elements, dtype=bool),
        loads=[Load(dims.node_at(0, 0), 0.0, 1.0)],
        supports=supports,
        volfrac=volfrac,
    )


def task2(volfrac: float = 0.20) -> ProblemSpec:
    """Pier: bottom edge clamped, compression load on the top mid-edge."""
    dims = GridDims(16, 32)
    supports = [
        Support(dims.node_at(ix, dims.nely), True, True)
        for ix in range(dims.nelx + 1)
    ]
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=np.zeros(dims.num_elements, dtype=bool),
        loads=[Load(dims.node_at(dims.nelx // 2, 0), 0.0, 1.0)],
        supports=supports,
        volfrac=volfrac,
    )


def task3(volfrac: float = 0.20) -> ProblemSpec:
    """Obstructed pier: a void block sits in the direct load path, so
    material must route around it."""
    dims = GridDims(20, 32)
    shape = np.ones((dims.nely, dims.nelx), dtype=bool)
    shape[14:20, 4:16] = False
    supports = [
        Support(dims.node_at(ix, dims.nely), True, True)
        for ix in range(dims.nelx + 1)
    ]
    return ProblemSpec(
        dims=dims,
        shape=shape.ravel(),
        mask=np.zeros(dims.num_elements, dtype=bool),
        loads=[Load(dims.node_at(dims.nelx // 2, 0), 0.0, 1.0)],
        supports=supports,
        volfrac=volfrac,
    )


def chair(volfrac: float = 0.40) -> ProblemSpec:
    """Chair frame in profile: floor-mounted legs, seat surface preserved
    by a mask, sitting load on the seat."""
    dims = GridDims(32, 48)
    mask = np.zeros((dims.nely, dims.nelx), dtype=bool)
    mask[20:24, :] = True  # seat plate stays solid
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=mask.ravel(),
        loads=[Load(dims.node_at(dims.nelx // 2, 20), 0.0, 1.0)],
        supports=[
            Support(dims.node_at(0, dims.nely), True, True),
            Support(dims.node_at(dims.nelx, dims.nely), True, True),
        ],
        volfrac=volfrac,
    )


def gripper(volfrac: float = 0.35) -> ProblemSpec:
    """One jaw of a gripper: mounted at the left edge, preserved contact
    pad on the right face, pinch load pressing the pad inward."""
    dims = GridDims(48, 24)
    mask = np.zeros((dims.nely, dims.nelx), dtype=bool)
    mask[8:16, 46:] = True  # contact pad stays solid
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=mask.ravel(),
        loads=[Load(dims.node_at(dims.nelx, dims.nely // 2), -1.0, 0.0)],
        supports=_edge_supports(dims, 0),
        volfrac=volfrac,
    )


def hook(volfrac: float = 0.30) -> ProblemSpec:
    """Wall hook: mounting plate along the top edge preserved by a mask,
    hanging load on the right side below mid-height."""
    dims = GridDims(24, 48)
    mask = np.zeros((dims.nely, dims.nelx), dtype=bool)
    mask[:2, :] = True  # mounting plate stays solid
    supports = [
        Support(dims.node_at(ix, 0), True, True) for ix in range(dims.nelx + 1)
    ]
    return ProblemSpec(
        dims=dims,
        shape=_rect(dims),
        mask=mask.ravel(),
        loads=[Load(dims.node_at(dims.nelx, 32), 0.0, 1.0)],
        supports=supports,
        volfrac=volfrac,
    )


FIXTURE_BUILDERS = {
    "cantilever60x20": cantilever,
    "cantilever64": lambda: cantilever(64, 64, 0.4),
    "multiload": multiload,
    "task1": task1,
    "task2": task2,
    "task3": task3,
    "chair": chair,
    "gripper": gripper,
    "hook": hook,
}


def fixture(name: str) -> ProblemSpec:
    try:
        builder = FIXTURE_BUILDERS[name]
    except KeyError:
        raise ValueError(
            f"unknown fixture {name!r}; expected one of {sorted(FIXTURE_BUILDERS)}"
        ) from None
    return builder()


def fixture_names() -> list:
    return sorted(FIXTURE_BUILDERS)


@dataclass(frozen=True)
class BenchTask:
    name: str
    spec: ProblemSpec


@dataclass(frozen=True)
class BenchBackend:
    kind: BackendKind
    strength: float | None


@dataclass(frozen=True)
class BenchSuite:
    tasks: tuple
    backends: tuple
    samples: int


def _parse_backend(entry: dict) -> BenchBackend:
    kind = entry.get("kind")
    if kind == "deterministic":
        return BenchBackend(BackendKind.deterministic(), None)
    if kind == "stochastic":
        strength = float(entry.get("strength", 0.8))
        StochasticParams(strength=strength, seed=0)  # range check
        return BenchBackend(BackendKind.stochastic(), strength)
    if kind == "remote":
        return BenchBackend(BackendKind.remote(entry["url"]), None)
    raise ValueError(f"unknown backend kind {kind!r}")


def load_suite(path=None) -> BenchSuite:
    """Read a benchmark suite description; None loads the packaged one."""
    if path is None:
        text = resources.files("topostudio.data").joinpath("bench_suite.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"suite is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or "tasks" not in raw or "backends" not in raw:
        raise ValueError("suite must be an object with 'tasks' and 'backends'")
    tasks = []
    for entry in raw["tasks"]:
        name = entry.get("name")
        if not name:
            raise ValueError("every suite task needs a name")
        if "fixture" in entry:
            spec = fixture(entry["fixture"])
        elif "spec" in entry:
            spec = spec_from_dict(entry["spec"])
        else:
            raise ValueError(f"task {name!r} needs a 'fixture' or 'spec' entry")
        tasks.append(BenchTask(name, spec))
    backends = tuple(_parse_backend(b) for b in raw["backends"])
    samples = int(raw.get("samples", 20))
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return BenchSuite(tuple(tasks), backends, samples)
