"""Density-based compliance minimization with optimality-criteria updates.

The optimizer is fully deterministic: identical inputs give bitwise
identical outputs.  The Lagrange multiplier of the volume constraint is
found by exactly 60 geometric halvings of the fixed bracket [1e-9, 1e9],
which resolves lambda to machine precision on a relative scale and makes
tie-breaking reproducible (a requirement for the mirror-symmetry property).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from . import fea
from .model import DensityField, GenerationResult, GridDims, ProblemSpec

LAMBDA_LO = 1e-9
LAMBDA_HI = 1e9
BISECTION_STEPS = 60


class InfeasibleVolume(ValueError):
    """Preserved-solid elements alone already exceed the volume target."""


@dataclass(frozen=True)
class OcParams:
    move: float = 0.2
    eta: float = 0.5
    vol_tol: float = 1e-6
    max_outer: int = 200
    change_tol: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.move <= 1.0):
            raise ValueError("require 0 < move <= 1")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("require 0 < eta <= 1")
        if self.max_outer < 1:
            raise ValueError("require max_outer >= 1")


@dataclass(frozen=True, eq=False)
class FilterKernel:
    """Cone-weighted neighborhood w(e,i) = max(0, rmin - dist(e,i)) as CSR."""

    dims: GridDims
    rmin: float
    weights: sp.csr_matrix
    weight_sums: np.ndarray


def build_filter(dims: GridDims, rmin: float) -> FilterKernel:
    if rmin <= 0.0:
        raise ValueError("rmin must be positive")
    nelx, nely = dims.nelx, dims.nely
    reach = int(np.ceil(rmin)) - 1
    ex = np.tile(np.arange(nelx), nely)
    ey = np.repeat(np.arange(nely), nelx)
    e = ey * nelx + ex
    rows, cols, vals = [], [], []
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            w = rmin - float(np.hypot(dx, dy))
            if w <= 0.0:
                continue
            ok = (
                (ex + dx >= 0)
                & (ex + dx < nelx)
                & (ey + dy >= 0)
                & (ey + dy < nely)
            )
            rows.append(e[ok])
            cols.append(e[ok] + dy * nelx + dx)
            vals.append(np.full(int(ok.sum()), w))
    h = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dims.num_elements, dims.num_elements),
    )
    return FilterKernel(dims, rmin, h, np.asarray(h.sum(axis=1)).ravel())


def apply_filter(kernel: FilterKernel, field: np.ndarray) -> np.ndarray:
    """Weighted neighborhood average: sum(w * field) / sum(w) per element."""
    field = np.asarray(field, dtype=np.float64).ravel()
    if field.size != kernel.dims.num_elements:
        raise ValueError("field length does not match kernel grid")
    return (kernel.weights @ field) / kernel.weight_sums


def filter_sensitivities(
    kernel: FilterKernel, density: np.ndarray, dc: np.ndarray
) -> np.ndarray:
    """Classic density-weighted sensitivity smoothing."""
    smoothed = kernel.weights @ (density * dc)
    return smoothed / (kernel.weight_sums * np.maximum(density, 1e-3))


def _pin_passives(values: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    out = values.copy()
    out[~spec.shape] = 0.0
    out[spec.mask] = 1.0
    return out


def _check_volume_feasible(spec: ProblemSpec, vol_tol: float) -> None:
    n_shape = spec.num_shape_elements
    if n_shape and spec.mask.sum() / n_shape > spec.volfrac + vol_tol:
        raise InfeasibleVolume(
            "preserved region exceeds the volume target; lower the mask or raise volfrac"
        )


def shape_volume_fraction(values: np.ndarray, spec: ProblemSpec) -> float:
    n_shape = spec.num_shape_elements
    if n_shape == 0:
        return 0.0
    return float(values[spec.shape].sum()) / n_shape


def _bisect_multiplier(step: Callable[[float], np.ndarray], volume_of: Callable[[np.ndarray], float], target: float):
    """60 geometric halvings of the multiplier bracket; returns the last step."""
    l1, l2 = LAMBDA_LO, LAMBDA_HI
    xnew = None
    for _ in range(BISECTION_STEPS):
        lmid = float(np.sqrt(l1 * l2))
        xnew = step(lmid)
        if volume_of(xnew) > target:
            l1 = lmid
        else:
            l2 = lmid
    return xnew


def oc_update(
    density: np.ndarray,
    sensitivities: np.ndarray,
    spec: ProblemSpec,
    params: OcParams,
    kernel: Optional[FilterKernel] = None,
) -> np.ndarray:
    """One optimality-criteria step at fixed sensitivities.

    Free elements move by at most params.move; preserved elements stay 1 and
    out-of-shape elements stay 0.  The multiplier is bisected so the volume
    fraction over the shape hits spec.volfrac (exactly reachable whenever
    the move limit allows it; early iterations of an off-target start may
    saturate at the limit instead).
    """
    _check_volume_feasible(spec, params.vol_tol)
    x = _pin_passives(np.asarray(density, dtype=np.float64).ravel(), spec)
    free = spec.free_elements()
    if not free.any():
        return x
    target = spec.volfrac * spec.num_shape_elements - float(spec.mask.sum())
    xf = x[free]
    gain = np.maximum(-np.asarray(sensitivities, dtype=np.float64).ravel()[free], 0.0)
    lo = np.maximum(xf - params.move, 0.0)
    hi = np.minimum(xf + params.move, 1.0)
    xnew = _bisect_multiplier(
        lambda lam: np.clip(xf * (gain / lam) ** params.eta, lo, hi),
        lambda v: float(v.sum()),
        target,
    )
    out = x.copy()
    out[free] = xnew
    return out


def uniform_start(spec: ProblemSpec) -> np.ndarray:
    """Start field meeting the volume target: passives pinned, free elements
    at the value that brings the shape volume to volfrac exactly."""
    n_shape = spec.num_shape_elements
    n_mask = float(spec.mask.sum())
    n_free = n_shape - n_mask
    fill = 0.0 if n_free == 0 else (spec.volfrac * n_shape - n_mask) / n_free
    values = np.zeros(spec.dims.num_elements)
    values[spec.free_elements()] = np.clip(fill, 0.0, 1.0)
    values[spec.mask] = 1.0
    return values


class _SensitivityStepper:
    """Default scheme: smooth the gradient, update the density directly."""

    def __init__(self, spec: ProblemSpec, params: OcParams, kernel: FilterKernel):
        self.spec, self.params, self.kernel = spec, params, kernel

    def physical(self, x: np.ndarray) -> np.ndarray:
        return x

    def advance(self, x: np.ndarray, dc: np.ndarray) -> np.ndarray:
        dcf = filter_sensitivities(self.kernel, x, dc)
        return oc_update(x, dcf, self.spec, self.params, self.kernel)


class _DensityStepper:
    """Variant scheme: the design field is filtered into the physical one.

    The gradient is chain-ruled through the (symmetric-weight) filter and
    the volume bisection measures the physical field, so the volume target
    binds on what actually gets analyzed and exported.
    """

    def __init__(self, spec: ProblemSpec, params: OcParams, kernel: FilterKernel):
        self.spec, self.params, self.kernel = spec, params, kernel
        self.dv = kernel.weights @ (1.0 / kernel.weight_sums)

    def physical(self, z: np.ndarray) -> np.ndarray:
        return _pin_passives(apply_filter(self.kernel, z), self.spec)

    def advance(self, z: np.ndarray, dc: np.ndarray) -> np.ndarray:
        spec, params = self.spec, self.params
        _check_volume_feasible(spec, params.vol_tol)
        z = _pin_passives(z, spec)
        free = spec.free_elements()
        if not free.any():
            return z
        dcf = (self.kernel.weights @ (dc / self.kernel.weight_sums)) / self.dv
        target = spec.volfrac * spec.num_shape_elements
        zf = z[free]
        gain = np.maximum(-dcf[free], 0.0)
        lo = np.maximum(zf - params.move, 0.0)
        hi = np.minimum(zf + params.move, 1.0)

        def step(lam: float) -> np.ndarray:
            out = z.copy()
            out[free] = np.clip(zf * (gain / lam) ** params.eta, lo, hi)
            return out

        return _bisect_multiplier(
            step,
            lambda zc: float(self.physical(zc)[spec.shape].sum()),
            target,
        )


def optimize(
    spec: ProblemSpec,
    params: Optional[OcParams] = None,
    initial: Union[DensityField, str] = "uniform",
    filter_mode: str = "sensitivity",
    on_iteration: Optional[Callable[[int, np.ndarray, float, float], None]] = None,
    solve_tol: float = 1e-8,
) -> GenerationResult:
    """Run the optimization loop to convergence or the iteration cap.

    Converged means the next update would change no element by more than
    params.change_tol while the volume is already on target; the returned
    field is then the pre-update iterate, so re-optimizing an already
    converged result returns it unchanged.  on_iteration(k, field_values,
    compliance, change) is invoked after each applied update; compliance is
    that of the field the step started from.
    """
    params = params or OcParams()
    _check_volume_feasible(spec, params.vol_tol)
    kernel = build_filter(spec.dims, spec.material.rmin)
    if filter_mode == "sensitivity":
        stepper = _SensitivityStepper(spec, params, kernel)
    elif filter_mode == "density":
        stepper = _DensityStepper(spec, params, kernel)
    else:
        raise ValueError(f"unknown filter_mode {filter_mode!r}")

    if isinstance(initial, str):
        if initial != "uniform":
            raise ValueError(f"unknown initial field {initial!r}")
        design = uniform_start(spec)
    else:
        if initial.dims != spec.dims:
            raise ValueError("initial field grid does not match problem grid")
        design = _pin_passives(initial.values, spec)

    free = spec.free_elements()
    x = stepper.physical(design)
    u_prev: Optional[np.ndarray] = None
    iterations = 0
    converged = False
    sol = None

    for _ in range(params.max_outer):
        field = DensityField(spec.dims, x)
        sol = fea.analyze(field, spec, tol=solve_tol, x0=u_prev)
        u_prev = sol.displacements
        dc = fea.compliance_sensitivities(field, spec, sol)
        new_design = stepper.advance(design, dc)
        change = float(np.abs(new_design - design)[free].max()) if free.any() else 0.0
        on_target = abs(shape_volume_fraction(x, spec) - spec.volfrac) <= 1e-3
        if change < params.change_tol and on_target:
            converged = True
            break
        design = new_design
        x = stepper.physical(design)
        iterations += 1
        if on_iteration is not None:
            on_iteration(iterations, x.copy(), sol.compliance, change)

    result_field = DensityField(spec.dims, x)
    if not converged or sol is None:
        sol = fea.analyze(result_field, spec, tol=solve_tol, x0=u_prev)
    return GenerationResult(
        density=result_field,
        compliance=sol.compliance,
        achieved_volfrac=shape_volume_fraction(x, spec),
        iterations=iterations,
        seed=spec.seed,
        converged=converged,
    )
