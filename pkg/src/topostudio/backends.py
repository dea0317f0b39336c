"""Generation backends: local optimizer, seeded regeneration, remote service.

The stochastic backend reproduces the image-to-image editing loop: blend
the previous result (or the raw silhouette) with seeded noise, smooth, and
re-optimize under a strength-scaled iteration budget.  Low strength stays
close to the input, high strength explores.  Per-element noise comes from
SplitMix64 keyed on (seed, element index), so fields are reproducible on
any platform from the seed alone.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence
from urllib.parse import urlparse

import numpy as np

from . import fea, simp
from .model import DensityField, GenerationResult, ProblemSpec, spec_to_dict, validate_problem

DEFAULT_REMOTE_TIMEOUT = 60.0


class RemoteUnavailable(RuntimeError):
    """Remote generation service could not be reached or errored."""


class RemoteInvalidField(ValueError):
    """Remote service returned a field violating range, dims, or passivity."""


@dataclass(frozen=True)
class BackendKind:
    name: str
    url: Optional[str] = None

    def __post_init__(self):
        if self.name not in ("deterministic", "stochastic", "remote"):
            raise ValueError(f"unknown backend {self.name!r}")
        if self.name == "remote":
            parsed = urlparse(self.url or "")
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ValueError(f"remote backend needs an http(s) URL, got {self.url!r}")
        elif self.url is not None:
            raise ValueError(f"{self.name} backend takes no URL")

    @classmethod
    def deterministic(cls) -> "BackendKind":
        return cls("deterministic")

    @classmethod
    def stochastic(cls) -> "BackendKind":
        return cls("stochastic")

    @classmethod
    def remote(cls, url: str) -> "BackendKind":
        return cls("remote", url)


@dataclass(frozen=True)
class StochasticParams:
    strength: float
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.strength <= 1.0):
            raise ValueError("strength must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def budget(self, max_outer: int) -> int:
        """Iteration budget: at least 10, scaling with strength."""
        return min(max_outer, max(10, math.ceil(self.strength * max_outer)))


def element_noise(seed: int, count: int) -> np.ndarray:
    """Uniform [0, 1) noise, element i keyed by SplitMix64(seed + (i+1)*gamma)."""
    gamma = np.uint64(0x9E3779B97F4A7C15)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed % (1 << 64)) + idx * gamma
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def stochastic_initial(
    spec: ProblemSpec, base: Optional[DensityField] = None
) -> DensityField:
    """Blend base (or the raw silhouette) with seeded noise, then smooth.

    strength 0 returns the base unchanged, so regenerating a converged
    field at zero strength is a fixed point of the whole pipeline.
    """
    s = spec.strength
    base_values = base.values if base is not None else spec.shape.astype(np.float64)
    if s == 0.0:
        return DensityField(spec.dims, base_values)
    noise = element_noise(spec.seed, spec.dims.num_elements)
    blended = np.clip((1.0 - s) * base_values + s * noise, 0.0, 1.0)
    kernel = simp.build_filter(spec.dims, spec.material.rmin)
    return DensityField(spec.dims, np.clip(simp.apply_filter(kernel, blended), 0.0, 1.0))


def _require_valid(spec: ProblemSpec) -> None:
    issues = validate_problem(spec)
    if issues:
        raise ValueError("invalid problem: " + "; ".join(issues))


def _fetch_remote(spec: ProblemSpec, url: str, timeout: float) -> DensityField:
    import httpx

    payload = spec_to_dict(spec)
    payload["strength"] = spec.strength
    payload["seed"] = spec.seed
    endpoint = url.rstrip("/") + "/generate"
    try:
        response = httpx.post(endpoint, json=payload, timeout=timeout)
    except httpx.HTTPError as exc:
        raise RemoteUnavailable(f"remote backend at {url} unreachable: {exc}") from exc
    if response.status_code != 200:
        raise RemoteUnavailable(
            f"remote backend returned HTTP {response.status_code}"
        )
    try:
        body = response.json()
        values = np.asarray(body["density"], dtype=np.float64).ravel()
        dims = body["dims"]
        nelx, nely = int(dims["nelx"]), int(dims["nely"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RemoteInvalidField(f"malformed remote response: {exc}") from exc
    if (nelx, nely) != (spec.dims.nelx, spec.dims.nely):
        raise RemoteInvalidField(
            f"remote dims {nelx}x{nely} do not match requested {spec.dims.nelx}x{spec.dims.nely}"
        )
    if values.size != spec.dims.num_elements:
        raise RemoteInvalidField(
            f"remote field has {values.size} elements, expected {spec.dims.num_elements}"
        )
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise RemoteInvalidField("remote field leaves the [0, 1] range")
    # passivity must hold up to float serialization noise; anything worse is
    # a protocol violation, anything within tolerance is pinned exactly
    tol = 1e-6
    if np.any(np.abs(values[spec.mask] - 1.0) > tol) or np.any(
        values[~spec.shape] > tol
    ):
        raise RemoteInvalidField("remote field violates preserved/void regions")
    pinned = values.copy()
    pinned[spec.mask] = 1.0
    pinned[~spec.shape] = 0.0
    return DensityField(spec.dims, pinned)


def generate(
    spec: ProblemSpec,
    kind: BackendKind,
    base: Optional[DensityField] = None,
    oc_params: Optional[simp.OcParams] = None,
    filter_mode: str = "sensitivity",
    timeout: float = DEFAULT_REMOTE_TIMEOUT,
) -> GenerationResult:
    """Produce one design; compliance and volume are always recomputed here,
    whatever the backend claims."""
    _require_valid(spec)
    if base is not None and base.dims != spec.dims:
        raise ValueError("base field grid does not match problem grid")
    params = oc_params or simp.OcParams()

    if kind.name == "deterministic":
        return simp.optimize(spec, params, "uniform", filter_mode=filter_mode)

    if kind.name == "stochastic":
        stoch = StochasticParams(spec.strength, spec.seed)
        budgeted = dataclasses.replace(params, max_outer=stoch.budget(params.max_outer))
        initial = stochastic_initial(spec, base)
        return simp.optimize(spec, budgeted, initial, filter_mode=filter_mode)

    field = _fetch_remote(spec, kind.url or "", timeout)
    sol = fea.analyze(field, spec)
    return GenerationResult(
        density=field,
        compliance=sol.compliance,
        achieved_volfrac=simp.shape_volume_fraction(field.values, spec),
        iterations=0,
        seed=spec.seed,
        converged=True,
    )


def generate_batch(
    spec: ProblemSpec,
    kind: BackendKind,
    seeds: Sequence[int],
    base: Optional[DensityField] = None,
    oc_params: Optional[simp.OcParams] = None,
    max_workers: Optional[int] = None,
) -> list[GenerationResult]:
    """Run one generation per seed concurrently; output order follows seeds."""
    specs = [spec.replace(seed=int(s)) for s in seeds]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(generate, sp, kind, base, oc_params) for sp in specs]
        return [f.result() for f in futures]


def diversity_report(
    results: Sequence[GenerationResult],
    threshold: float = 0.03,
    shape: Optional[np.ndarray] = None,
) -> int:
    """Number of distinct topologies under binarize-at-0.5 comparison.

    Results whose binarized fields differ on more than `threshold` of the
    shape elements are distinct; classes form by greedy assignment in input
    order.  shape defaults to the whole grid (correct whenever the part
    fills it; pass spec.shape otherwise).
    """
    if not results:
        raise ValueError("diversity_report needs at least one result")
    dims = results[0].density.dims
    if any(r.density.dims != dims for r in results):
        raise ValueError("results must share grid dims")
    if shape is None:
        shape = np.ones(dims.num_elements, dtype=bool)
    else:
        shape = np.asarray(shape, dtype=bool).ravel()
        if shape.size != dims.num_elements:
            raise ValueError("shape length does not match grid")
    denom = max(int(shape.sum()), 1)
    binarized = [r.density.values[shape] >= 0.5 for r in results]
    reps: list[np.ndarray] = []
    for b in binarized:
        if not any(np.count_nonzero(b != rep) / denom <= threshold for rep in reps):
            reps.append(b)
    return len(reps)
