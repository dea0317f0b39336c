"""Result artifact serialization shared by the CLI and the job service.

Keeping this in one place guarantees that a job fetched over HTTP and a
local solve of the same problem produce byte-identical files.
"""

from __future__ import annotations

import json

from .meshing import extract_contours, extrude, render_preview, write_stl
from .model import DensityField, GenerationResult, ProblemSpec

DEFAULT_HEIGHT = 10.0


def canonical_json(data: dict) -> bytes:
    """Stable bytes: sorted keys, compact separators."""
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode()


def density_payload(spec: ProblemSpec, density: DensityField) -> bytes:
    return canonical_json(
        {
            "dims": {"nelx": spec.dims.nelx, "nely": spec.dims.nely},
            "values": density.values.tolist(),
        }
    )


def metrics_payload(result: GenerationResult, backend_name: str) -> dict:
    return {
        "backend": backend_name,
        "compliance": result.compliance,
        "achieved_volfrac": result.achieved_volfrac,
        "iterations": result.iterations,
        "seed": result.seed,
        "converged": result.converged,
    }


def result_files(
    spec: ProblemSpec,
    density: DensityField,
    metrics: dict,
    height: float = DEFAULT_HEIGHT,
) -> dict:
    """All four artifacts for one finished generation, name -> bytes."""
    return {
        "density.json": density_payload(spec, density),
        "metrics.json": canonical_json(metrics),
        "preview.png": render_preview(density, mask=spec.mask, scale=4),
        "model.stl": write_stl(extrude(extract_contours(density), height)),
    }
