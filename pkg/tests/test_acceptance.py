"""End-to-end acceptance checks, one per shipped guarantee.

Every test prints exactly one "criterion NN ...: PASS/FAIL" line (visible
with -s, or in captured stdout otherwise) and enforces its runtime budget.
"""

import io
import json
import os
import struct
import tempfile
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from topostudio import cli, fea, klm, service, simp
from topostudio.backends import (
    BackendKind,
    diversity_report,
    generate,
    generate_batch,
)
from topostudio.fixtures import FIXTURE_BUILDERS, cantilever, fixture
from topostudio.meshing import (
    ContourSet,
    Polygon,
    extract_contours,
    extrude,
    is_watertight,
    mesh_volume,
    net_area,
    write_stl,
)
from topostudio.model import (
    DensityField,
    GridDims,
    Load,
    ProblemSpec,
    Support,
    spec_to_dict,
    validate_problem,
)
from topostudio import sketch


@contextmanager
def criterion(num, label, budget_s):
    start = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        print(
            f"criterion {num:02d} ({label}): "
            f"{'PASS' if ok else 'FAIL'} [{elapsed:.1f}s]"
        )


def cli_line(capsys, argv):
    assert cli.main(argv) == 0
    return capsys.readouterr().out.strip()


def test_criterion_01_interaction_time_exactness(capsys):
    with criterion(1, "interaction-time exactness", 1.0):
        for n in range(4):
            drawer = cli_line(
                capsys, ["klm", "--workflow", "drawer", "--iterations", str(n)]
            )
            geo = cli_line(capsys, ["klm", "--workflow", "geo", "--iterations", str(n)])
            assert drawer == f"{99.50 + 33.70 * n:.2f}"
            assert geo == f"{131.55 + 40.95 * n:.2f}"
            assert float(drawer) < float(geo)


def test_criterion_02_mental_preparation_share():
    with criterion(2, "mental-preparation share", 1.0):
        drawer = klm.workflow_time(klm.get_workflow("drawer"), 1)
        geo = klm.workflow_time(klm.get_workflow("geo"), 1)
        assert drawer.per_operator["M"] == pytest.approx(48.60, abs=0.005)
        assert geo.per_operator["M"] == pytest.approx(72.90, abs=0.005)
        assert drawer.per_operator["M"] < geo.per_operator["M"]


def test_criterion_03_linear_solver_equivalence():
    with criterion(3, "iterative/direct solver equivalence", 5.0):
        rng = np.random.default_rng(42)
        for _ in range(10):
            nelx = int(rng.integers(2, 9))
            nely = int(rng.integers(2, 7))
            dims = GridDims(nelx, nely)
            supports = tuple(
                Support(dims.node_at(0, y), True, True) for y in range(nely + 1)
            )
            angle = rng.uniform(0.0, 2.0 * np.pi)
            load = Load(
                dims.node_at(int(rng.integers(1, nelx + 1)), int(rng.integers(0, nely + 1))),
                float(np.cos(angle)),
                float(np.sin(angle)),
            )
            spec = ProblemSpec(
                dims,
                np.ones(dims.num_elements, dtype=bool),
                np.zeros(dims.num_elements, dtype=bool),
                (load,),
                supports,
                volfrac=0.5,
            )
            full = DensityField.uniform(dims, 1.0)
            c_dense = fea.analyze(full, spec, method="dense").compliance
            c_cg = fea.analyze(full, spec, method="pcg", tol=1e-12).compliance
            assert c_cg == pytest.approx(c_dense, rel=1e-8)


def test_criterion_04_sensitivity_correctness():
    with criterion(4, "sensitivity versus finite differences", 10.0):
        spec = cantilever(6, 4, 0.5)
        rng = np.random.default_rng(3)
        rho = rng.uniform(0.2, 0.9, spec.dims.num_elements)
        density = DensityField(spec.dims, rho)
        sol = fea.analyze(density, spec, method="dense")
        dc = fea.compliance_sensitivities(density, spec, sol)
        h = 1e-6
        for e in range(spec.dims.num_elements):
            if abs(dc[e]) <= 1e-10:
                continue
            up = rho.copy()
            up[e] += h
            down = rho.copy()
            down[e] -= h
            c_up = fea.analyze(DensityField(spec.dims, up), spec, method="dense").compliance
            c_down = fea.analyze(
                DensityField(spec.dims, down), spec, method="dense"
            ).compliance
            fd = (c_up - c_down) / (2.0 * h)
            assert fd == pytest.approx(dc[e], rel=1e-4)


def test_criterion_05_volume_contract():
    with criterion(5, "volume contract on shipped fixtures", 60.0):
        for name in ("cantilever60x20", "task1", "task2", "task3"):
            spec = fixture(name)
            result = generate(spec, BackendKind.deterministic())
            assert result.converged, f"{name} did not converge"
            assert result.iterations <= 200
            assert abs(result.achieved_volfrac - spec.volfrac) <= 1e-3, name


def test_criterion_06_mask_passivity_and_tradeoff():
    with criterion(6, "mask passivity and compliance trade-off", 60.0):
        spec = fixture("cantilever60x20")
        mask = np.zeros(spec.dims.num_elements, dtype=bool)
        mask.reshape(20, 60)[6:14, 20:35] = True  # 120 of 1200 elements
        assert mask.sum() * 10 == spec.shape.sum()
        masked_spec = spec.replace(mask=mask)

        violations = []

        def watch(k, values, _compliance, _change):
            if not np.all(values[mask] == 1.0):
                violations.append(k)

        masked = simp.optimize(masked_spec, on_iteration=watch)
        assert not violations, f"mask released on iterations {violations}"
        assert np.all(masked.density.values[mask] == 1.0)

        plain = simp.optimize(spec)
        assert masked.compliance >= plain.compliance * (1.0 - 1e-9)


def test_criterion_07_stochastic_bound_and_diversity():
    with criterion(7, "stochastic compliance bound and diversity", 600.0):
        workers = os.cpu_count() or 4
        spec = fixture("cantilever64")
        det = generate(spec, BackendKind.deterministic())
        samples = generate_batch(
            spec.replace(strength=0.8),
            BackendKind.stochastic(),
            seeds=range(20),
            max_workers=workers,
        )
        mean_c = float(np.mean([r.compliance for r in samples]))
        assert mean_c <= 2.0 * det.compliance

        multi = fixture("multiload").replace(strength=0.8)
        variants = generate_batch(
            multi, BackendKind.stochastic(), seeds=range(20), max_workers=workers
        )
        assert diversity_report(variants, shape=multi.shape) >= 2


def _raster_case(i):
    """Canvas with a known part, two pinned dots, and one axis arrow."""
    img = np.full((128, 128, 3), 255, dtype=np.uint8)
    img[8:120, 8:120] = (0, 0, 0)

    d1 = (12 + 2 * i, 12)
    d2 = (12, 100 - 2 * i)
    for x0, y0 in (d1, d2):
        img[y0 : y0 + 5, x0 : x0 + 5] = (0, 255, 0)
    expected_supports = {
        ((x0 // 2) + 1, (y0 // 2) + 1) for x0, y0 in (d1, d2)
    }

    tail = (40 + 2 * i, 60)
    length = 44
    if i % 2 == 0:  # horizontal, pointing +x
        tx, ty = tail
        img[ty, tx : tx + length - 9] = (255, 0, 0)
        tip_x = tx + length - 1
        for k in range(9):
            img[ty - k : ty + k + 1, tip_x - k] = (255, 0, 0)
        direction = (1.0, 0.0)
    else:  # vertical, pointing +y
        ty, tx = tail
        img[ty : ty + length - 9, tx] = (255, 0, 0)
        tip_y = ty + length - 1
        for k in range(9):
            img[tip_y - k, tx - k : tx + k + 1] = (255, 0, 0)
        direction = (0.0, 1.0)
    expected_load_node = (tail[0] // 2, tail[1] // 2) if i % 2 == 0 else (
        tail[1] // 2,
        tail[0] // 2,
    )
    return img, expected_supports, expected_load_node, direction


def test_criterion_08_sketch_round_trip():
    with criterion(8, "sketch round-trip exactness", 10.0):
        dims = GridDims(64, 64)
        for i in range(10):
            img, supports, load_node, direction = _raster_case(i)
            spec, _ = sketch.sketch_to_problem(
                sketch.classify_pixels(img), dims, volfrac=0.4
            )
            got = {
                (s.node % (dims.nelx + 1), s.node // (dims.nelx + 1))
                for s in spec.supports
            }
            assert got == supports, f"case {i}: supports {got} != {supports}"
            assert all(s.fix_x and s.fix_y for s in spec.supports)
            (load,) = spec.loads
            assert load.node == dims.node_at(*load_node), f"case {i}"
            assert load.fx == pytest.approx(direction[0], abs=0.05)
            assert load.fy == pytest.approx(direction[1], abs=0.05)

            doubled = np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)
            spec2, _ = sketch.sketch_to_problem(
                sketch.classify_pixels(doubled), dims, volfrac=0.4
            )
            assert spec2.supports == spec.supports
            assert spec2.loads[0].node == load.node
            assert spec2.loads[0].fx == pytest.approx(load.fx, abs=0.05)
            assert spec2.loads[0].fy == pytest.approx(load.fy, abs=0.05)
            assert np.array_equal(spec2.shape, spec.shape)
            assert np.array_equal(spec2.mask, spec.mask)


def test_criterion_09_export_integrity():
    with criterion(9, "watertight export integrity", 10.0):
        height = 7.0
        params = simp.OcParams(max_outer=12)
        for name, build in FIXTURE_BUILDERS.items():
            result = simp.optimize(build(), params)
            contours = extract_contours(result.density)
            mesh = extrude(contours, height)
            assert is_watertight(mesh), name
            assert mesh_volume(mesh) == pytest.approx(
                net_area(contours) * height, rel=1e-6
            ), name

        square = Polygon(
            np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]),
            "outer",
        )
        box = extrude(ContourSet((square,)), 2.0)
        blob = write_stl(box)
        assert box.triangle_count == 12
        assert len(blob) == 684
        assert struct.unpack("<I", blob[80:84])[0] == 12


def test_criterion_10_service_determinism_and_lineage():
    with criterion(10, "service determinism and lineage", 120.0):
        with tempfile.TemporaryDirectory() as tmp:
            app = service.create_app(service.ServiceConfig(data_dir=tmp))
            client = TestClient(app)
            try:
                def submit_and_wait(payload):
                    resp = client.post("/api/v1/jobs", json=payload)
                    assert resp.status_code == 202, resp.text
                    job_id = resp.json()["id"]
                    deadline = time.time() + 60
                    while time.time() < deadline:
                        body = client.get(f"/api/v1/jobs/{job_id}").json()
                        if body["state"] in ("DONE", "FAILED"):
                            assert body["state"] == "DONE", body.get("error")
                            return job_id
                        time.sleep(0.02)
                    raise AssertionError("job timed out")

                payload = {
                    "spec": spec_to_dict(cantilever(12, 6, 0.5)),
                    "backend": "stochastic",
                    "seed": 11,
                    "strength": 0.8,
                }
                job_a = submit_and_wait(payload)
                job_b = submit_and_wait(payload)
                bytes_a = client.get(f"/api/v1/jobs/{job_a}/artifacts/metrics.json").content
                bytes_b = client.get(f"/api/v1/jobs/{job_b}/artifacts/metrics.json").content
                assert bytes_a == bytes_b

                parent = submit_and_wait(
                    {"spec": spec_to_dict(cantilever(12, 6, 0.5)), "backend": "deterministic"}
                )
                resp = client.post(
                    f"/api/v1/jobs/{parent}/iterate",
                    json={"strength": 0.0, "backend": "stochastic"},
                )
                assert resp.status_code == 202
                child = resp.json()["id"]
                deadline = time.time() + 60
                while client.get(f"/api/v1/jobs/{child}").json()["state"] not in (
                    "DONE",
                    "FAILED",
                ):
                    assert time.time() < deadline
                    time.sleep(0.02)
                before = client.get(
                    f"/api/v1/jobs/{parent}/artifacts/density.json"
                ).json()["values"]
                after = client.get(
                    f"/api/v1/jobs/{child}/artifacts/density.json"
                ).json()["values"]
                np.testing.assert_allclose(after, before, atol=1e-6)

                bad = spec_to_dict(cantilever(12, 6, 0.5))
                bad["supports"] = []
                resp = client.post("/api/v1/jobs", json={"spec": bad})
                assert resp.status_code == 422
                from topostudio.model import spec_from_dict

                assert resp.json()["issues"] == validate_problem(spec_from_dict(bad))
            finally:
                app.state.service.close()
