import csv
import io
import json
import struct

import numpy as np
import pytest
from PIL import Image

from topostudio import cli, klm
from topostudio.artifacts import metrics_payload, result_files
from topostudio.backends import BackendKind, generate
from topostudio.fixtures import cantilever
from topostudio.model import spec_to_dict, spec_to_json


@pytest.fixture()
def tiny_spec_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(spec_to_json(cantilever(12, 6, 0.5)))
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


def test_klm_prints_plain_totals(capsys):
    assert run(["klm", "--workflow", "drawer", "--iterations", 0]) == 0
    assert capsys.readouterr().out.strip() == "99.50"
    assert run(["klm", "--workflow", "geo", "--iterations", 2]) == 0
    assert capsys.readouterr().out.strip() == "213.45"


def test_klm_breakdown_json(capsys):
    assert run(["klm", "--workflow", "drawer", "--iterations", 1, "--breakdown"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["total_s"] == pytest.approx(133.20)
    assert payload["per_operator"]["M"] == pytest.approx(48.60)


def test_klm_rejects_bad_input(capsys):
    assert run(["klm", "--workflow", "sculpt"]) == 2
    assert run(["klm", "--workflow", "geo", "--iterations", -1]) == 2


def test_klm_table_override(tmp_path, capsys):
    table_file = tmp_path / "table.json"
    table_file.write_text(json.dumps({"M": 0.5}))
    assert run(["klm", "--workflow", "drawer", "--table", table_file]) == 0
    out = float(capsys.readouterr().out)
    expected = klm.workflow_time(
        klm.DRAWER_WORKFLOW, 0, klm.OperatorTable.from_mapping({"M": 0.5})
    ).total
    assert out == pytest.approx(round(expected, 2))
    assert out < 99.50


def test_solve_spec_writes_artifacts(tiny_spec_file, tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["solve", "--spec", tiny_spec_file, "--out", out]) == 0
    names = {"density.json", "preview.png", "model.stl", "metrics.json"}
    assert {p.name for p in out.iterdir()} == names

    # thin adapter: identical bytes to the equivalent library calls
    spec = cantilever(12, 6, 0.5)
    result = generate(spec, BackendKind.deterministic())
    files = result_files(spec, result.density, metrics_payload(result, "deterministic"), 10.0)
    for name in names:
        assert (out / name).read_bytes() == files[name]


def test_solve_applies_overrides(tiny_spec_file, tmp_path):
    out = tmp_path / "run"
    assert run(["solve", "--spec", tiny_spec_file, "--volfrac", 0.4, "--out", out]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["achieved_volfrac"] == pytest.approx(0.4, abs=1e-3)


def test_solve_validation_failure_exits_2(tmp_path, capsys):
    data = spec_to_dict(cantilever(12, 6, 0.5))
    data["supports"] = []
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert run(["solve", "--spec", bad, "--out", tmp_path / "x"]) == 2
    assert "unconstrained" in capsys.readouterr().err


def test_solve_missing_file_exits_2(tmp_path):
    assert run(["solve", "--spec", tmp_path / "nope.json", "--out", tmp_path]) == 2


def test_solve_unreachable_remote_exits_3(tiny_spec_file, tmp_path):
    code = run(
        [
            "solve",
            "--spec",
            tiny_spec_file,
            "--backend",
            "remote",
            "--remote-url",
            "http://127.0.0.1:1/api",
            "--out",
            tmp_path / "x",
        ]
    )
    assert code == 3


def test_solve_remote_without_url_exits_2(tiny_spec_file, tmp_path):
    assert (
        run(["solve", "--spec", tiny_spec_file, "--backend", "remote", "--out", tmp_path])
        == 2
    )


def sketch_file(tmp_path):
    img = np.full((128, 128, 3), 255, dtype=np.uint8)
    img[:, :64] = (0, 0, 0)
    img[4:10, 4:10] = (0, 255, 0)
    img[118:124, 4:10] = (0, 255, 0)
    img[64, 20:46] = (255, 0, 0)
    for k in range(9):
        img[64 - k : 64 + k + 1, 54 - k] = (255, 0, 0)
    path = tmp_path / "sketch.png"
    Image.fromarray(img).save(path)
    return path


def test_solve_sketch_happy_path(tmp_path):
    out = tmp_path / "run"
    code = run(
        [
            "solve",
            "--sketch",
            sketch_file(tmp_path),
            "--dims",
            "32x32",
            "--volfrac",
            0.4,
            "--out",
            out,
        ]
    )
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["achieved_volfrac"] == pytest.approx(0.4, abs=1e-3)


def test_solve_sketch_requires_volfrac(tmp_path):
    assert run(["solve", "--sketch", sketch_file(tmp_path), "--out", tmp_path]) == 2


def test_solve_empty_sketch_exits_2(tmp_path, capsys):
    path = tmp_path / "blank.png"
    Image.new("RGB", (32, 32), (255, 255, 255)).save(path)
    assert run(["solve", "--sketch", path, "--volfrac", 0.4, "--out", tmp_path]) == 2
    assert "silhouette" in capsys.readouterr().err


def test_export_stl_round_trip(tiny_spec_file, tmp_path):
    out = tmp_path / "run"
    assert run(["solve", "--spec", tiny_spec_file, "--out", out]) == 0
    stl_path = tmp_path / "part.stl"
    assert (
        run(["export-stl", out / "density.json", "--height", 4, "--out", stl_path]) == 0
    )
    blob = stl_path.read_bytes()
    count = struct.unpack("<I", blob[80:84])[0]
    assert len(blob) == 84 + 50 * count


def test_export_stl_rejects_bad_input(tmp_path):
    bad = tmp_path / "junk.json"
    bad.write_text("{")
    assert run(["export-stl", bad, "--out", tmp_path / "x.stl"]) == 2
    good = tmp_path / "d.json"
    good.write_text(json.dumps({"dims": {"nelx": 2, "nely": 1}, "values": [1, 1]}))
    assert run(["export-stl", good, "--height", -1, "--out", tmp_path / "x.stl"]) == 2


def tiny_suite(tmp_path, samples=3):
    suite = {
        "samples": samples,
        "backends": [{"kind": "deterministic"}, {"kind": "stochastic", "strength": 0.8}],
        "tasks": [
            {"name": "alpha", "spec": spec_to_dict(cantilever(12, 6, 0.5))},
            {"name": "beta", "spec": spec_to_dict(cantilever(8, 4, 0.5))},
        ],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    return path


def test_bench_report_layout(tmp_path):
    report = tmp_path / "report.csv"
    assert run(["bench", "--suite", tiny_suite(tmp_path), "--out", report]) == 0
    with open(report, newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == [
            "task",
            "backend",
            "mean_compliance",
            "std_compliance",
            "mean_vf",
            "std_vf",
        ]
        rows = list(reader)
    assert [(r["task"], r["backend"]) for r in rows] == [
        ("alpha", "deterministic"),
        ("alpha", "stochastic(0.8)"),
        ("beta", "deterministic"),
        ("beta", "stochastic(0.8)"),
    ]
    for row in rows:
        if row["backend"] == "deterministic":
            assert float(row["std_compliance"]) == 0.0
        assert float(row["mean_vf"]) == pytest.approx(0.5, abs=1e-3)
        assert float(row["std_compliance"]) >= 0.0


def test_bench_samples_flag_overrides_suite(tmp_path):
    report = tmp_path / "report.csv"
    code = run(
        ["bench", "--suite", tiny_suite(tmp_path, samples=50), "--samples", 2, "--out", report]
    )
    assert code == 0
    assert report.exists()


def test_bench_invalid_suite_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tasks": []}))
    assert run(["bench", "--suite", bad, "--out", tmp_path / "r.csv"]) == 2
    assert "suite" in capsys.readouterr().err


def test_bench_kernels_prints_table(capsys):
    assert run(["bench-kernels", "--nelx", 16, "--nely", 8, "--repeats", 1]) == 0
    out = capsys.readouterr().out
    assert "pcg_solve" in out
    assert "pure" in out


def test_serve_plumbs_config(monkeypatch):
    captured = {}

    def fake_run_server(config):
        captured["config"] = config

    import topostudio.service as service

    monkeypatch.setattr(service, "run_server", fake_run_server)
    assert run(["serve", "--port", 9321, "--data-dir", "/tmp/svc", "--workers", 2]) == 0
    cfg = captured["config"]
    assert cfg.port == 9321
    assert cfg.data_dir == "/tmp/svc"
    assert cfg.workers == 2


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2
