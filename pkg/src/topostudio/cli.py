"""Command line front end.

Subcommands: solve, bench, klm, export-stl, serve, bench-kernels.
Exit codes: 0 success, 2 invalid input (issues on stderr), 3 engine failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fixtures, klm
from .artifacts import metrics_payload, result_files
from .backends import (
    BackendKind,
    RemoteInvalidField,
    RemoteUnavailable,
    generate,
    generate_batch,
)
from .meshing import DegenerateContour, extract_contours, extrude, write_stl
from .model import DensityField, GridDims, spec_from_json, validate_problem
from .sketch import DegenerateArrow, EmptyShape, parse_sketch_file

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

_BACKEND_NAMES = {
    "det": "deterministic",
    "deterministic": "deterministic",
    "stoch": "stochastic",
    "stochastic": "stochastic",
    "remote": "remote",
}


def _err(*lines) -> None:
    for line in lines:
        print(line, file=sys.stderr)


def _parse_dims(text: str) -> GridDims:
    try:
        nelx, nely = (int(part) for part in text.lower().split("x"))
        return GridDims(nelx, nely)
    except (ValueError, TypeError):
        raise ValueError(f"dims must look like 64x32, got {text!r}") from None


def _resolve_backend(name: str, remote_url: str | None) -> BackendKind:
    canonical = _BACKEND_NAMES[name]
    if canonical == "deterministic":
        return BackendKind.deterministic()
    if canonical == "stochastic":
        return BackendKind.stochastic()
    if not remote_url:
        raise ValueError("--backend remote requires --remote-url")
    return BackendKind.remote(remote_url)


def cmd_solve(args) -> int:
    try:
        if args.spec:
            spec = spec_from_json(Path(args.spec).read_text())
        else:
            if args.volfrac is None:
                _err("--volfrac is required with --sketch")
                return EXIT_INVALID
            spec, _ = parse_sketch_file(
                args.sketch,
                _parse_dims(args.dims),
                args.volfrac,
                strength=args.strength if args.strength is not None else 0.8,
                seed=args.seed if args.seed is not None else 0,
                arrow_point=args.arrow_point,
            )
        overrides = {}
        if args.volfrac is not None:
            overrides["volfrac"] = args.volfrac
        if args.strength is not None:
            overrides["strength"] = args.strength
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            spec = spec.replace(**overrides)
        backend = _resolve_backend(args.backend, args.remote_url)
    except (OSError, ValueError, EmptyShape, DegenerateArrow) as exc:
        _err(str(exc))
        return EXIT_INVALID

    issues = validate_problem(spec)
    if issues:
        _err(*issues)
        return EXIT_INVALID

    try:
        result = generate(spec, backend, filter_mode=args.filter)
        files = result_files(
            spec, result.density, metrics_payload(result, backend.name), args.height
        )
    except (RemoteUnavailable, RemoteInvalidField, DegenerateContour) as exc:
        _err(str(exc))
        return EXIT_SOLVER
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        _err(f"solver failed: {exc}")
        return EXIT_SOLVER

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in files.items():
        (out / name).write_bytes(payload)
    print(
        f"{out}: compliance {result.compliance:.4f}, "
        f"volume fraction {result.achieved_volfrac:.4f}, "
        f"{result.iterations} iterations"
    )
    return EXIT_OK


def _backend_label(backend: fixtures.BenchBackend) -> str:
    if backend.strength is not None:
        return f"{backend.kind.name}({backend.strength:g})"
    return backend.kind.name


def cmd_bench(args) -> int:
    try:
        suite = fixtures.load_suite(args.suite)
    except (OSError, ValueError) as exc:
        _err(f"invalid suite: {exc}")
        return EXIT_INVALID
    samples = args.samples if args.samples is not None else suite.samples

    rows = []
    for task in suite.tasks:
        for backend in suite.backends:
            spec = task.spec
            if backend.strength is not None:
                spec = spec.replace(strength=backend.strength)
            try:
                if backend.kind.name == "deterministic":
                    results = [generate(spec, backend.kind)]
                else:
                    results = generate_batch(
                        spec,
                        backend.kind,
                        seeds=range(samples),
                        max_workers=args.workers,
                    )
            except (RemoteUnavailable, RemoteInvalidField) as exc:
                _err(str(exc))
                return EXIT_SOLVER
            compliance = np.array([r.compliance for r in results])
            vf = np.array([r.achieved_volfrac for r in results])
            rows.append(
                {
                    "task": task.name,
                    "backend": _backend_label(backend),
                    "mean_compliance": f"{compliance.mean():.9g}",
                    "std_compliance": f"{compliance.std():.9g}",
                    "mean_vf": f"{vf.mean():.9g}",
                    "std_vf": f"{vf.std():.9g}",
                }
            )

    fieldnames = ["task", "backend", "mean_compliance", "std_compliance", "mean_vf", "std_vf"]
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    print(f"{out}: {len(rows)} rows")
    return EXIT_OK


def cmd_klm(args) -> int:
    try:
        table = klm.OperatorTable.from_file(args.table) if args.table else klm.DEFAULT_TABLE
        workflow = klm.get_workflow(args.workflow)
        result = klm.workflow_time(workflow, args.iterations, table)
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INVALID
    if args.breakdown:
        payload = {
            "total_s": round(result.total, 2),
            "per_operator": {k: round(v, 2) for k, v in result.per_operator.items()},
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"{result.total:.2f}")
    return EXIT_OK


def cmd_export_stl(args) -> int:
    try:
        data = json.loads(Path(args.density).read_text())
        dims = GridDims(int(data["dims"]["nelx"]), int(data["dims"]["nely"]))
        field = DensityField(dims, np.asarray(data["values"], dtype=float))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _err(f"bad density file: {exc}")
        return EXIT_INVALID
    if args.height <= 0:
        _err("--height must be positive")
        return EXIT_INVALID
    try:
        mesh = extrude(extract_contours(field, args.iso), args.height)
    except DegenerateContour as exc:
        _err(str(exc))
        return EXIT_SOLVER
    Path(args.out).write_bytes(write_stl(mesh))
    print(f"{args.out}: {mesh.triangle_count} triangles")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run_server

    config = ServiceConfig.from_env(
        host=args.host,
        port=args.port,
        data_dir=args.data_dir,
        workers=args.workers,
        remote_url=args.remote_url,
    )
    run_server(config)
    return EXIT_OK


def cmd_bench_kernels(args) -> int:
    from . import fea
    from ._kernels import available_backends, get_impl

    spec = fixtures.cantilever(args.nelx, args.nely, 0.5)
    density = DensityField.uniform(spec.dims, spec.volfrac)
    ws = fea.workspace_for(spec)
    system = fea.assemble(density, spec)
    diag = system.data[ws.diag_slots]
    e_mod = fea.young_modulus(density, spec)
    u_full = np.zeros(spec.dims.num_dofs)
    zeros = np.zeros(ws.num_free)

    def drivers(impl):
        return {
            "assemble_values": lambda: impl.assemble_values(
                ws.slots, e_mod, ws.ke, ws.nnz
            ),
            "pcg_solve": lambda: impl.pcg_solve(
                ws.indptr,
                ws.indices,
                system.data,
                system.load,
                zeros,
                1.0 / diag,
                1e-8,
                2 * ws.num_free,
            ),
            "element_energies": lambda: impl.element_energies(u_full, ws.edofs, ws.ke),
        }

    names = available_backends()
    timings: dict = {}
    for name in names:
        impl = get_impl(name)
        for kernel, call in drivers(impl).items():
            call()  # warm up
            best = min(
                _timed(call, args.repeats) for _ in range(3)
            )
            timings[(kernel, name)] = best

    grid = f"{args.nelx}x{args.nely}"
    print(f"kernel timings on a {grid} grid, best of 3 x {args.repeats} calls")
    header = f"{'kernel':<18}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kernel in ("assemble_values", "pcg_solve", "element_energies"):
        row = f"{kernel:<18}"
        for name in names:
            row += f"{timings[(kernel, name)] * 1e3:>10.3f}ms"
        if len(names) == 2:
            ratio = timings[(kernel, names[0])] / timings[(kernel, names[1])]
            row += f"{ratio:>9.2f}x"
        print(row)
    if len(names) == 1:
        print("compiled kernels are not built; showing the numpy path only")
    return EXIT_OK


def _timed(call, repeats: int) -> float:
    start = time.perf_counter()
    for _ in range(repeats):
        call()
    return (time.perf_counter() - start) / repeats


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topostudio",
        description="2.5D structural design studio: solve, benchmark, analyze, export, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one generation and write its artifacts")
    source = solve.add_mutually_exclusive_group(required=True)
    source.add_argument("--sketch", help="constraint sketch PNG")
    source.add_argument("--spec", help="problem spec JSON")
    solve.add_argument("--volfrac", type=float, help="target volume fraction")
    solve.add_argument("--strength", type=float, help="regeneration strength in [0, 1]")
    solve.add_argument("--seed", type=int, help="noise seed")
    solve.add_argument(
        "--backend",
        choices=sorted(_BACKEND_NAMES),
        default="det",
        help="generation backend",
    )
    solve.add_argument("--remote-url", help="remote generation service URL")
    solve.add_argument("--dims", default="64x64", help="grid as NELXxNELY (sketch only)")
    solve.add_argument(
        "--arrow-point",
        choices=("tail", "tip"),
        default="tail",
        help="whether load arrows attack from the tail or the tip",
    )
    solve.add_argument(
        "--filter",
        choices=("sensitivity", "density"),
        default="sensitivity",
        help="regularization filter variant",
    )
    solve.add_argument("--height", type=float, default=10.0, help="extrusion height")
    solve.add_argument("--out", default="out", help="output directory")
    solve.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="run the benchmark suite, write a CSV report")
    bench.add_argument("--suite", help="suite JSON (defaults to the packaged one)")
    bench.add_argument("--samples", type=int, help="stochastic samples per task")
    bench.add_argument("--workers", type=int, default=None, help="parallel sample workers")
    bench.add_argument("--out", default="report.csv", help="CSV output path")
    bench.set_defaults(func=cmd_bench)

    klm_cmd = sub.add_parser("klm", help="keystroke-level workflow time estimate")
    klm_cmd.add_argument("--workflow", default="drawer", help="workflow name")
    klm_cmd.add_argument("--iterations", type=int, default=0, help="design iterations")
    klm_cmd.add_argument("--table", help="operator-time JSON overriding the defaults")
    klm_cmd.add_argument(
        "--breakdown", action="store_true", help="print JSON with per-operator seconds"
    )
    klm_cmd.set_defaults(func=cmd_klm)

    export = sub.add_parser("export-stl", help="extrude a density field to binary STL")
    export.add_argument("density", help="density.json produced by solve")
    export.add_argument("--height", type=float, default=10.0, help="extrusion height")
    export.add_argument("--iso", type=float, default=0.5, help="contour iso level")
    export.add_argument("--out", default="model.stl", help="STL output path")
    export.set_defaults(func=cmd_export_stl)

    serve = sub.add_parser("serve", help="start the HTTP job service")
    serve.add_argument("--host", default=None, help="bind address")
    serve.add_argument("--port", type=int, default=None, help="listen port")
    serve.add_argument("--data-dir", default=None, help="job store directory")
    serve.add_argument("--workers", type=int, default=None, help="solver worker threads")
    serve.add_argument("--remote-url", default=None, help="remote generation service URL")
    serve.set_defaults(func=cmd_serve)

    benchk = sub.add_parser("bench-kernels", help="time the numpy and compiled kernels")
    benchk.add_argument("--nelx", type=int, default=120)
    benchk.add_argument("--nely", type=int, default=40)
    benchk.add_argument("--repeats", type=int, default=5)
    benchk.set_defaults(func=cmd_bench_kernels)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
