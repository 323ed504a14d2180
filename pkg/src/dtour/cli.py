"""Command-line entry point: build, validate, project, bench, serve.

Exit codes: 0 success, 1 validation failure, 2 usage error,
3 environment error. Every command is deterministic for a given --seed.
Defaults may be supplied by an optional ``dtour.toml`` in the working
directory (one table per subcommand, keys mirroring the flags);
explicit flags win, and DTOUR_PORT overrides the configured port.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from ._validation import basis_drift
from .dataio import (
    Dataset,
    TourFile,
    load_columnar,
    load_csv,
    load_tour,
    save_columnar,
    save_tour,
    standardize,
)
from .engine import TourEngine, project
from .errors import BindFailure, DtourError
from .geometry import random_basis
from .path import compile_path
from .strategies import (
    LaplacianEigenmaps,
    PrincipalComponents,
    grand_tour_extend,
    le_tour,
    little_tour,
    sequential_tour,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_ENV = 3

# Stored bases past this drift fail validation (same limit as load_tour).
_DRIFT_LIMIT = 1e-6
_DRIFT_CLEAN = 1e-10


def _load_config():
    path = Path("dtour.toml")
    if not path.is_file():
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as f:
        return tomllib.load(f)


def _cfg(config, section, key, default):
    return config.get(section, {}).get(key, default)


def _load_dataset(path, label_columns=None, delimiter=","):
    path = str(path)
    if path.endswith(".csv"):
        return load_csv(path, delimiter=delimiter, label_columns=label_columns)
    return load_columnar(path)


def _print_tour_summary(tf, path):
    print(f"keyframes: {len(tf.keyframes)}")
    print(f"total geodesic length: {path.total_length:.6f}")
    segs = " ".join(f"{x:.6f}" for x in path.segment_lengths)
    print(f"segment lengths: {segs}")


def _cmd_build(args, config):
    label_cols = args.label_columns.split(",") if args.label_columns else None
    seed = args.seed if args.seed is not None else _cfg(config, "build", "seed", 0)
    std_mode = args.standardize or _cfg(config, "build", "standardize", "none")

    if args.strategy == "sequential":
        if not args.embeddings:
            print("error: --strategy sequential requires --embeddings DIR", file=sys.stderr)
            return EXIT_USAGE
        emb_dir = Path(args.embeddings)
        if not emb_dir.is_dir():
            print(f"error: {emb_dir} is not a directory", file=sys.stderr)
            return EXIT_ENV
        files = sorted(p for p in emb_dir.iterdir() if p.suffix == ".csv")
        if len(files) < 2:
            print(f"error: need at least 2 embedding CSVs in {emb_dir}", file=sys.stderr)
            return EXIT_VALIDATION
        embeddings = []
        for f in files:
            ds = load_csv(f)
            if ds.n_dims != 2:
                print(f"error: {f} has {ds.n_dims} columns, embeddings need 2", file=sys.stderr)
                return EXIT_VALIDATION
            embeddings.append(ds.matrix())
        labels = [f.stem for f in files]
        seq, aligned = sequential_tour(embeddings, labels=labels)
        dim_names = []
        for stem in labels:
            dim_names += [f"{stem}_x", f"{stem}_y"]
        tf = TourFile.from_sequence(seq, dim_names, "sequential", standardize="none")
        stacked = Dataset(
            [a[:, j].astype(np.float32) for a in aligned for j in (0, 1)],
            dim_names,
        )
        emb_out = args.embedding_output or str(Path(args.output).with_suffix("")) + ".embedding.dtc1"
        save_columnar(stacked, emb_out)
        print(f"stacked embedding dataset: {emb_out}")
    else:
        if not args.input:
            print("error: --input is required", file=sys.stderr)
            return EXIT_USAGE
        ds = _load_dataset(args.input, label_cols, args.delimiter)
        ds_std, _rec = standardize(ds, std_mode)
        x = ds_std.matrix()

        if args.strategy == "little":
            k = args.components if args.components is not None else _cfg(config, "build", "components", 8)
            pca = PrincipalComponents(n_components=int(k)).fit(x)
            seq = little_tour(pca, int(k))
            tf = TourFile.from_sequence(seq, ds.dim_names, "little", standardize=std_mode)
        elif args.strategy == "le":
            frames = args.frames if args.frames is not None else _cfg(config, "build", "frames", 6)
            knn = args.knn if args.knn is not None else _cfg(config, "build", "knn", 10)
            model = LaplacianEigenmaps(
                n_components=int(frames) + 1, knn_k=int(knn), max_points=args.max_points
            ).fit(x)
            seq = le_tour(model, int(frames))
            names = [f"le{i + 1}" for i in range(model.eigenvectors_.shape[1])]
            tf = TourFile.from_sequence(seq, names, "le", standardize="none")
            emb = Dataset(
                [model.eigenvectors_[:, j].astype(np.float32) for j in range(len(names))],
                names,
                list(ds.labels),
            )
            emb_out = args.embedding_output or str(Path(args.output).with_suffix("")) + ".embedding.dtc1"
            save_columnar(emb, emb_out)
            print(f"spectral embedding dataset: {emb_out} (serve the tour with it)")
        else:  # grand
            frames = args.frames if args.frames is not None else _cfg(config, "build", "frames", 8)
            if int(frames) < 2:
                print("error: --frames must be >= 2", file=sys.stderr)
                return EXIT_USAGE
            rng = np.random.default_rng(int(seed))
            seq = grand_tour_extend(random_basis(ds.n_dims, rng), int(frames) - 1, seed=int(seed) + 1)
            tf = TourFile.from_sequence(seq, ds.dim_names, "grand", standardize=std_mode)

    path = compile_path(tf.sequence())
    save_tour(tf, args.output)
    print(f"tour written: {args.output}")
    _print_tour_summary(tf, path)
    return EXIT_OK


def _cmd_validate(args, config):
    with open(args.tour, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            print(f"invalid JSON: {exc}", file=sys.stderr)
            return EXIT_VALIDATION

    violations = 0
    frames = doc.get("keyframes")
    dims = doc.get("dims")
    if not isinstance(frames, list) or not isinstance(dims, int):
        print("not a tour file (missing keyframes/dims)", file=sys.stderr)
        return EXIT_VALIDATION
    for i, item in enumerate(frames):
        flat = item.get("basis") if isinstance(item, dict) else None
        if not isinstance(flat, list) or len(flat) != 2 * dims:
            print(f"keyframe {i}: malformed basis")
            violations += 1
            continue
        basis = np.array(flat, dtype=np.float64).reshape(dims, 2)
        drift = basis_drift(basis)
        if drift > _DRIFT_LIMIT:
            print(f"keyframe {i}: drift {drift:.3e} VIOLATION")
            violations += 1
        elif drift > _DRIFT_CLEAN:
            print(f"keyframe {i}: drift {drift:.3e} (repaired on load)")
        else:
            print(f"keyframe {i}: drift {drift:.3e} ok")
    if violations:
        print(f"{violations} keyframe(s) violate orthonormality", file=sys.stderr)
        return EXIT_VALIDATION
    # Full schema pass (types, labels, loadings).
    load_tour(args.tour)
    print("tour file is valid")
    return EXIT_OK


def _make_engine(args, config, workers=1):
    tf = load_tour(args.tour)
    label_cols = getattr(args, "label_columns", None)
    label_cols = label_cols.split(",") if label_cols else None
    ds = _load_dataset(args.input, label_cols, getattr(args, "delimiter", ","))
    if ds.n_dims != tf.dims:
        raise DtourError(
            f"dataset has {ds.n_dims} dims but tour expects {tf.dims}"
            + (" (serve the companion embedding dataset)" if tf.strategy in ("le", "sequential") else "")
        )
    ds_std, _ = standardize(ds, tf.standardize)
    path = compile_path(tf.sequence())
    return TourEngine(ds_std, path, workers=workers), tf


def _cmd_project(args, config):
    engine, _tf = _make_engine(args, config)
    engine.scrub(float(args.t))
    fmt = args.format or ("dtc1" if str(args.output).endswith(".dtc1") else "csv")
    engine.snapshot(args.output, fmt=fmt)
    print(f"snapshot written: {args.output} (t={engine.state.t:.6f})")
    return EXIT_OK


def _cmd_bench(args, config):
    n = int(args.n)
    p = int(args.p)
    if args.points_file:
        ds = _load_dataset(args.points_file)
        n, p = ds.n_rows, ds.n_dims
    else:
        if n <= 0 or p < 2:
            print("error: --n must be positive and --p >= 2", file=sys.stderr)
            return EXIT_USAGE
        rng = np.random.default_rng(int(args.seed or 0))
        ds = Dataset(
            [rng.standard_normal(n).astype(np.float32) for _ in range(p)],
            [f"d{i}" for i in range(p)],
        )

    rng = np.random.default_rng(int(args.seed or 0) + 1)
    seq = grand_tour_extend(random_basis(p, rng), max(int(args.keyframes) - 1, 1), seed=7)
    t0 = time.perf_counter()
    path = compile_path(seq)
    compile_seconds = time.perf_counter() - t0

    basis = path.basis_at(0.37)
    project(ds, basis, workers=args.workers)  # warm-up
    t0 = time.perf_counter()
    reps = 0
    while time.perf_counter() - t0 < float(args.duration):
        project(ds, basis, workers=args.workers)
        reps += 1
    proj_per_sec = reps / (time.perf_counter() - t0)

    ts = rng.uniform(0.0, 1.0, 2000)
    lat = np.empty(len(ts))
    for i, t in enumerate(ts):
        t1 = time.perf_counter()
        path.basis_at(float(t))
        lat[i] = time.perf_counter() - t1
    report = {
        "n": n,
        "p": p,
        "keyframes": len(seq),
        "compile_seconds": compile_seconds,
        "projections_per_second": proj_per_sec,
        "basis_at_ms": {
            "median": float(np.median(lat) * 1e3),
            "p90": float(np.percentile(lat, 90) * 1e3),
            "p99": float(np.percentile(lat, 99) * 1e3),
        },
        "workers": args.workers,
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _default_ui_dir():
    bundled = Path(__file__).parent / "ui_dist"
    if bundled.is_dir():
        return bundled
    local = Path("frontend") / "dist"
    if local.is_dir():
        return local
    return None


def _cmd_serve(args, config):
    from .service import serve_blocking

    engine, _tf = _make_engine(args, config, workers=args.workers)
    if args.port is not None:
        port = int(args.port)
    elif os.environ.get("DTOUR_PORT"):
        port = int(os.environ["DTOUR_PORT"])
    else:
        port = int(_cfg(config, "serve", "port", 7700))
    ui_dir = Path(args.ui_dir) if args.ui_dir else _default_ui_dir()

    def ready(server):
        bound = server.bound_port
        print(f"session endpoint: ws://{args.host}:{bound}/ws", flush=True)
        print(f"ui: http://{args.host}:{bound}/", flush=True)
        if args.open:
            import webbrowser

            if not os.environ.get("DISPLAY") and sys.platform.startswith("linux"):
                print("warning: no display detected, continuing headless", flush=True)
            else:
                webbrowser.open(f"http://{args.host}:{bound}/")

    serve_blocking(engine, host=args.host, port=port, ui_dir=ui_dir, ready_callback=ready)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tour", description="Build, inspect, and serve projection tours."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="generate a tour file from data")
    b.add_argument("--input", help="dataset (.csv or .dtc1)")
    b.add_argument("--strategy", required=True, choices=["little", "le", "grand", "sequential"])
    b.add_argument("--components", type=int, help="principal components for the little tour")
    b.add_argument("--knn", type=int, help="neighbor count for the le tour")
    b.add_argument("--frames", type=int, help="keyframe count (le/grand)")
    b.add_argument("--seed", type=int, help="random seed")
    b.add_argument("--standardize", choices=["none", "zscore", "unit_range"])
    b.add_argument("--embeddings", help="directory of ordered embedding CSVs (sequential)")
    b.add_argument("--embedding-output", help="where to write the companion dataset (le/sequential)")
    b.add_argument("--label-columns", help="comma-separated label column names (csv input)")
    b.add_argument("--delimiter", default=",")
    b.add_argument("--max-points", type=int, default=50000, help="exact-solver row limit (le)")
    b.add_argument("--output", required=True)
    b.set_defaults(func=_cmd_build)

    v = sub.add_parser("validate", help="re-check orthonormality of a tour file")
    v.add_argument("tour")
    v.set_defaults(func=_cmd_validate)

    p = sub.add_parser("project", help="headless snapshot at a tour position")
    p.add_argument("--input", required=True)
    p.add_argument("--tour", required=True)
    p.add_argument("--t", type=float, required=True,
                   help="tour position; values outside [0,1] wrap on cyclic tours")
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["csv", "dtc1"])
    p.add_argument("--label-columns")
    p.add_argument("--delimiter", default=",")
    p.set_defaults(func=_cmd_project)

    n = sub.add_parser("bench", help="measure projection and lookup throughput")
    n.add_argument("--n", type=int, default=1000000)
    n.add_argument("--p", type=int, default=16)
    n.add_argument("--points-file")
    n.add_argument("--keyframes", type=int, default=10)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--duration", type=float, default=2.0)
    n.add_argument("--workers", type=int, default=1)
    n.set_defaults(func=_cmd_bench)

    s = sub.add_parser("serve", help="start the session server (and UI if bundled)")
    s.add_argument("--input", required=True)
    s.add_argument("--tour", required=True)
    s.add_argument("--port", type=int, default=None)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--open", action="store_true", help="open the UI in a browser")
    s.add_argument("--ui-dir", help="static UI bundle directory")
    s.add_argument("--label-columns")
    s.add_argument("--delimiter", default=",")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _load_config()
    try:
        return args.func(args, config)
    except BindFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except DtourError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
