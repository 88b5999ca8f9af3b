"""Command-line entry point: ``conewave solve | sample | verify``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import io as cio
from . import presets, suites
from .errors import DomainError, InvalidArgumentError, UnsupportedDimensionError, ValidationError
from .rng import STREAM_BOUNDARY, RngStream
from .sampling import sample_brownian_boundary
from .solver import conservation_report, sample_boundary_functions, solve

EXIT_OK, EXIT_CHECK, EXIT_ARGS, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3, 4
# field files switch to binary once the side exceeds 2^9 cells
BINARY_FROM = 9

log = logging.getLogger("conewave")


def _default_seed() -> int:
    raw = os.environ.get("CONEWAVE_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgumentError(f"CONEWAVE_SEED must be an integer, got {raw!r}") from None


def _field_format(fmt: str, size_exp: int) -> str:
    if fmt == "auto":
        return "bin" if size_exp >= BINARY_FROM else "csv"
    return fmt


def _write_field(out: Path, stem: str, field, fmt: str) -> str:
    name = f"{stem}.{fmt}"
    if fmt == "bin":
        cio.write_field_binary(out / name, field)
    else:
        cio.write_field_csv(out / name, field)
    return name


def cmd_solve(args) -> int:
    start = time.perf_counter()
    out = Path(args.out)
    if args.boundary:
        boundary = cio.read_boundary_csv(args.boundary)
        params = {"boundary": str(args.boundary), "d": boundary.d, "M": boundary.M, "N": boundary.N}
        size_exp = max(boundary.M, boundary.N).bit_length() - 1
    else:
        if args.mesh_exp is None:
            raise InvalidArgumentError("--mesh-exp is required with --preset")
        d = args.d if args.d is not None else {"circle-sin": 1, "great-circle-precession": 2}.get(args.preset, 1)
        boundary = sample_boundary_functions(presets.get(args.preset, d), args.mesh_exp, args.window_exp)
        params = {"preset": args.preset, "d": d, "mesh_exp": args.mesh_exp, "window_exp": args.window_exp,
                  "M": boundary.M, "N": boundary.N, "t": 2.0 ** -args.mesh_exp}
        size_exp = args.mesh_exp + args.window_exp
    forcing = cio.read_forcing_csv(args.forcing) if args.forcing else None
    if forcing is not None:
        params["forcing"] = str(args.forcing)
    params["renormalize"] = bool(args.renormalize)
    field = solve(boundary, forcing=forcing, renormalize=args.renormalize, threads=args.threads)
    out.mkdir(parents=True, exist_ok=True)
    outputs = [_write_field(out, "field", field, _field_format(args.format, size_exp))]
    report = conservation_report(field).to_dict()
    report["min_axis_norm"] = field.min_axis_norm
    report["forced"] = field.forced
    cio.write_json(out / "conservation.json", report)
    outputs.append("conservation.json")
    cio.write_manifest(out, "solve", params, outputs, time.perf_counter() - start, __version__)
    log.info("solve: wrote %s (max deviation %.3e, drift %.3e)", outputs[0], report["max_deviation"],
             report["norm_drift"])
    return EXIT_OK


def _sample_one(args, r: int):
    stream = RngStream(args.seed, args.seed ^ r)
    b = sample_brownian_boundary(args.mesh_exp, args.window_exp, args.d, stream.substream(STREAM_BOUNDARY),
                                 substeps=args.substeps)
    return b, solve(b, renormalize=args.renormalize)


def cmd_sample(args) -> int:
    start = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = _field_format(args.format, args.mesh_exp + args.window_exp)
    outputs = []

    def work(r):
        b, field = _sample_one(args, r)
        names = [_write_field(out, f"field_{r:05d}", field, fmt)]
        if args.boundaries:
            cio.write_boundary_csv(out / f"boundary_{r:05d}.csv", b)
            names.append(f"boundary_{r:05d}.csv")
        return names

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        for names in pool.map(work, range(args.replicas)):
            outputs.extend(names)
    params = {"d": args.d, "mesh_exp": args.mesh_exp, "window_exp": args.window_exp,
              "M": 2 ** (args.mesh_exp + args.window_exp), "t": 2.0 ** -args.mesh_exp,
              "replicas": args.replicas, "seed": args.seed,
              "stream_ids": [args.seed ^ r for r in range(args.replicas)],
              "method": "exact-wrap" if args.d == 1 else "geodesic-walk", "substeps": args.substeps,
              "renormalize": bool(args.renormalize)}
    cio.write_manifest(out, "sample", params, outputs, time.perf_counter() - start, __version__)
    log.info("sample: wrote %d files to %s", len(outputs), out)
    return EXIT_OK


def _tables(report: dict) -> dict[str, tuple[list[str], list]]:
    """Plot-ready CSV tables extracted from a suite report."""
    tables = {}
    name, stats = report["test"], report["statistics"]
    if name == "all":
        for sub in stats.values():
            tables.update(_tables(sub))
    elif name == "modulus":
        for key, val in stats.items():
            if isinstance(val, dict) and "tail_curve" in val:
                tables[f"modulus_tail_{key.replace('=', '')}.csv"] = (["A", "probability"], val["tail_curve"])
    elif name == "converge":
        for key in ("d=1", "d=2"):
            rows = stats[key]
            cols = list(rows[0])
            tables[f"converge_{key.replace('=', '')}.csv"] = (cols, [[r[c] for c in cols] for r in rows])
    elif name == "heat-tail":
        tables["heat_tail.csv"] = (["A", "exceedance"], [[float(a), v] for a, v in stats["exceedance"].items()])
    return tables


def cmd_verify(args) -> int:
    start = time.perf_counter()
    out = Path(args.out or f"verify-{args.suite}")
    cfg = suites.SuiteConfig(seed=args.seed, d=args.d, mesh_exp=args.mesh_exp, window_exp=args.window_exp,
                             replicas=args.replicas, corrupt=args.corrupt, threads=args.threads)
    report = suites.run(args.suite, cfg)
    out.mkdir(parents=True, exist_ok=True)
    cio.write_json(out / "report.json", report)
    outputs = ["report.json"]
    for fname, (header, rows) in _tables(report).items():
        cio.write_table_csv(out / fname, header, rows)
        outputs.append(fname)
    params = {"suite": args.suite, "seed": args.seed, "d": args.d, "mesh_exp": args.mesh_exp,
              "window_exp": args.window_exp, "replicas": args.replicas, "corrupt": args.corrupt}
    cio.write_manifest(out, "verify", params, outputs, time.perf_counter() - start, __version__)
    verdict = "PASS" if report["decision"] else "FAIL"
    print(f"{args.suite}: {verdict}")
    return EXIT_OK if report["decision"] else EXIT_CHECK


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conewave", description="Discrete wave maps on the light cone.")
    p.add_argument("--version", action="version", version=f"conewave {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mesh_default):
        sp.add_argument("--d", type=_positive, default=None, help="sphere dimension")
        sp.add_argument("--mesh-exp", type=_nonneg, default=mesh_default, help="N: mesh size 2^-N")
        sp.add_argument("--window-exp", type=_nonneg, default=0, help="L: window [0, 2^L]^2")
        sp.add_argument("--threads", type=_positive, default=1)

    s = sub.add_parser("solve", help="solve from a preset or a boundary file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=presets.PRESETS)
    src.add_argument("--boundary", type=Path, help="boundary CSV (side,index,x0..)")
    s.add_argument("--forcing", type=Path, help="forcing CSV (m,n,x0..)")
    common(s, None)
    s.add_argument("--renormalize", action="store_true", help="project every cell back to the sphere")
    s.add_argument("--format", choices=("csv", "bin", "auto"), default="auto")
    s.add_argument("--out", default="solve-out")
    s.set_defaults(func=cmd_solve)

    sm = sub.add_parser("sample", help="sample Brownian boundaries and solve")
    common(sm, 6)
    sm.add_argument("--replicas", type=_nonneg, default=1)
    sm.add_argument("--seed", type=_nonneg, default=None)
    sm.add_argument("--substeps", type=_positive, default=64)
    sm.add_argument("--renormalize", action="store_true")
    sm.add_argument("--boundaries", action="store_true", help="also write boundary CSVs")
    sm.add_argument("--format", choices=("csv", "bin", "auto"), default="auto")
    sm.add_argument("--out", default="sample-out")
    sm.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=list(suites.SUITES) + ["all"])
    common(v, None)
    v.set_defaults(window_exp=None)
    v.add_argument("--replicas", type=_positive, default=None)
    v.add_argument("--seed", type=_nonneg, default=None)
    v.add_argument("--corrupt", choices=("identity-step", "identity-map"), default=None,
                   help="negative control for chain-invariance")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        if args.command == "sample" and args.d is None:
            args.d = 1
        if args.command == "verify" and args.corrupt and args.suite != "chain-invariance":
            raise InvalidArgumentError("--corrupt only applies to chain-invariance")
        return args.func(args)
    except (InvalidArgumentError, UnsupportedDimensionError, DomainError) as exc:
        print(f"conewave: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ValidationError as exc:
        print(f"conewave: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"conewave: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
