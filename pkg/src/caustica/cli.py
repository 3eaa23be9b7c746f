"""
Command line front end.

    caustica analyze --config run.json --out results/
    caustica verify  --config run.json --out results/ --eps-sweep 1e-2,1e-5,7
    caustica correct --config run.json --out results/ --max-order 3

Exit codes: 0 ok, 2 configuration error, 3 internal inconsistency,
4 oracle failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_sweep
from .deformations import DeformationSpec, chi_exponent, detect_symmetry
from .fourier import CausticaError, IncompatibleEquationError, RotationNumber
from .oracle import OracleError, SupportEvaluator, eps_sweep, residual_function, scaling_fit, sweep_csv
from .persistence import InconsistencyError, correct_deformation, run_analysis

EXIT_OK, EXIT_CONFIG, EXIT_INCONSISTENT, EXIT_ORACLE = 0, 2, 3, 4
SLOPE_BAND = 0.1


class OracleFailure(CausticaError):
    """Oracle failure tagged with the rotation and epsilon that triggered it."""


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _tag(rot: RotationNumber) -> str:
    return f"{rot.p}_{rot.q}"


def predicted_chi(spec: DeformationSpec, q: int) -> int | None:
    n = spec.degree
    if n is None:
        return None
    return chi_exponent(detect_symmetry(spec, q=q), n, q)


def _analyze_one(cfg: RunConfig, rot: RotationNumber):
    report = run_analysis(cfg.spec, rot, cfg.max_order, cfg.tolerances)
    row = {
        "q": rot.q,
        "p": rot.p,
        "chi": predicted_chi(cfg.spec, rot.q),
        "verified_order": report.verified_order,
        "breaking_order": report.breaking_order,
    }
    return row, report.to_json_obj()


def _verify_one(cfg: RunConfig, rot: RotationNumber, sweep: list[float]):
    st = cfg.oracle
    report = run_analysis(cfg.spec, rot, cfg.max_order, cfg.tolerances, extended=True, dps=st.dps)
    m = report.verified_order
    K = st.truncation or m + 3
    pairs = []
    for eps in sweep:
        try:
            ev = SupportEvaluator(cfg.spec, eps, K, dps=st.dps)
            res = residual_function(report.state, ev, st.grid, order=m)
        except OracleError as exc:
            raise OracleFailure(f"rotation {rot}, eps={eps:g}: {exc}") from exc
        pairs.append((eps, res.max_abs))
    fit = scaling_fit(pairs, floor=10.0 ** (-(st.dps - 5)))
    expected = m + 1
    passed = fit.beyond_measurable or fit.slope >= expected - SLOPE_BAND
    status = "beyond measurable order" if fit.beyond_measurable else ("PASS" if passed else "FAIL")
    row = {
        "q": rot.q,
        "p": rot.p,
        "verified_order": m,
        "expected_slope": expected,
        "slope": fit.slope,
        "r2": fit.r2,
        "status": status,
    }
    return row, pairs


def _correct_one(cfg: RunConfig, rot: RotationNumber, target: int):
    try:
        h, report, applied = correct_deformation(cfg.spec, rot, target, cfg.tolerances)
    except IncompatibleEquationError as exc:
        raise InconsistencyError(f"rotation {rot}: {exc}") from exc
    if report.verified_order < target:
        raise InconsistencyError(f"rotation {rot}: corrected spec only reaches order {report.verified_order}")
    corrected = DeformationSpec.fourier(h)
    doc = {
        "deformation": corrected.to_json_obj(),
        "rotations": {"p": rot.p, "q": rot.q},
        "max_order": target,
    }
    row = {"q": rot.q, "p": rot.p, "target_order": target,
           "corrected_orders": " ".join(str(k) for k, _ in applied),
           "verified_order": report.verified_order}
    return row, doc


def _workers(n_jobs: int) -> int:
    cap = os.environ.get("CAUSTICA_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"CAUSTICA_THREADS must be an integer, got {cap!r}")
    return max(1, min(limit, n_jobs))


def _map(fn, cfg: RunConfig, extra=()):
    jobs = [(cfg, rot, *extra) for rot in cfg.rotations]
    n = _workers(len(jobs))
    if n == 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v)) for k, v in r.items()})
    return buf.getvalue()


def _print_table(rows: list[dict]):
    if not rows:
        return
    cols = list(rows[0])
    cells = [[("-" if r[c] is None else (f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]))) for c in cols]
             for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


def cmd_analyze(cfg: RunConfig, out: Path, plots: bool = True) -> int:
    results = _map(_analyze_one, cfg)
    rows = []
    for row, report in results:
        (out / f"report_{row['p']}_{row['q']}.json").write_text(_dumps(report))
        rows.append(row)
    (out / "summary.csv").write_text(_csv(rows))
    _print_table(rows)
    if plots:
        from .plotting import plot_summary
        plot_summary(rows, out / "summary.png")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, plots: bool = True) -> int:
    sweep = eps_sweep(*cfg.oracle.eps_sweep)
    results = _map(_verify_one, cfg, (sweep,))
    rows = []
    for row, pairs in results:
        tag = f"{row['p']}_{row['q']}"
        (out / f"residuals_{tag}.csv").write_text(sweep_csv(pairs))
        if plots:
            from .plotting import plot_scaling
            plot_scaling(pairs, row["slope"], row["expected_slope"], f"{row['p']}/{row['q']}",
                         out / f"scaling_{tag}.png")
        rows.append(row)
    (out / "verify_summary.csv").write_text(_csv(rows))
    _print_table(rows)
    failed = [f"{r['p']}/{r['q']}" for r in rows if r["status"] == "FAIL"]
    if failed:
        print(f"oracle failure: residual slope below the verified order for {', '.join(failed)}", file=sys.stderr)
        return EXIT_ORACLE
    return EXIT_OK


def cmd_correct(cfg: RunConfig, out: Path, plots: bool = True) -> int:
    target = cfg.target_order or cfg.max_order
    results = _map(_correct_one, cfg, (target,))
    rows = []
    for row, doc in results:
        (out / f"corrected_{row['p']}_{row['q']}.json").write_text(_dumps(doc))
        rows.append(row)
    (out / "correct_summary.csv").write_text(_csv(rows))
    _print_table(rows)
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "verify": cmd_verify, "correct": cmd_correct}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caustica",
                                 description="Persistence order of resonant caustics in deformed circular billiards.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (default: config output.dir or ./caustica_out)")
    ap.add_argument("--max-order", type=int, help="override max_order (target order for 'correct')")
    ap.add_argument("--eps-sweep", help="geometric epsilon sweep lo,hi,n")
    ap.add_argument("--p1-only", action="store_true", help="keep only rotation numbers 1/q")
    ap.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    return ap


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.max_order is not None:
        from .config import _order
        k = _order(args.max_order, "--max-order")
        cfg = dataclasses.replace(cfg, max_order=k, target_order=k if args.command == "correct" else cfg.target_order)
    if args.eps_sweep is not None:
        cfg = dataclasses.replace(cfg, oracle=dataclasses.replace(cfg.oracle, eps_sweep=parse_sweep(args.eps_sweep)))
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config, p1_only=args.p1_only), args)
        out = Path(args.out) if args.out else (cfg.out_dir or Path("caustica_out"))
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, plots=not args.no_plots)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except CausticaError as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
