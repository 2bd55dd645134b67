"""Command-line front end.

Subcommands: analyze (one parameter point), sweep (grid -> CSV), simulate
(end-to-end delivery run -> JSON report), gap-scan (worst optimality gap
over a grid), csit-load (delayed-feedback cost report). Report commands can
additionally render a PNG with --plot.

Conventions: exact rationals print as "num/den (decimal)"; alpha, M and
gamma flags accept fractions ("3/4") or decimals (snapped to the nearest
fraction with denominator <= 10^6). Exit codes: 0 ok, 2 invalid arguments,
3 assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import analysis, delivery, figures
from .analysis import NoDeliveryNeeded, SystemParams
from .scheme import InfeasibleSplit

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ASSERTION = 3

CSV_COLUMNS = ["K", "N", "M", "gamma", "alpha", "eta",
               "T_simple", "T_best", "T_lower", "dof", "gap"]


def parse_ratio(text: str) -> Fraction:
    """Fraction from "3/4"-style or decimal text (denominator capped at 10^6)."""
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    try:
        value = Fraction(text)
    except ValueError:
        value = Fraction(float(text))
    return value.limit_denominator(10 ** 6)


def fmt_exact(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, Fraction):
        return f"{value} ({float(value):.6g})"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: vary `axis` over `points` with the remaining params fixed."""

    axis: str          # "alpha" | "gamma" | "k"
    points: tuple
    K: int | None
    N: int | None
    M: Fraction | None
    alpha: Fraction | None
    gamma: Fraction | None
    log_approx: bool = False


def point_row(K: int, N: int, M: Fraction, alpha: Fraction, log_approx: bool = False) -> dict:
    """One OutputRow; closed-form columns go NA when the cumulative cache is
    not an integer in 1..K-1 (the regime the formulas cover)."""
    params = SystemParams(K=K, N=N, M=M, alpha=alpha)
    row = {"K": K, "N": N, "M": params.M, "gamma": params.gamma, "alpha": params.alpha,
           "eta": None, "T_simple": None, "T_best": None, "T_lower": None,
           "dof": None, "gap": None}
    try:
        pt = analysis.evaluate(params)
    except (NoDeliveryNeeded, ValueError):
        pt = None
    if pt is not None:
        row.update(eta=pt.eta_selected, T_simple=pt.T_ach_simple, T_best=pt.T_ach_best,
                   T_lower=pt.T_lower, dof=pt.dof, gap=pt.gap)
    if log_approx:
        gamma = params.gamma
        row["dof_log"] = analysis.dof_log_approx(gamma, alpha) if 0 < gamma < 1 else None
    return row


def run_sweep(spec: SweepSpec) -> list[dict]:
    rows = []
    for p in spec.points:
        if spec.axis == "alpha":
            rows.append(point_row(spec.K, spec.N, spec.M, Fraction(p), spec.log_approx))
        elif spec.axis == "gamma":
            rows.append(point_row(spec.K, spec.N, Fraction(p) * spec.N, spec.alpha,
                                  spec.log_approx))
        elif spec.axis == "k":
            k = int(p)
            rows.append(point_row(k, k, spec.gamma * k, spec.alpha, spec.log_approx))
        else:
            raise ValueError(f"unknown sweep axis {spec.axis!r}")
    return rows


def _row_to_json(row: dict) -> dict:
    out = {}
    for key, value in row.items():
        if isinstance(value, Fraction):
            out[key] = {"num": value.numerator, "den": value.denominator,
                        "decimal": float(value)}
        else:
            out[key] = value
    return out


def _write_rows_csv(rows: list[dict], stream, log_approx: bool) -> None:
    columns = CSV_COLUMNS + (["dof_log"] if log_approx else [])
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_exact(row.get(c)) for c in columns])


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    params = SystemParams(K=args.k, N=args.n, M=args.m, alpha=args.alpha)
    try:
        params.delivery_budget()
    except NoDeliveryNeeded:
        print("no delivery needed: every user caches the whole library (Gamma = K)")
        return EXIT_OK
    row = point_row(args.k, args.n, args.m, args.alpha)
    if row["eta"] is None:
        raise ValueError(f"cumulative cache Gamma={params.Gamma} must be an integer in "
                         f"1..{args.k - 1}")
    if args.format == "json":
        print(json.dumps(_row_to_json(row), indent=2))
    elif args.format == "csv":
        buf = io.StringIO()
        _write_rows_csv([row], buf, log_approx=False)
        sys.stdout.write(buf.getvalue())
    else:
        for key in CSV_COLUMNS:
            print(f"{key:<10} {fmt_exact(row[key])}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    points = _grid_points(args)
    spec = SweepSpec(axis=args.axis, points=tuple(points), K=args.k, N=args.n, M=args.m,
                     alpha=args.alpha, gamma=args.gamma, log_approx=args.log_approx)
    _check_sweep_flags(spec)
    rows = run_sweep(spec)
    if args.format == "json":
        _emit(json.dumps([_row_to_json(r) for r in rows], indent=2) + "\n", args.out)
    else:
        buf = io.StringIO()
        _write_rows_csv(rows, buf, args.log_approx)
        _emit(buf.getvalue(), args.out)
    if args.plot:
        figures.render_sweep(rows, "K" if args.axis == "k" else args.axis, args.plot)
    return EXIT_OK


def _check_sweep_flags(spec: SweepSpec) -> None:
    if not spec.points:
        raise ValueError("sweep grid is empty")
    need = {
        "alpha": {"k": spec.K, "n": spec.N, "m": spec.M},
        "gamma": {"k": spec.K, "n": spec.N, "alpha": spec.alpha},
        "k": {"gamma": spec.gamma, "alpha": spec.alpha},
    }
    missing = [flag for flag, value in need[spec.axis].items() if value is None]
    if missing:
        raise ValueError(f"axis {spec.axis!r} needs --" + ", --".join(missing))


def _grid_points(args) -> list:
    cast = (lambda s: int(s)) if args.axis == "k" else parse_ratio
    if args.points:
        return [cast(p) for p in args.points.split(",") if p.strip()]
    if args.start is None or args.stop is None or args.step is None:
        raise ValueError("provide either --points or --start/--stop/--step")
    start, stop, step = (cast(str(args.start)), cast(str(args.stop)), cast(str(args.step)))
    if step <= 0:
        raise ValueError("--step must be positive")
    points, value = [], start
    while value <= stop:
        points.append(value)
        value = value + step
    return points


def cmd_simulate(args) -> int:
    params = SystemParams(K=args.k, N=args.n, M=args.m, alpha=args.alpha)
    requests = None
    if args.requests:
        requests = tuple(int(r) for r in args.requests.split(","))
    report = delivery.simulate(params, requests=requests, seed=args.seed,
                               keep_transcript=bool(args.transcript))
    if args.transcript:
        with open(args.transcript, "w") as fh:
            json.dump(report.transcript.to_json(), fh, indent=1)
    _emit(json.dumps(report.to_json(), indent=2) + "\n", args.out)
    if not report.all_ok():
        print("simulation assertions failed", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


def cmd_gap_scan(args) -> int:
    if args.kmax < 2:
        raise ValueError(f"--kmax must be at least 2, got {args.kmax}")
    step = args.alpha_step
    if not 0 < step <= 1:
        raise ValueError(f"--alpha-step must lie in (0, 1], got {step}")
    alphas = []
    a = Fraction(0)
    while a <= 1:
        alphas.append(float(a))
        a += step
    result = analysis.gap_scan(args.kmax, alphas)
    print(f"max gap {result.max_gap:.6f} at K={result.K}, Gamma={result.Gamma}, "
          f"alpha={result.alpha:g}  (grid: K<= {args.kmax}, alpha step {float(step):g})")
    if args.out:
        with open(args.out, "w") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["K", "max_gap"])
            for i, g in enumerate(result.per_K):
                writer.writerow([2 + i, f"{g:.9f}"])
    if args.plot:
        figures.render_gap_scan(result.per_K, 2, args.plot)
    if result.max_gap >= 4:
        print("gap bound violated: max gap >= 4", file=sys.stderr)
        return EXIT_ASSERTION
    print("gap bound holds: max gap < 4")
    return EXIT_OK


def cmd_csit_load(args) -> int:
    if args.sweep_k:
        return _csit_load_sweep(args)
    if args.k is None:
        raise ValueError("--k is required unless --sweep-k is given")
    K = args.k
    gamma = args.gamma
    Gamma_frac = K * gamma
    if Gamma_frac.denominator != 1:
        raise ValueError(f"K*gamma = {Gamma_frac} must be an integer")
    Gamma = int(Gamma_frac)
    if not 0 <= Gamma <= K:
        raise ValueError(f"Gamma={Gamma} outside 0..{K}")
    exact = K <= 2000  # exact summation is cheap up to here; float beyond
    with_cache = analysis.dcsit_load(K, Gamma, args.tc, exact=exact)
    no_cache = analysis.dcsit_load(K, 0, args.tc, exact=exact)
    zf = analysis.zf_load(K, args.tc)
    closed = analysis.dcsit_load_closed_form(K, Gamma)
    rows = [
        ("K", K),
        ("Gamma", Gamma),
        ("T_c", args.tc),
        ("summation exact", exact),
        ("L(Gamma)", with_cache.L),
        ("L(0)", no_cache.L),
        ("Q(Gamma)", with_cache.Q),
        ("Q(0)", no_cache.Q),
        ("Q_ZF", zf),
        ("Q(Gamma)/Q(0)", float(with_cache.Q) / float(no_cache.Q) if no_cache.Q else None),
        ("Q(Gamma)/Q_ZF", float(with_cache.Q) / float(zf)),
    ]
    mismatch = Fraction(closed) != Fraction(with_cache.L) if exact \
        else abs(float(closed) - float(with_cache.L)) > 1e-6 * max(1.0, abs(float(closed)))
    note = (f"closed-form L(Gamma) = {fmt_exact(closed)} disagrees with the summation; "
            "the summation is authoritative") if mismatch else \
        "closed-form L(Gamma) matches the summation"
    if args.format == "json":
        payload = {k: (_row_to_json({"v": v})["v"] if isinstance(v, Fraction) else v)
                   for k, v in rows}
        payload["closed_form_L"] = fmt_exact(closed)
        payload["closed_form_note"] = note
        print(json.dumps(payload, indent=2))
    else:
        for key, value in rows:
            print(f"{key:<16} {fmt_exact(value)}")
        print(f"note: {note}")
    if args.plot:
        figures.render_csit_load([
            {"label": "Q(Gamma)", "value": with_cache.Q},
            {"label": "Q(0)", "value": no_cache.Q},
            {"label": "Q_ZF", "value": zf},
        ], args.plot)
    return EXIT_OK


def _csit_load_sweep(args) -> int:
    """Feedback-load ratios along a K grid at fixed gamma (convergence view)."""
    ks = [int(p) for p in args.sweep_k.split(",") if p.strip()]
    rows = []
    for K in ks:
        Gamma_frac = K * args.gamma
        if Gamma_frac.denominator != 1:
            raise ValueError(f"K*gamma = {Gamma_frac} must be an integer at K={K}")
        Gamma = int(Gamma_frac)
        exact = K <= 2000
        with_cache = analysis.dcsit_load(K, Gamma, args.tc, exact=exact)
        no_cache = analysis.dcsit_load(K, 0, args.tc, exact=exact)
        zf = analysis.zf_load(K, args.tc)
        rows.append((K, Gamma, float(with_cache.Q), float(no_cache.Q), float(zf),
                     float(with_cache.Q) / float(no_cache.Q),
                     float(with_cache.Q) / float(zf)))
    lines = ["K,Gamma,Q_cached,Q_uncached,Q_ZF,cached_over_uncached,cached_over_ZF"]
    for row in rows:
        lines.append(",".join(f"{v:.9g}" if isinstance(v, float) else str(v) for v in row))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cachebc",
        description="Cache-aided broadcast performance bounds and delivery simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_params(p, with_alpha=True):
        p.add_argument("--k", type=int, required=True, help="number of users/antennas")
        p.add_argument("--n", type=int, required=True, help="library size (files)")
        p.add_argument("--m", type=parse_ratio, required=True, help="cache size (files)")
        if with_alpha:
            p.add_argument("--alpha", type=parse_ratio, default=Fraction(0),
                           help="current-CSIT quality exponent in [0,1]")

    p = sub.add_parser("analyze", help="closed-form quantities at one parameter point")
    add_params(p)
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="evaluate a parameter grid, emit CSV/JSON")
    p.add_argument("--axis", choices=["alpha", "gamma", "k"], required=True)
    p.add_argument("--points", help="comma-separated grid values")
    p.add_argument("--start", help="grid start (alternative to --points)")
    p.add_argument("--stop", help="grid stop, inclusive")
    p.add_argument("--step", help="grid step")
    p.add_argument("--k", type=int, help="fixed K (alpha/gamma axes)")
    p.add_argument("--n", type=int, help="fixed N (alpha/gamma axes)")
    p.add_argument("--m", type=parse_ratio, help="fixed cache size (alpha axis)")
    p.add_argument("--alpha", type=parse_ratio, help="fixed alpha (gamma/k axes)")
    p.add_argument("--gamma", type=parse_ratio, help="fixed cache fraction (k axis)")
    p.add_argument("--log-approx", action="store_true",
                   help="append the large-K log-approximation DoF column")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="write to this path instead of stdout")
    p.add_argument("--plot", help="also render a PNG to this path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run the delivery scheme end to end")
    add_params(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--requests", help="comma-separated file indices, default 1..K")
    p.add_argument("--out", help="write the JSON report to this path")
    p.add_argument("--transcript", help="write the transcript JSON to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gap-scan", help="worst achievable/lower-bound ratio over a grid")
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--alpha-step", type=parse_ratio, default=Fraction(1, 20))
    p.add_argument("--out", help="write per-K worst gaps as CSV to this path")
    p.add_argument("--plot", help="also render a PNG to this path")
    p.set_defaults(func=cmd_gap_scan)

    p = sub.add_parser("csit-load", help="delayed-feedback load report")
    p.add_argument("--k", type=int, help="user count (required unless --sweep-k)")
    p.add_argument("--gamma", type=parse_ratio, required=True,
                   help="cache fraction M/N (K*gamma must be an integer)")
    p.add_argument("--tc", type=parse_ratio, default=Fraction(1),
                   help="coherence period in slots")
    p.add_argument("--sweep-k", help="comma-separated K grid: emit load ratios per K")
    p.add_argument("--out", help="write sweep output to this path")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.add_argument("--plot", help="also render a PNG to this path")
    p.set_defaults(func=cmd_csit_load)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleSplit, delivery.SingularSolve, delivery.DecodeFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSERTION
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
