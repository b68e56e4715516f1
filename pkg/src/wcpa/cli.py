"""``wcpa`` command line: pipeline runs, lookup tables and inequality labs.

Exit codes: 0 success with every requested check passing, 1 some check
failed (reports are still written), 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ballfit import fit_convex
from .freud import (INF, FreudParams, FullSpace, freud_number, log_tau, mrs_number, parse_p,
                    weighted_norm)
from .globalizer import PipelineConfig, run_pipeline
from .oracles import ORACLES, construct_h, get_oracle
from .poly import MultiPoly, radial_power
from .verify_lab import (all_hold, bernstein_suite, chebyshev_suite, check_rri_lp, rri_lp_family,
                         rri_suite, write_checks_csv)

log = logging.getLogger("wcpa")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
ALPHA_ONE_MESSAGE = (
    "alpha <= 1 is outside the proven range: whether the density result remains valid "
    "for alpha=1 is an open problem. Pass --allow-alpha-1 to run without convexity "
    "certificates."
)
TAU_HEADER = ("n", "q_n", "a_n", "tau_closed", "tau_quadrature", "rel_err")


class ConfigError(Exception):
    """Invalid command-line configuration (exit code 2)."""


def _int_list(text: str) -> list[int]:
    try:
        vals = sorted(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _p_arg(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _default_seed() -> int:
    env = os.environ.get("WCPA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"WCPA_SEED must be an integer, got {env!r}") from None


def _common(p: argparse.ArgumentParser, *, weight: bool = True) -> None:
    if weight:
        p.add_argument("--alpha", type=float, default=2.0, help="Freud exponent (default 2)")
        p.add_argument("--p", type=_p_arg, default=INF, help="norm exponent: 'inf' or a number >= 1")
        p.add_argument("--d", type=int, default=1, help="dimension (default 1)")
        p.add_argument("--allow-alpha-1", action="store_true",
                       help="permit alpha <= 1 (certificates disabled)")
    p.add_argument("--seed", type=int, default=None, help="seed (default: $WCPA_SEED or 0)")
    p.add_argument("--out", type=Path, default=None, help="output file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wcpa", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"wcpa {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="convex polynomial fit of an oracle's minorant on a ball")
    _common(p)
    p.add_argument("--oracle", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--r", type=float, required=True, help="ball radius")
    p.add_argument("--eps", type=float, default=0.25, help="minorant accuracy budget")
    p.add_argument("--method", choices=("minimax", "lsq"), default="minimax")
    p.add_argument("--fit-weight", choices=("freud", "none"), default="freud")

    p = sub.add_parser("convergence", help="full pipeline over a list of degrees")
    _common(p)
    p.add_argument("--oracle", required=True)
    p.add_argument("--beta", type=float, default=None, help="radius exponent, default (1+alpha)/2")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--degrees", type=_int_list, default=[4, 8, 16])
    p.add_argument("--mode", choices=("empirical", "strict"), default="empirical")
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")
    p.add_argument("--fit-weight", choices=("freud", "none"), default="freud")
    p.add_argument("--m-hessian", type=int, default=10000, help="Hessian sample size")

    p = sub.add_parser("tau-table", help="normalizing constants, closed form vs numerical")
    _common(p)
    p.add_argument("--nmax", type=int, default=10)

    p = sub.add_parser("rri-check", help="restricted-range inequality checks")
    _common(p)
    p.add_argument("--degrees", type=_int_list, default=list(range(1, 7)))
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--alphas", type=_float_list, default=None,
                   help="comma list of alphas (sup-norm suite; default: --alpha)")

    p = sub.add_parser("bernstein-check", help="second-derivative growth and step checks")
    _common(p)
    p.add_argument("--degrees", type=_int_list, default=list(range(2, 9)))
    p.add_argument("--radii", type=_float_list, default=[1.0, 4.0])
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("chebyshev-check", help="Chebyshev comparison checks")
    _common(p)
    p.add_argument("--degrees", type=_int_list, default=list(range(1, 9)))
    p.add_argument("--radii", type=_float_list, default=[1.0, 4.0])
    p.add_argument("--count", type=int, default=100)

    sub.add_parser("oracle-list", help="list built-in convex oracles")
    return ap


# -- helpers ------------------------------------------------------------------


def _freud(args) -> FreudParams:
    if args.alpha <= 1 and not args.allow_alpha_1:
        raise ConfigError(ALPHA_ONE_MESSAGE)
    if args.d < 1:
        raise ConfigError("--d must be >= 1")
    try:
        return FreudParams(args.alpha, args.p, args.d, experimental=args.allow_alpha_1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _oracle(name: str, d: int):
    try:
        return get_oracle(name, d)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc.args[0] if exc.args else exc)) from exc


def _check_writable(*paths: Path | None) -> None:
    for path in paths:
        if path is None:
            continue
        parent = path.resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise ConfigError(f"cannot write output file {str(path)!r}")
        if path.exists() and (path.is_dir() or not os.access(path, os.W_OK)):
            raise ConfigError(f"cannot write output file {str(path)!r}")


def resolved_config(args) -> dict:
    """The parsed arguments as plain JSON values."""
    out = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, float) and math.isinf(v):
            v = "inf"
        out[k] = v
    return out


def _emit_text(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _dump_json(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default, allow_nan=True) + "\n"
    _emit_text(text, path)


# -- commands -----------------------------------------------------------------


def cmd_fit(args) -> int:
    fp = _freud(args)
    f = _oracle(args.oracle, fp.d)
    if args.degree < 1 or not args.r > 0:
        raise ConfigError("--degree must be >= 1 and --r > 0")
    _check_writable(args.out)
    h = construct_h(f, args.eps, fp, seed=args.seed).h
    weight = None
    if args.fit_weight == "freud":
        a = fp.alpha
        weight = lambda x: np.maximum(np.exp(-np.linalg.norm(x, axis=1) ** a), 1e-2)  # noqa: E731
    rep = fit_convex(h, args.r, args.degree, method=args.method, weight=weight, seed=args.seed)
    _dump_json({"run_config": resolved_config(args), "oracle": f.tag, "h_pieces": len(h),
                "report": rep.to_json()}, args.out)
    return EXIT_OK if rep.convex_margin >= 0 else EXIT_FAIL


def cmd_convergence(args) -> int:
    fp = _freud(args)
    f = _oracle(args.oracle, fp.d)
    beta = args.beta if args.beta is not None else (1 + fp.alpha) / 2
    args.beta = beta
    certificates = fp.alpha > 1
    if not certificates:
        log.warning("running with alpha=%g: certificates disabled, results are exploratory",
                    fp.alpha)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    _check_writable(args.out, args.csv)
    try:
        cfg = PipelineConfig(fp, beta, args.eps, args.degrees, seed=args.seed, mode=args.mode,
                             fit_weight=args.fit_weight, m_hessian=args.m_hessian,
                             certificates=certificates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report = run_pipeline(f, cfg, jobs=jobs)
    payload = {"run_config": resolved_config(args), **report.to_json()}
    if args.out is not None:
        _dump_json(payload, args.out)
    text = convergence_csv(report)
    if args.csv is not None:
        args.csv.write_text(text)
    elif args.out is None:
        sys.stdout.write(text)
    ok = all(r.error is None for r in report.records)
    if certificates:
        ok = ok and all(r.certificate is not None and r.certificate.holds
                        for r in report.records if r.n >= 2)
    return EXIT_OK if ok else EXIT_FAIL


def convergence_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.CSV_HEADER)
    w.writerows(report.csv_rows())
    return buf.getvalue()


def tau_rows(fp: FreudParams, nmax: int) -> list[tuple]:
    """``(n, q_n, a_n, tau_closed, tau_numerical, rel_err)`` for ``n = 1..nmax``.

    The numerical value inverts the integral (or sampled sup) of
    ``|x|^(2n) W``; everything stays in log space so large ``n`` does not
    overflow.
    """
    rows = []
    for n in range(1, nmax + 1):
        lt = log_tau(fp, n)
        # scale |x|^(2n) by tau itself so the measured norm is ~1
        Q = radial_power(n, fp.d).scale(math.exp(lt)) if lt < 700 else None
        if Q is None:
            raise ConfigError(f"tau_{n} overflows double precision")
        norm = weighted_norm(Q, fp, FullSpace)
        tau_closed = math.exp(lt)
        tau_num = tau_closed / norm
        rows.append((n, freud_number(fp, n), mrs_number(fp, n), tau_closed, tau_num,
                     abs(tau_num - tau_closed) / tau_closed))
    return rows


def cmd_tau_table(args) -> int:
    fp = _freud(args)
    if args.nmax < 1:
        raise ConfigError("--nmax must be >= 1")
    _check_writable(args.out)
    rows = tau_rows(fp, args.nmax)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TAU_HEADER)
    for row in rows:
        w.writerow([str(row[0])] + [repr(float(v)) for v in row[1:]])
    _emit_text(buf.getvalue(), args.out)
    tol = 1e-2 if fp.is_sup else 1e-5
    return EXIT_OK if all(r[-1] <= tol for r in rows) else EXIT_FAIL


def cmd_rri(args) -> int:
    fp = _freud(args)
    _check_writable(args.out)
    if fp.is_sup:
        alphas = args.alphas or [fp.alpha]
        if any(a <= 1 for a in alphas) and not args.allow_alpha_1:
            raise ConfigError(ALPHA_ONE_MESSAGE)
        dims = (1, 2) if fp.d == 1 else tuple(range(1, fp.d + 1))
        checks = rri_suite(alphas, args.degrees, count=args.count, seed=args.seed, dims=dims)
        ok = all_hold(checks)
    else:
        x = MultiPoly.variable(fp.d, 0)
        checks, decay = rri_lp_family(lambda n: x ** n, fp, args.degrees)
        checks += [check_rri_lp(MultiPoly.constant(fp.d, 1.0), fp, n) for n in args.degrees]
        for e, (slope, icpt) in decay.fitted.items():
            log.info("log ratio ~ %.4g n^%g + %.4g", slope, e, icpt)
        ok = decay.holds
    write_checks_csv(checks, args.out if args.out is not None else sys.stdout)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bernstein(args) -> int:
    _check_writable(args.out)
    dims = (1, 2) if args.d == 1 else tuple(range(1, args.d + 1))
    checks = bernstein_suite(args.degrees, args.radii, count=args.count, seed=args.seed, dims=dims)
    write_checks_csv(checks, args.out if args.out is not None else sys.stdout)
    return EXIT_OK if all_hold(checks) else EXIT_FAIL


def cmd_chebyshev(args) -> int:
    _check_writable(args.out)
    checks = chebyshev_suite(args.degrees, args.radii, count=args.count, seed=args.seed)
    write_checks_csv(checks, args.out if args.out is not None else sys.stdout)
    return EXIT_OK if all_hold(checks) else EXIT_FAIL


def cmd_oracle_list(args) -> int:
    for name, desc in ORACLES.items():
        print(f"{name}\t{desc}")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "convergence": cmd_convergence,
    "tau-table": cmd_tau_table,
    "rri-check": cmd_rri,
    "bernstein-check": cmd_bernstein,
    "chebyshev-check": cmd_chebyshev,
    "oracle-list": cmd_oracle_list,
}


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors, 0 for --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"wcpa: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
