"""Command-line front end.

Subcommands mirror the library: ``generate`` (codebook file), ``attack``
(forge a pirate copy), ``trace`` (accusation CSV), ``search`` / ``table``
(randomized minimization of the length coefficient), ``predict`` (moment,
length, threshold, and normal-range report), and ``simulate`` (Monte Carlo
rate estimation).

Reproducibility: the master seed comes from --seed, the TARDOS_SEED
environment variable, or 0, in that order; a key=value config file can
provide defaults for any long option; the fully resolved configuration is
logged to stderr on every run (no timestamps, so reruns are byte-identical).
Exit codes: 0 success, 2 usage error, 3 infeasible constraints or empty
window, 4 I/O or file-format failure.
"""

import argparse
import logging
import math
import os
import sys
from contextlib import contextmanager

from . import bounds, codegen, gaussian, simulate, tracer
from .attacks import Strategy, forge
from .errors import CapacityError, InfeasibleError, ParameterError
from .model import SchemeParams, default_cutoff, parse_kv_text

log = logging.getLogger("tardos.cli")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _float_list(text):
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


@contextmanager
def _out_stream(path):
    """Writable text stream for ``path``; '-' means stdout."""
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _log_resolved(args):
    skip = {"func", "config"}
    pairs = sorted((k, v) for k, v in vars(args).items()
                   if k not in skip and not k.startswith("_"))
    log.info("resolved config: %s", " ".join(f"{k}={v}" for k, v in pairs))


def _resolve_eps2(args):
    if getattr(args, "ratio", None) is not None:
        if args.ratio <= 0.0:
            raise ParameterError("ratio must be positive")
        return math.exp(args.ratio * math.log(args.eps1))
    return args.eps2


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_generate(args):
    t = args.cutoff
    if t is None:
        if args.c0 is None:
            raise ParameterError("--cutoff is required when --c0 is not given")
        t = default_cutoff(args.c0)
    params = None
    if args.length is not None:
        m = args.length
        if args.c0 is not None and args.eps1 is not None and args.eps2 is not None:
            params = SchemeParams(n=args.users, m=m, c0=args.c0, eps1=args.eps1,
                                  eps2=args.eps2, t=t, Z=args.threshold)
    else:
        if args.c0 is None or args.eps1 is None or args.eps2 is None:
            raise ParameterError(
                "give --length, or --c0/--eps1/--eps2 to derive it from a plan")
        tau = args.c0 * t
        plan = gaussian.conservative_plan(args.c0, tau, args.eps1, args.eps2)
        m = plan.m
        params = SchemeParams(n=args.users, m=m, c0=args.c0, eps1=args.eps1,
                              eps2=args.eps2, t=t, Z=plan.Z)
        log.info("plan: m=%d Z in [%r, %r]", plan.m, plan.Z_low, plan.Z_high)
    bias = codegen.sample_bias(m, t, args.seed)
    cb = codegen.gen_matrix(args.users, bias, args.seed, params=params,
                            threads=args.threads)
    codegen.save_codebook(cb, args.out)
    log.info("wrote codebook: n=%d m=%d -> %s", cb.n, cb.m, args.out)
    return 0


def _load_strategy(args, c):
    if args.psi_csv is not None:
        strat = Strategy.from_csv(args.psi_csv)
        if strat.c != c:
            raise ParameterError(
                f"psi table is for coalition size {strat.c}, not {c}")
        return strat
    return Strategy.from_kind(args.strategy, c)


def cmd_attack(args):
    cb = codegen.load_codebook(args.codebook)
    users = args.users
    if not users:
        raise ParameterError("coalition user list is empty")
    if len(set(users)) != len(users):
        raise ParameterError("coalition user list has duplicates")
    for j in users:
        if not 0 <= j < cb.n:
            raise ParameterError(f"user {j} outside 0..{cb.n - 1}")
    rows = cb.select_bits(users)
    strat = _load_strategy(args, len(users))
    y = forge(rows, strat, seed=args.seed)
    with _out_stream(args.out) as fh:
        fh.write(y.to_text() + "\n")
    log.info("forged %d-column copy from %d users -> %s", y.m, len(users), args.out)
    return 0


def cmd_trace(args):
    cb = codegen.load_codebook(args.codebook)
    with open(args.pirate, "r", encoding="utf-8") as fh:
        y = tracer.PirateCopy.from_text(fh.read())
    Z = args.threshold
    if Z is None:
        if cb.params is not None and cb.params.Z is not None:
            Z = cb.params.Z
        else:
            raise ParameterError(
                "--threshold is required when the codebook carries none")
    report = tracer.trace(cb, y.bits, Z, threads=args.threads)
    with _out_stream(args.out) as fh:
        report.to_csv(fh)
    log.info("traced %d users at Z=%r: %d accused", cb.n, Z,
             len(report.accused))
    return 0


def cmd_search(args):
    eps2 = _resolve_eps2(args)
    res = bounds.search_min_A(args.c0, args.eps1, eps2, args.iterations,
                              args.seed, threads=args.threads)
    with _out_stream(args.out) as fh:
        for name in ("A", "B", "t", "L", "alpha1", "alpha2", "c0", "R",
                     "iterations_used"):
            fh.write(f"{name}={getattr(res, name)!r}\n")
    return 0


def cmd_table(args):
    table = bounds.emit_search_table(args.c0_list, args.ratio_list,
                                     args.iterations, args.seed,
                                     threads=args.threads, eps1=args.eps1)
    with _out_stream(args.out) as fh:
        table.to_csv(fh)
    return 0


def cmd_predict(args):
    c = args.coalition if args.coalition is not None else args.c0
    t = args.cutoff if args.cutoff is not None else default_cutoff(args.c0)
    tau = args.c0 * t
    strat = _load_strategy(args, c)
    summary = gaussian.moments(strat, c, t)
    mmin = gaussian.m_min(summary, args.eps1, args.eps2, args.c0)
    plan = gaussian.conservative_plan(args.c0, tau, args.eps1, args.eps2)
    m = args.length if args.length is not None else max(plan.m, 1)
    interval = gaussian.z_interval(summary, m, args.eps1, args.eps2, args.c0)
    clt = gaussian.clt_report(args.c0, t, args.eps1, m)
    sys.stdout.write(gaussian.format_report(summary, plan, interval, clt))
    sys.stdout.write(f"strategy-specific m_min = {mmin!r} (evaluated at m = {m})\n")
    if args.out is not None:
        with _out_stream(args.out) as fh:
            heads, rows = [], []
            for head, row in (summary.csv_row(), plan.csv_row(), clt.csv_row()):
                heads.append(head)
                rows.append(row)
            heads.append("m_min_strategy,m_eval,Z_eval_low,Z_eval_high")
            rows.append(f"{mmin!r},{m},{interval.low!r},{interval.high!r}")
            fh.write(",".join(heads) + "\n" + ",".join(rows) + "\n")
    return 0


def cmd_simulate(args):
    t = args.cutoff if args.cutoff is not None else default_cutoff(args.c0)
    tau = args.c0 * t
    if args.length is not None and args.threshold is not None:
        m, Z = args.length, args.threshold
    elif args.length is None and args.threshold is None:
        plan = gaussian.conservative_plan(args.c0, tau, args.eps1, args.eps2)
        m, Z = plan.m, plan.Z
        log.info("plan: m=%d Z=%r", m, Z)
    else:
        raise ParameterError("--length and --threshold must be given together")
    c = args.coalition if args.coalition is not None else args.c0
    params = SchemeParams(n=max(args.innocents, 1), m=m, c0=args.c0,
                          eps1=args.eps1, eps2=args.eps2, t=t, Z=Z)
    strat = _load_strategy(args, c)
    cfg = simulate.SimConfig(params=params, strategy=strat, c=c,
                             trials=args.trials,
                             innocents_per_trial=args.innocents,
                             seed=args.seed, threads=args.threads,
                             histogram_bins=args.bins)
    report = simulate.run(cfg)
    sys.stdout.write(
        f"fp_hat = {report.fp_hat!r} ci99 = "
        f"[{report.fp_ci[0]!r}, {report.fp_ci[1]!r}]\n"
        f"fn_hat = {report.fn_hat!r} ci99 = "
        f"[{report.fn_ci[0]!r}, {report.fn_ci[1]!r}]\n"
        f"innocent moments = {report.innocent_score_moments!r}\n"
        f"coalition moments = {report.coalition_score_moments!r}\n"
        f"ks innocent = {report.ks_innocent!r}\n")
    if args.out_jsonl is not None:
        with _out_stream(args.out_jsonl) as fh:
            report.to_jsonl(fh)
    if args.out_hist is not None:
        with _out_stream(args.out_hist) as fh:
            fh.write("# innocent\n")
            report.histograms.innocent.to_csv(fh)
            fh.write("# coalition\n")
            report.histograms.coalition.to_csv(fh)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly.


def _add_common(sub, *flags):
    if "c0" in flags:
        sub.add_argument("--c0", type=_positive_int, default=None,
                         help="design coalition size")
    if "eps" in flags:
        sub.add_argument("--eps1", type=float, default=None,
                         help="innocent-accusation probability target")
        sub.add_argument("--eps2", type=float, default=None,
                         help="coalition-escape probability target")
    if "strategy" in flags:
        sub.add_argument("--strategy", default="extremal",
                         help="built-in strategy name (default extremal)")
        sub.add_argument("--psi-csv", default=None,
                         help="custom strategy table as CSV rows 'x,psi(x)'")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tardos",
        description="Collusion-resistant fingerprinting: codes, tracing, "
                    "attacks, provable bounds, and simulation.")
    parser.add_argument("--seed", type=int,
                        default=int(os.environ.get("TARDOS_SEED", "0")),
                        help="master seed (default: TARDOS_SEED or 0)")
    parser.add_argument("--threads", type=_positive_int,
                        default=os.cpu_count() or 1,
                        help="worker threads (default: machine parallelism)")
    parser.add_argument("--verbose", action="store_true",
                        help="debug-level logging")
    parser.add_argument("--config", default=None,
                        help="key=value file providing option defaults")
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("generate", help="generate and save a codebook")
    g.add_argument("--users", "-n", type=_positive_int, required=True)
    g.add_argument("--length", "-m", type=_positive_int, default=None,
                   help="code length; omit to derive from the plan flags")
    g.add_argument("--cutoff", type=float, default=None,
                   help="bias cutoff t (default 1/(300 c0))")
    g.add_argument("--threshold", type=float, default=None,
                   help="accusation threshold to store with explicit --length")
    _add_common(g, "c0", "eps")
    g.add_argument("--out", required=True, help="output codebook path")
    g.set_defaults(func=cmd_generate)

    a = subs.add_parser("attack", help="forge a pirate copy from a coalition")
    a.add_argument("--codebook", required=True)
    a.add_argument("--users", type=_int_list, required=True,
                   help="comma-separated coalition user ids")
    _add_common(a, "strategy")
    a.add_argument("--out", required=True, help="output pirate-copy path ('-' stdout)")
    a.set_defaults(func=cmd_attack)

    t = subs.add_parser("trace", help="score all users against a pirate copy")
    t.add_argument("--codebook", required=True)
    t.add_argument("--pirate", required=True, help="pirate-copy text file")
    t.add_argument("--threshold", "-Z", type=float, default=None,
                   help="accusation threshold (default: from codebook params)")
    t.add_argument("--out", default="-", help="accusation CSV path ('-' stdout)")
    t.set_defaults(func=cmd_trace)

    s = subs.add_parser("search", help="randomized search for the smallest "
                                       "length coefficient")
    s.add_argument("--c0", type=_positive_int, required=True)
    s.add_argument("--eps1", type=float, default=1e-10)
    s.add_argument("--eps2", type=float, default=None)
    s.add_argument("--ratio", type=float, default=None,
                   help="ln(eps2)/ln(eps1); overrides --eps2")
    s.add_argument("--iterations", type=_positive_int, required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_search)

    tb = subs.add_parser("table", help="search over a grid of (ratio, c0) cells")
    tb.add_argument("--c0-list", type=_int_list, required=True)
    tb.add_argument("--ratio-list", type=_float_list, required=True)
    tb.add_argument("--iterations", type=_positive_int, required=True)
    tb.add_argument("--eps1", type=float, default=1e-10)
    tb.add_argument("--out", default="-")
    tb.set_defaults(func=cmd_table)

    p = subs.add_parser("predict", help="moment, length, threshold, and "
                                        "normal-range report")
    p.add_argument("--c0", type=_positive_int, required=True)
    p.add_argument("--coalition", "-c", type=_positive_int, default=None,
                   help="actual coalition size (default c0)")
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--eps2", type=float, required=True)
    p.add_argument("--length", "-m", type=_positive_int, default=None,
                   help="evaluate the threshold interval at this length")
    _add_common(p, "strategy")
    p.add_argument("--out", default=None, help="also write a one-row CSV here")
    p.set_defaults(func=cmd_predict)

    si = subs.add_parser("simulate", help="Monte Carlo false-positive/negative "
                                          "rate estimation")
    si.add_argument("--c0", type=_positive_int, required=True)
    si.add_argument("--coalition", "-c", type=_positive_int, default=None)
    si.add_argument("--cutoff", type=float, default=None)
    si.add_argument("--eps1", type=float, required=True)
    si.add_argument("--eps2", type=float, required=True)
    si.add_argument("--length", "-m", type=_positive_int, default=None)
    si.add_argument("--threshold", "-Z", type=float, default=None)
    si.add_argument("--trials", type=_positive_int, required=True)
    si.add_argument("--innocents", type=_positive_int, default=100,
                    help="innocent users sampled per trial")
    si.add_argument("--bins", type=_positive_int, default=80)
    _add_common(si, "strategy")
    si.add_argument("--out-jsonl", default=None)
    si.add_argument("--out-hist", default=None)
    si.set_defaults(func=cmd_simulate)

    return parser


def _apply_config_defaults(parser, path):
    """Read key=value defaults and install them on every subparser."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = parse_kv_text(fh.read())
    subparsers = [parser] + [
        sp for action in parser._actions
        if isinstance(action, argparse._SubParsersAction)
        for sp in action.choices.values()
    ]
    for sp in subparsers:
        for action in sp._actions:
            key = action.dest
            if key in raw:
                value = raw[key]
                if isinstance(action.const, bool):
                    converted = str(value).lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    converted = action.type(str(value))
                else:
                    converted = str(value)
                sp.set_defaults(**{key: converted})
                if action.required:
                    action.required = False


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)

    parser = build_parser()
    if known.config is not None:
        try:
            _apply_config_defaults(parser, known.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 4
        except (ValueError, argparse.ArgumentTypeError) as exc:
            print(f"error: bad config value: {exc}", file=sys.stderr)
            return 2
    args = parser.parse_args(argv)

    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose
                        else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    _log_resolved(args)
    try:
        return args.func(args)
    except InfeasibleError as exc:  # includes empty windows
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, CapacityError) as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:  # includes codebook format errors
        print(f"error: i/o: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
