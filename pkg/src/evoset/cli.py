"""Command-line front end: ``evoset <command> ...``.

Machine-readable results go to ``--out`` (or stdout); diagnostics go to
stderr.  Exit codes: 0 success, 1 usage error, 2 invalid input, 3 problem
too large for the requested exact method, 4 divergent bound integral,
5 a verification check failed, 6 a chain did not mix within the limit.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
import warnings

from threadpoolctl import threadpool_limits

from . import benchmarks, bounds, exact
from .checks import SUITES, run_suite
from .chain import StateSet
from .errors import NotMixed, TooLarge, UnboundedIntegral, ValidationError
from .evolving import ENUMERATE_MAX, MODES, estimate_transition, sample_trace
from .io import dumps_chain, dumps_family, dumps_profile, dumps_trace, fmt, read_chain, read_family, read_profile
from .profiles import gauge_profile, parse_analytic

EXIT_USAGE, EXIT_INVALID, EXIT_TOO_LARGE, EXIT_UNBOUNDED, EXIT_CHECK_FAILED, EXIT_NOT_MIXED = 1, 2, 3, 4, 5, 6

STOCHASTIC_BENCHES = {"percolation", "expanders", "two_expanders", "random"}
THEOREM_GAUGE = {"hk": "phi", "hk2": "phi", "hki": "phi", "cont1": "phi", "psith": "psi",
                 "convex": None, "gap-lower": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1 (2 means invalid input here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _params(items) -> dict:
    out = {}
    for item in items or []:
        for part in item.split(","):
            key, sep, val = part.partition("=")
            if not sep:
                raise UsageError(f"parameter {part!r} is not key=value")
            out[key.strip()] = val.strip()
    return out


# --------------------------------------------------------------------------
# commands


def cmd_bench_make(args):
    params = _params(args.param)
    name = args.name
    if args.seed is not None:
        params.setdefault("seed", str(args.seed))
    base, _, inline = name.partition(":")
    needs_seed = base.lower() in STOCHASTIC_BENCHES or "hole_fraction" in name + str(params)
    if needs_seed and "seed" not in params and "seed=" not in inline:
        raise UsageError(f"benchmark {name!r} is random; pass --seed")
    bench = benchmarks.parse_benchmark(name, **params)
    _emit(dumps_chain(bench.chain), args.out)
    if args.family:
        if bench.family is None:
            raise UsageError(f"benchmark {name!r} has no canonical family")
        with open(args.family, "w") as fh:
            fh.write(dumps_family(bench.family))
    return 0


def _profile_for(chain, gauge, method, family=None, seed=None, samples=8):
    kw = {}
    if method == "family":
        kw["family"] = family
    if method == "monte-carlo":
        if seed is None:
            raise UsageError("monte-carlo profiles need --seed")
        kw.update(seed=seed, samples=samples)
    return gauge_profile(chain, gauge, method, **kw)


def cmd_profile(args):
    chain = read_chain(args.chain)
    family = read_family(args.family) if args.family else None
    if args.method == "family" and family is None:
        raise UsageError("--method family needs --family")
    prof = _profile_for(chain, args.gauge, args.method, family, args.seed, args.samples)
    if prof.provenance != "exact":
        print(f"evoset: note: {prof.provenance} profile is an upper estimate of the true profile",
              file=sys.stderr)
    _emit(dumps_profile(prof), args.out)
    return 0


def _chain_profile(chain, gauge, args):
    """Best feasible profile for a chain: exact enumeration, else greedy growth."""
    if chain.n <= ENUMERATE_MAX:
        return gauge_profile(chain, gauge, "enumerate")
    if args.seed is None:
        raise UsageError(f"{chain.n} states is beyond exact enumeration; pass --seed for the "
                         "monte-carlo profile")
    return gauge_profile(chain, gauge, "monte-carlo", seed=args.seed, samples=args.samples)


def _mass(chain, state, mass, flag):
    if state is not None:
        if chain is None:
            raise UsageError(f"--{flag} needs --chain; use --pi-{flag} with a profile")
        return float(chain.pi[state])
    return mass


def cmd_bound(args):
    theorem = args.theorem
    if theorem == "hk2" and args.gamma is None:
        raise UsageError("theorem hk2 needs --gamma")
    if theorem != "gap-lower" and args.epsilon is None:
        raise UsageError(f"theorem {theorem} needs --epsilon")
    sources = [s for s in (args.chain, args.profile, args.analytic) if s]
    if len(sources) != 1:
        raise UsageError("give exactly one of --chain, --profile, --analytic")
    chain = read_chain(args.chain) if args.chain else None

    if theorem == "gap-lower":
        if chain is None:
            raise UsageError("gap-lower needs --chain")
        g = bounds.chain_gap_lower_bound(chain)
        report = {"theorem": "gap-lower", "bound": g.value, "psi_star": g.psi_star,
                  "theta_term": g.theta_term, "winner": g.winner, "provenance": "exact"}
        _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
        return 0

    gauge = THEOREM_GAUGE[theorem] or args.kind
    if chain is not None:
        prof = _chain_profile(chain, gauge, args)
    elif args.profile:
        prof = read_profile(args.profile)
    else:
        prof = parse_analytic(args.analytic)
    pi_x = _mass(chain, args.x, args.pi_x, "x")
    pi_y = _mass(chain, args.y, args.pi_y, "y")
    eps = args.epsilon
    if theorem in ("hk", "hk2"):
        gamma = 0.5 if theorem == "hk" else args.gamma
        rep = bounds.tau_uniform_bound(prof, eps, gamma, pi_x, pi_y)
    elif theorem == "psith":
        if pi_x is None:
            raise UsageError("psith needs --x or --pi-x")
        rep = bounds.chi_square_bound(prof, pi_x, eps)
    elif theorem == "hki":
        if pi_x is None or pi_y is None:
            raise UsageError("hki needs both endpoint masses")
        rep = bounds.infinite_bound(prof, pi_x, pi_y, eps, args.gamma or 0.5)
    elif theorem == "cont1":
        rep = bounds.continuous_bound(prof, eps, pi_x, pi_y)
    else:
        if pi_x is None:
            raise UsageError("convex needs --x or --pi-x")
        rep = bounds.convex_variant_bound(prof, pi_x, eps, args.kind, args.gamma or 0.5, pi_y)
    for note in rep.warnings:
        print(f"evoset: warning: {note}", file=sys.stderr)
    _emit(rep.to_json() + "\n", args.out)
    return 0


def cmd_simulate(args):
    chain = read_chain(args.chain)
    if args.samples is not None:
        if args.target is None or len(args.start) != 1:
            raise UsageError("--samples estimates p^n(x, y): give one --start state and --target")
        est = estimate_transition(chain, args.start[0], args.target, args.steps, args.samples,
                                  args.seed)
        _emit(json.dumps({"x": args.start[0], "y": args.target, "steps": args.steps,
                          "estimate": est.value, "stderr": est.stderr, "samples": est.samples,
                          "seed": args.seed}, sort_keys=True) + "\n", args.out)
        return 0
    S0 = StateSet.from_members(chain, args.start)
    trace = sample_trace(chain, S0, args.steps, args.seed, args.mode)
    _emit(dumps_trace(trace), args.out)
    return 0


def cmd_mix(args):
    chain = read_chain(args.chain)
    rep = exact.mixing_report(chain, args.epsilon, args.n_max, args.chi_points)
    if args.continuous:
        rep.params["tau_continuous"] = {
            repr(e): exact.tau_uniform_continuous(chain, e, args.t_max, args.resolution)
            for e in sorted(set(args.epsilon))}
    _emit(rep.to_json() + "\n", args.out)
    return 0


def cmd_verify(args):
    chain = read_chain(args.chain)
    results = run_suite(chain, args.suite, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "passed", "max_violation", "note"])
    for r in results:
        w.writerow([r.name, "pass" if r.passed else "fail", fmt(r.max_violation), r.note])
    _emit(buf.getvalue(), args.out)
    return 0 if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMPARE_COLUMNS = ["chain", "epsilon", "bound_hk", "bound_psith", "bound_cont", "tau_exact",
                   "tau_tv_exact", "gap", "psi_star", "h2plus"]


def compare_rows(names, epsilons):
    rows = []
    for name in names:
        chain = benchmarks.parse_benchmark(name).chain
        phi = gauge_profile(chain, "phi")
        psi = gauge_profile(chain, "psi")
        h2 = gauge_profile(chain, "theta").minimum
        rep = exact.mixing_report(chain, epsilons, chi_points=1)
        gap = rep.spectral_gap
        gamma = min(chain.gamma, 0.5)
        for e in sorted(set(epsilons), reverse=True):
            hk = bounds.tau_uniform_bound(phi, e, gamma).bound if gamma > 0 else ""
            ps = max(bounds.chi_square_bound(psi, float(p), e).bound for p in set(chain.pi))
            ct = bounds.continuous_bound(phi, e).bound
            rows.append([name, fmt(e), hk, ps, fmt(ct), rep.tau[e], rep.tau_tv[e],
                         "" if gap is None else fmt(gap), fmt(psi.minimum), fmt(h2)])
    return rows


def cmd_compare(args):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    w.writerows(compare_rows(args.bench, args.epsilon))
    _emit(buf.getvalue(), args.out)
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evoset", description="Evolving sets, conductance profiles and mixing-time bounds.")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on BLAS threads (default: $EVOSET_THREADS, else library default)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench", help="benchmark chains")
    bsub = bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    mk = bsub.add_parser("make", help="write a benchmark chain file")
    mk.add_argument("name", help="C2, C3, box4, hypercube3, clique8, lamplighter3, or name:key=val,...")
    mk.add_argument("--param", action="append", help="key=value generator parameter (repeatable)")
    mk.add_argument("--seed", type=int, help="seed for random generators")
    mk.add_argument("--out", help="chain TSV path (default stdout)")
    mk.add_argument("--family", help="also write the canonical set family here")
    mk.set_defaults(func=cmd_bench_make)

    pr = sub.add_parser("profile", help="compute a gauge profile")
    pr.add_argument("--chain", required=True)
    pr.add_argument("--gauge", choices=["phi", "psi", "theta"], default="phi")
    pr.add_argument("--method", choices=["enumerate", "family", "monte-carlo"], default="enumerate")
    pr.add_argument("--family", help="family file (one comma-separated set per line)")
    pr.add_argument("--samples", type=int, default=8)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_profile)

    bd = sub.add_parser("bound", help="evaluate a mixing-time bound")
    bd.add_argument("--theorem", required=True, choices=sorted(THEOREM_GAUGE))
    src = bd.add_argument_group("profile source (exactly one)")
    src.add_argument("--chain")
    src.add_argument("--profile")
    src.add_argument("--analytic", help='e.g. "powerlaw:a=0.3,b=0.5"')
    bd.add_argument("--epsilon", type=float)
    bd.add_argument("--gamma", type=float)
    bd.add_argument("--x", type=int, help="start state (with --chain)")
    bd.add_argument("--y", type=int, help="target state (with --chain)")
    bd.add_argument("--pi-x", type=float, help="start mass pi(x)")
    bd.add_argument("--pi-y", type=float, help="target mass pi(y)")
    bd.add_argument("--kind", choices=["psi", "phi"], default="psi", help="gauge for --theorem convex")
    bd.add_argument("--seed", type=int, help="needed when the chain is too large to enumerate")
    bd.add_argument("--samples", type=int, default=8)
    bd.add_argument("--out")
    bd.set_defaults(func=cmd_bound)

    sm = sub.add_parser("simulate", help="sample evolving-set traces")
    sm.add_argument("--chain", required=True)
    sm.add_argument("--start", type=_ints, required=True, help="comma-separated start set")
    sm.add_argument("--steps", type=int, required=True)
    sm.add_argument("--seed", type=int, required=True)
    sm.add_argument("--mode", choices=MODES, default="plain")
    sm.add_argument("--samples", type=int, help="estimate p^steps(start, target) instead")
    sm.add_argument("--target", type=int)
    sm.add_argument("--out")
    sm.set_defaults(func=cmd_simulate)

    mx = sub.add_parser("mix", help="exact mixing times by matrix powers")
    mx.add_argument("--chain", required=True)
    mx.add_argument("--epsilon", type=_floats, default=[0.5, 0.25, 0.125])
    mx.add_argument("--n-max", type=int, default=100_000)
    mx.add_argument("--chi-points", type=int)
    mx.add_argument("--continuous", action="store_true", help="also compute continuous-time tau")
    mx.add_argument("--t-max", type=float, default=1e4)
    mx.add_argument("--resolution", type=float, default=0.01)
    mx.add_argument("--out")
    mx.set_defaults(func=cmd_mix)

    vf = sub.add_parser("verify", help="run a verification suite")
    vf.add_argument("--chain", required=True)
    vf.add_argument("--suite", choices=SUITES, required=True)
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--out")
    vf.set_defaults(func=cmd_verify)

    cp = sub.add_parser("compare", help="bounds against exact values on benchmarks")
    cp.add_argument("--bench", nargs="+", required=True)
    cp.add_argument("--epsilon", type=_floats, default=[0.25])
    cp.add_argument("--out")
    cp.set_defaults(func=cmd_compare)
    return p


def _threads(flag):
    if flag is not None:
        return flag
    env = os.environ.get("EVOSET_THREADS")
    return int(env) if env else None


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"evoset: warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        threads = _threads(args.threads)
    except ValueError:
        parser.print_usage(sys.stderr)
        print("evoset: error: EVOSET_THREADS must be an integer", file=sys.stderr)
        return EXIT_USAGE
    limit = threadpool_limits(limits=threads) if threads else contextlib.nullcontext()
    try:
        with limit, warnings.catch_warnings():
            warnings.showwarning = _show_warning
            return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"evoset: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"evoset: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TooLarge as exc:
        print(f"evoset: too large: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except UnboundedIntegral as exc:
        print(f"evoset: unbounded integral: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED
    except NotMixed as exc:
        print(f"evoset: not mixed: {exc}", file=sys.stderr)
        return EXIT_NOT_MIXED
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"evoset: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
