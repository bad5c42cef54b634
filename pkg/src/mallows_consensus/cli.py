"""Command-line interface: ``mallows-consensus <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as exp
from .baselines import acn_pivot, css_greedy, fv
from .model import THETA_CAP, read_model, sample, solve_theta
from .perm import FormatError, Permutation, format_rankings, read_rankings, write_rankings
from .prior import map_estimate, posterior_update, read_prior, write_prior
from .search import HEURISTICS, Mode, bf_css, objective, searchpi
from .stats import q_matrix, read_q_csv, v_bar

log = logging.getLogger("mallows_consensus")


class UsageError(Exception):
    pass


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"cannot parse numbers from {text!r}") from None


def _parse_center(text: str, n: int) -> Permutation:
    try:
        items = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError("--center must list integer item ids") from None
    if sorted(items) != list(range(1, n + 1)):
        raise UsageError(f"--center must be a permutation of 1..{n}")
    return Permutation.from_items(items)


def _looks_like_csv(path: str) -> bool:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                return "," in line
    return False


def _load_q(args):
    if args.input:
        if _looks_like_csv(args.input):
            return read_q_csv(args.input), None
        args.rankings = args.input
    if args.rankings:
        rankings = read_rankings(args.rankings)
        return q_matrix(rankings), rankings
    return read_q_csv(args.q), None


def _mode(args, n: int) -> Mode:
    if args.mode != "known" and args.theta is not None:
        raise UsageError("--theta is only valid with --mode known")
    if args.mode == "known":
        if args.theta is None:
            raise UsageError("--mode known requires --theta")
        theta = _parse_floats(args.theta)
        if len(theta) == 1:
            theta = theta * (n - 1)
        if len(theta) != n - 1:
            raise UsageError(f"--theta needs 1 or {n - 1} values")
        return Mode.known(theta)
    if args.mode == "joint":
        return Mode.joint(full_nll=not args.surrogate)
    if args.surrogate:
        raise UsageError("--surrogate only applies to --mode joint")
    return Mode.constant()


def _emit(record: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(record))
        return
    for key, value in record.items():
        print(f"{key}: {value}")


def _fmt_theta(theta) -> str:
    return " ".join(f"{t:.10g}" for t in theta)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_sample(args) -> None:
    model = read_model(args.model)
    draws = sample(model, args.N, args.seed)
    if args.out:
        write_rankings(args.out, draws)
    else:
        sys.stdout.write(format_rankings(draws))


def cmd_estimate_theta(args) -> None:
    rankings = read_rankings(args.rankings)
    Q = q_matrix(rankings)
    center = _parse_center(args.center, Q.n)
    vb = v_bar(Q, center)
    n = Q.n
    theta = [solve_theta(min(max(float(v), 0.0), n - j - 1), n - j, args.theta_cap) for j, v in enumerate(vb)]
    _emit({"center": str(center), "v_bar": _fmt_theta(vb), "theta": _fmt_theta(theta)}, args.json)


def cmd_search(args) -> None:
    Q, _ = _load_q(args)
    mode = _mode(args, Q.n)
    if args.algo == "bf":
        res = searchpi(Q, mode, args.heuristic, budget=args.budget, bound=args.bound)
    else:
        res = bf_css(Q, mode, args.budget or 10 ** 6, args.heuristic, bound=args.bound)
    record = {
        "algorithm": args.algo, "mode": args.mode, "heuristic": args.heuristic,
        "n": Q.n, "N": Q.N, "seed": args.seed,
    }
    record.update(res.record(theta=_fmt_theta(res.theta)))
    _emit(record, args.json)


def cmd_baseline(args) -> None:
    Q, _ = _load_q(args)
    mode = _mode(args, Q.n)
    if args.algo == "fv":
        pi0, expanded = fv(Q), 0
    elif args.algo == "css":
        pi0, expanded = css_greedy(Q), Q.n - 1
    else:
        pi0, expanded = acn_pivot(Q, args.seed), 0
    cost, theta = objective(Q, pi0, mode)
    _emit({
        "algorithm": args.algo, "mode": args.mode, "n": Q.n, "N": Q.N, "seed": args.seed,
        "cost": cost, "nodes_expanded": expanded, "nodes_created": 0,
        "pi0": str(pi0), "theta": _fmt_theta(theta),
    }, args.json)


def cmd_posterior(args) -> None:
    params = read_prior(args.prior)
    rankings = read_rankings(args.rankings)
    post = posterior_update(params, rankings)
    if args.out:
        write_prior(args.out, post)
    record = {"nu": post.nu}
    if args.map:
        mode = _mode(args, params.n)
        res = map_estimate(params, rankings, mode, args.heuristic, budget=args.budget)
        record.update(res.record(theta=_fmt_theta(res.theta)))
    _emit(record, args.json)


def cmd_experiment(args) -> None:
    theta = None
    if args.theta is not None:
        values = _parse_floats(args.theta)
        theta = values[0] if len(values) == 1 else values
    config = exp.ExperimentConfig(
        regime=args.regime, n=args.n, N=args.N, theta=theta, n_iter=args.iters, seed=args.seed,
        algorithms=tuple(a.strip() for a in args.algos.split(",") if a.strip()),
        budget=args.budget or 10 ** 6, bf_budget=args.bf_budget, heuristic=args.heuristic,
        mode=args.mode, ref_algo=args.ref_algo, timing=args.timing, audit=args.audit, jobs=args.jobs,
    )
    rows = exp.run_experiment(config)
    text = exp.rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_source(p) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--rankings", help="rankings file (one per line, 1-based ids)")
    src.add_argument("--q", help="Q matrix CSV")
    src.add_argument("--input", help="either format; comma-separated lines are read as a Q matrix")


def _add_mode(p, default: str = "constant") -> None:
    p.add_argument("--mode", choices=["constant", "known", "joint"], default=default)
    p.add_argument("--theta", help="theta for --mode known: one value or n-1 values")
    p.add_argument("--surrogate", action="store_true",
                   help="joint mode: drop the ln psi term (cost = sum theta_j V_j)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mallows-consensus", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw rankings from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate-theta", help="ML theta for a fixed center")
    p.add_argument("--rankings", required=True)
    p.add_argument("--center", required=True, help="1-based item ids, most preferred first")
    p.add_argument("--theta-cap", type=float, default=THETA_CAP)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate_theta)

    p = sub.add_parser("search", help="best-first search for the central ranking")
    _add_source(p)
    _add_mode(p)
    p.add_argument("--algo", choices=["bf", "bf_css"], default="bf")
    p.add_argument("--heuristic", choices=HEURISTICS, default="zero")
    p.add_argument("--budget", type=int, help="node-expansion limit")
    p.add_argument("--bound", choices=["child", "parent"], default="child")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("baseline", help="FV, greedy or random-pivot heuristics")
    _add_source(p)
    _add_mode(p)
    p.add_argument("--algo", choices=["fv", "css", "acn"], default="css")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("posterior", help="conjugate posterior update and MAP search")
    p.add_argument("--prior", required=True)
    p.add_argument("--rankings", required=True)
    p.add_argument("--out", help="write the posterior prior file here")
    p.add_argument("--map", action="store_true", help="also run the MAP search")
    _add_mode(p, default="joint")
    p.add_argument("--heuristic", choices=HEURISTICS, default="zero")
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("experiment", help="replicated algorithm comparison, CSV output")
    p.add_argument("--regime", choices=exp.REGIMES, default="concentrated")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--N", type=int)
    p.add_argument("--theta", help="generating theta (scalar or n-1 values)")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algos", default="bf,bf_css,css,fv,acn")
    p.add_argument("--budget", type=int, help="bf_css node-expansion budget (default 1e6)")
    p.add_argument("--bf-budget", type=int, help="optional cap on bf expansions")
    p.add_argument("--heuristic", choices=HEURISTICS, default="zero")
    p.add_argument("--mode", choices=exp.MODES, default="constant")
    p.add_argument("--ref-algo")
    p.add_argument("--timing", action="store_true", help="fill the wall_time column")
    p.add_argument("--audit", action="store_true", help="recompute every cost from pi0 and Q")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "budget", None) is not None and args.budget <= 0:
        parser.error("--budget must be positive")
    try:
        args.func(args)
    except (FormatError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
