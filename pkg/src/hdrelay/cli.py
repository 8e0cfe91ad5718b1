"""Command-line front end.

Every command prints ``seed=...`` and ``config_hash=...`` to stderr and
writes its table as CSV to ``--out`` (stdout by default).  Exit codes:
2 for unreadable or malformed input, 3 for inputs that parse but violate a
channel or distribution invariant.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import catalog
from .blockmarkov_sim import (
    BLOCK_MARKOV_STEPS,
    FLOW_STEPS,
    CodeParams,
    csv_header,
    fixed_schedule_allocation,
    rate_allocation,
    run_block_markov,
    run_flow_oriented,
)
from .bounds import (
    OBJECTIVES,
    ScheduleParams,
    achievable_decode_forward,
    deterministic_schedule_rate,
    optimize_bound,
    outer_bound_degraded,
    outer_bound_general,
)
from .channel_core import (
    ChannelError,
    InputDistribution,
    channel_from_dict,
    channel_to_dict,
    check_physically_degraded,
    distribution_from_dict,
    validate_input_distribution,
)
from .fullduplex import ConstructionInfeasible, compare_full_vs_half, construct_degraded_fullduplex
from .gaussian import GaussianParams, alpha_sweep, optimize_alpha_beta
from .info_metrics import rate_breakdown
from .optim import OptimizerOptions

DEFAULT_SEED = 20240607
BUILTINS = {"bsc_deg": catalog.bsc_deg, "noiseless": catalog.noiseless, "erasure_relay": catalog.erasure_relay}

EXIT_PARSE = 2
EXIT_INVARIANT = 3


class InputError(Exception):
    """Unreadable or malformed input (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    spec: str | None
    out: str | None
    seed: int
    options: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        blob = json.dumps({"command": self.command, "seed": self.seed, "options": self.options,
                           "sources": self.sources}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_spec(name: str, cfg: RunConfig):
    """A JSON channel file, or one of the built-in channels by name."""
    if name in BUILTINS and not Path(name).exists():
        ch = BUILTINS[name]()
        cfg.sources["spec"] = channel_to_dict(ch)
        return ch
    raw = _read_json(name)
    cfg.sources["spec"] = raw
    return channel_from_dict(raw)


def load_dist(path: str | None, ch, cfg: RunConfig) -> InputDistribution:
    """Read ``--dist``; without one, listen half the time with uniform inputs."""
    if path is None:
        nx1, nx2, _ = ch.input_shape
        return InputDistribution.from_modes(0.5, np.full(nx1, 1 / nx1), np.full((nx1, nx2), 1 / (nx1 * nx2)),
                                            ch.quiet_index)
    raw = _read_json(path)
    cfg.sources["dist"] = raw
    d = distribution_from_dict(raw, ch)
    if not validate_input_distribution(d, ch, tol=1e-9):
        raise ChannelError("field 'pmf': relay input must be the quiet symbol while listening")
    return d


def _opts(args) -> OptimizerOptions:
    return OptimizerOptions(grid_resolution=args.grid, restarts=args.restarts, seed=args.seed)


def _write_rows(args, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _f(x) -> str:
    return repr(float(x))


def _quantities(pairs) -> tuple[list, list]:
    return ["quantity", "value"], [[k, _f(v) if isinstance(v, (float, np.floating)) else v] for k, v in pairs]


# --- commands ---------------------------------------------------------------


def cmd_bounds(args, cfg):
    ch = load_spec(args.spec, cfg)
    d = load_dist(args.dist, ch, cfg)
    b = rate_breakdown(d, ch)
    pairs = [("outer_general", outer_bound_general(d, ch))]
    if check_physically_degraded(ch.bc).degraded:
        pairs.append(("outer_degraded", outer_bound_degraded(d, ch)))
    pairs += [("decode_forward", achievable_decode_forward(d, ch)),
              ("deterministic_schedule", deterministic_schedule_rate(ScheduleParams.from_input_distribution(d), ch))]
    pairs += list(b.as_dict().items())
    return _quantities(pairs)


def cmd_optimize(args, cfg):
    ch = load_spec(args.spec, cfg)
    res = optimize_bound(ch, args.objective, _opts(args))
    pairs = [("objective", args.objective), ("value", res.value)]
    pairs += list(res.breakdown.as_dict().items())
    for idx in np.ndindex(res.argmax.shape):
        x1, x2, x3 = idx
        pairs.append((f"p[{ch.x1.symbols[x1]},{ch.x2.symbols[x2]},{'lt'[x3]}]", float(res.argmax.pmf[idx])))
    return _quantities(pairs)


def _schedule(args, ch, cfg) -> ScheduleParams:
    if args.alpha is None:
        return optimize_bound(ch, "deterministic", _opts(args)).schedule
    d = load_dist(args.dist, ch, cfg)
    return ScheduleParams(args.alpha, d.listen_x1(), d.transmit_x1x2())


def cmd_simulate(args, cfg):
    ch = load_spec(args.spec, cfg)
    if args.alpha is not None:
        sp = _schedule(args, ch, cfg)
        d = sp.to_input_distribution(ch.quiet_index)
        rates = fixed_schedule_allocation(sp, ch, args.margin)
    else:
        d = load_dist(args.dist, ch, cfg)
        rates = rate_allocation(d, ch, args.margin)
    p = CodeParams(args.n, args.blocks, *rates, epsilon=args.epsilon, seed=args.seed,
                   deterministic_schedule=args.alpha is not None)
    if args.trials == 0:
        return csv_header("block_markov", 4, BLOCK_MARKOV_STEPS), []
    rep = run_block_markov(ch, d, p, args.trials)
    return rep.csv_fields(), [rep.csv_row()]


def cmd_flow(args, cfg):
    ch = load_spec(args.spec, cfg)
    sp = _schedule(args, ch, cfg)
    if args.trials == 0:
        return csv_header("flow", 3, FLOW_STEPS), []
    rep = run_flow_oriented(ch, sp, args.margin, args.n, args.trials, seed=args.seed, epsilon=args.epsilon)
    return rep.csv_fields(), [rep.csv_row()]


def cmd_gaussian(args, cfg):
    g = GaussianParams(args.p1, args.p2, args.sigma2, args.sigma1_2, beta=args.beta)
    if args.optimize:
        opt = optimize_alpha_beta(g, args.kind, grid=args.grid)
        pairs = [("kind", args.kind), ("alpha", opt.alpha), ("beta", opt.beta), ("total", opt.total),
                 ("grid_best", opt.grid_best), ("clamped", opt.rates.clamped)]
        return _quantities(pairs)
    rows = alpha_sweep(g, args.step)
    header = list(rows[0])
    return header, [[_f(r[k]) if isinstance(r[k], float) else r[k] for k in header] for r in rows]


def cmd_fullduplex(args, cfg):
    ch = load_spec(args.spec, cfg)
    pairs = []
    try:
        construct_degraded_fullduplex(ch.bc, ch.ma)
        pairs.append(("construction_residual_ok", True))
    except ConstructionInfeasible as exc:
        pairs += [("construction_residual_ok", False), ("construction_residual", exc.residual)]
    cmp = compare_full_vs_half(ch, _opts(args))
    pairs += [("c_full", cmp.c_full), ("c_half_random", cmp.c_half_random),
              ("c_half_deterministic", cmp.c_half_deterministic),
              ("quiet_consistent", cmp.quiet_consistent), ("constructible", cmp.constructible),
              ("ordering", cmp.ordering)]
    for i, v in enumerate(cmp.violations):
        pairs.append((f"claim_violation_{i}", json.dumps(v, sort_keys=True)))
    return _quantities(pairs)


COMMANDS = {"bounds": cmd_bounds, "optimize": cmd_optimize, "simulate": cmd_simulate,
            "flow": cmd_flow, "gaussian": cmd_gaussian, "fullduplex": cmd_fullduplex}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", help="CSV destination (default: stdout)")
    common.add_argument("--grid", type=int, default=20, help="lattice resolution per simplex")
    common.add_argument("--restarts", type=int, default=4)

    spec = argparse.ArgumentParser(add_help=False)
    spec.add_argument("--spec", required=True,
                      help=f"channel JSON file or built-in name ({', '.join(BUILTINS)})")
    spec.add_argument("--dist", help="input distribution JSON file")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--margin", type=float, default=0.5)
    sim.add_argument("--n", type=int, default=64)
    sim.add_argument("--trials", type=int, default=100)
    sim.add_argument("--epsilon", type=float, default=0.1)
    sim.add_argument("--alpha", type=float, help="fixed listen fraction (uses --dist for the mode inputs)")

    parser = argparse.ArgumentParser(prog="hdrelay", description="Half-duplex relay channel toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bounds", parents=[common, spec], help="evaluate all bounds at one input distribution")
    p = sub.add_parser("optimize", parents=[common, spec], help="maximize a bound")
    p.add_argument("--objective", choices=OBJECTIVES, default="degraded")
    p = sub.add_parser("simulate", parents=[common, spec, sim], help="block Markov Monte Carlo")
    p.add_argument("--blocks", type=int, default=4)
    sub.add_parser("flow", parents=[common, spec, sim], help="two-slot flow scheme Monte Carlo")
    p = sub.add_parser("gaussian", parents=[common], help="Gaussian rates: alpha sweep or optimum")
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--sigma1-2", dest="sigma1_2", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--kind", choices=("outer", "inner"), default="outer")
    p.add_argument("--optimize", action="store_true", help="search (alpha, beta) instead of sweeping alpha")
    sub.add_parser("fullduplex", parents=[common, spec], help="full-duplex versus half-duplex capacity")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "seed", "out")}
    cfg = RunConfig(args.command, getattr(args, "spec", None), args.out, args.seed, opts)
    try:
        header, rows = COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"hdrelay: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ChannelError, ValueError) as exc:
        print(f"hdrelay: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"seed={cfg.seed} config_hash={cfg.config_hash()}", file=sys.stderr)
    _write_rows(args, header, rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
