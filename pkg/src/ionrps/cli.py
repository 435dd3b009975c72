"""``ionrps`` command line.

Exit codes: 0 on success, 1 on validation errors (bad arguments, config or
input files), 2 on runtime errors.  Options may also come from a
``--config`` file of ``key = value`` lines; command-line flags win over the
file, which wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import figures
from .ecm import LearningParams, NetworkError, NetworkParseError, load_network
from .invasion import CYCLE, GameState, biased_h, run_session
from .noise import BadConfig, ExperimentConfig, monte_carlo
from .pulses import (PulseParseError, UnsupportedFlagSet, angles_from_pi,
                     compile_rank_one_deliberation, probability_unitary_2ion, write_pulses,
                     format_pulses)
from .quantum import m_eps_for
from .rng import stream


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    return [_angle(x) for x in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _angle(text: str) -> float:
    """Float that also accepts ``pi``, ``pi/10`` and ``2*pi``."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("pi", "").rstrip("*") or "1"
    return float(coef) * math.pi / (float(den) if den else 1.0)


def _common(p: argparse.ArgumentParser, trials=True):
    p.add_argument("--config", type=Path, help="file of 'key = value' lines")
    p.add_argument("--seed", type=int, default=0)
    if trials:
        p.add_argument("--trials", type=int, default=10_000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ionrps", description="Classical and quantum RPS deliberation on trapped ions")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="check a network file")
    p.add_argument("network", type=Path)
    p.add_argument("--config", type=Path)

    p = sub.add_parser("simulate", help="one Monte-Carlo configuration -> ratios.csv row")
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--ratio", type=float, default=9.0)
    p.add_argument("--sigma", type=_angle, default=0.0)
    p.add_argument("--m-eps", dest="m_eps_override", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("ratios.csv"))

    p = sub.add_parser("fig-scaling", help="mean N_U against epsilon")
    _common(p)
    p.add_argument("--sigma", type=_floats, default=list(figures.SIGMA_GRID))
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--epsilons", type=_floats, default=list(figures.EPS_GRID))
    p.add_argument("--m-eps", dest="m_eps_override", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("scaling.csv"))

    p = sub.add_parser("fig-compare", help="quantum against classical mean N_U")
    _common(p)
    p.add_argument("--sigma", type=_angle, default=0.0)
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--epsilons", type=_floats, default=list(figures.EPS_GRID))
    p.add_argument("--out", type=Path, default=Path("compare.csv"))

    p = sub.add_parser("fig-distance", help="statistical distance against sigma")
    _common(p)
    p.add_argument("--sigma", type=_floats, default=list(figures.DISTANCE_SIGMAS))
    p.add_argument("--ratio", type=_floats, default=[9.0])
    p.add_argument("--epsilons", type=_floats, default=[0.05])
    p.add_argument("--out", type=Path, default=Path("distance.csv"))

    p = sub.add_parser("fig-ratio", help="empirical N1/N2 against the target ratio")
    _common(p)
    p.add_argument("--sigma", type=_floats, default=[0.0])
    p.add_argument("--ratio", type=_floats, default=list(figures.RATIO_GRID))
    p.add_argument("--epsilons", type=_floats, default=list(figures.RATIO_EPS_GRID))
    p.add_argument("--out", type=Path, default=Path("ratios.csv"))

    p = sub.add_parser("compile-pulses", help="emit a pulse schedule")
    p.add_argument("--config", type=Path)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--ratio", type=float, default=9.0)
    p.add_argument("--m", type=int, default=None, help="Grover blocks (default m_eps)")
    p.add_argument("--flags", type=_ints, default=[1, 2])
    p.add_argument("--probabilities", type=_floats, default=None,
                   help="four probabilities: emit the two-ion controlization schedule instead")
    p.add_argument("--emit-pulses", type=Path, default=None, help="output file (default stdout)")

    p = sub.add_parser("invasion", help="play the invasion game")
    _common(p, trials=False)
    p.add_argument("--agent", choices=["classical-rps", "quantum-rps"], default="quantum-rps")
    p.add_argument("--rounds", type=int, default=500)
    p.add_argument("--switch-at", type=int, default=None)
    p.add_argument("--bias", type=float, default=None, help="start from a taught network")
    p.add_argument("--learning-rate", type=float, default=1.0)
    p.add_argument("--forgetting", type=float, default=0.0)
    p.add_argument("--out", type=Path, default=Path("session.csv"))
    return parser


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise BadConfig([f"{path}:{n}: expected 'key = value'"])
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand")
    path = getattr(args, "config", None)
    if path is None:
        return args
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    errors, defaults = [], {}
    for key, value in read_config(path).items():
        key = {"m_eps": "m_eps_override"}.get(key, key)
        act = actions.get(key)
        if act is None:
            errors.append(f"{key}: unknown option for {args.command}")
            continue
        try:
            defaults[key] = act.type(value) if act.type else value
        except (TypeError, ValueError) as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise BadConfig(errors)
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_validate(args) -> int:
    try:
        net = load_network(args.network)
    except (NetworkError, NetworkParseError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {net.size} clips, actions {sorted(net.action_ids)}")
    return 0


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig(args.epsilon, args.ratio, args.sigma, args.trials, args.seed,
                           args.m_eps_override)
    st = monte_carlo(cfg)
    row = (cfg.epsilon, cfg.ratio, cfg.sigma, st.n1, st.n2, st.ratio_empirical)
    figures.write_csv(args.out, figures.RATIOS_HEADER, [row])
    print(f"N1={st.n1} N2={st.n2} ratio={st.ratio_empirical:.4f} mean_nu={st.mean_nu:.4f} "
          f"D={st.distance:.4f}")
    return 0


def _check_grid(eps, ratios=(1.0,), sigmas=(0.0,), trials=1):
    # construct one config per grid point so bad values fail before any work
    for e in eps:
        for r in ratios:
            for s in sigmas:
                ExperimentConfig(e, r, s, trials)


def cmd_fig_scaling(args) -> int:
    _check_grid(args.epsilons, [args.ratio], args.sigma, args.trials)
    rows = figures.scaling_rows(args.sigma, args.epsilons, args.ratio, args.trials, args.seed,
                                args.m_eps_override)
    figures.write_csv(args.out, figures.SCALING_HEADER, rows)
    return 0


def cmd_fig_compare(args) -> int:
    _check_grid(args.epsilons, [args.ratio], [args.sigma], args.trials)
    rows = figures.compare_rows(args.epsilons, args.ratio, args.sigma, args.trials, args.seed)
    figures.write_csv(args.out, figures.COMPARE_HEADER, rows)
    return 0


def cmd_fig_distance(args) -> int:
    _check_grid(args.epsilons, args.ratio, args.sigma, args.trials)
    rows = figures.distance_rows(args.sigma, args.epsilons, args.ratio, args.trials, args.seed)
    figures.write_csv(args.out, figures.DISTANCE_HEADER, rows)
    return 0


def cmd_fig_ratio(args) -> int:
    _check_grid(args.epsilons, args.ratio, args.sigma, args.trials)
    rows = figures.ratio_rows(args.epsilons, args.ratio, args.sigma, args.trials, args.seed)
    figures.write_csv(args.out, figures.RATIOS_HEADER, rows)
    return 0


def cmd_compile_pulses(args) -> int:
    if args.probabilities is not None:
        p = np.asarray(args.probabilities)
        if p.size != 4 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise BadConfig(["probabilities: need four non-negative values summing to 1"])
        seq, _ = probability_unitary_2ion(p)
    else:
        cfg = ExperimentConfig(args.epsilon, args.ratio)
        m = m_eps_for(cfg.epsilon) if args.m is None else args.m
        if m < 0:
            raise BadConfig([f"m: {m} must be non-negative"])
        t1, t2 = angles_from_pi(cfg.pi)
        seq = compile_rank_one_deliberation(t1, t2, args.flags, m)
    if args.emit_pulses is None:
        sys.stdout.write(format_pulses(seq))
    else:
        write_pulses(args.emit_pulses, seq)
        print(f"{len(seq)} pulses ({seq.cost} elementary) -> {args.emit_pulses}")
    return 0


def cmd_invasion(args) -> int:
    if args.rounds < 1:
        raise BadConfig([f"rounds: {args.rounds} must be at least 1"])
    state = GameState()
    h = biased_h(state.permutation, args.bias) if args.bias is not None else None
    hist = run_session(args.agent, args.rounds, args.switch_at, stream(args.seed, "invasion"),
                       LearningParams(args.learning_rate, args.forgetting), state, CYCLE, h)
    hist.write_csv(args.out)
    tail = hist.block_rate(max(0, args.rounds - 100))
    print(f"block rate (last 100 rounds) {tail:.3f}, mean N_U {hist.n_u.mean():.3f}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "fig-scaling": cmd_fig_scaling,
    "fig-compare": cmd_fig_compare,
    "fig-distance": cmd_fig_distance,
    "fig-ratio": cmd_fig_ratio,
    "compile-pulses": cmd_compile_pulses,
    "invasion": cmd_invasion,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except (UsageError, BadConfig, UnsupportedFlagSet, PulseParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure inside a pipeline
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
