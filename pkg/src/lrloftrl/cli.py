"""Command-line experiment runner.

    lrloftrl run --config CONFIG [--strict] [--out PATH]
    lrloftrl validate --config CONFIG

A config is a JSON object::

    {"game": {"type": "kuhn", "players": 2} | "path/to/game.json",
     "T": 1024,
     "eta": "recommended" | 0.5,
     "solver": "prox_newton" | "fw_newton",
     "epsilon": "auto" | 1e-4,
     "checkpoints": "powers_of_2" | [1, 10, 100],
     "strict": false,
     "strict_theory": false,
     "out": "trace.csv",
     "seed": 0}

Exit codes: 0 success, 1 strict-mode invariant failure, 2 bad config,
3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import treeplex as tp
from .dynamics import (RunError, identity_holds, log_slope, make_learners, path_length_bound,
                       power_of_two_checkpoints, regret_bound, run_self_play, stability_report)
from .games import build_from_spec, recommended_learning_rate
from .learner import SOLVERS

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
CSV_HEADER = ["t", "player", "external_regret", "lifted_regret", "path_length", "stability_max"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    game: dict
    T: int
    eta: object = "recommended"
    solver: str = "prox_newton"
    epsilon: object = "auto"
    checkpoints: object = "powers_of_2"
    strict: bool = False
    strict_theory: bool = False
    out: str = None
    seed: int = 0


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw, base=os.path.dirname(os.path.abspath(path)))


def parse_config(raw, base: str = ".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "game" not in raw or "T" not in raw:
        raise ConfigError("config needs 'game' and 'T'")
    game = raw["game"]
    if isinstance(game, str):
        gpath = game if os.path.isabs(game) else os.path.join(base, game)
        try:
            with open(gpath, encoding="utf-8") as fh:
                game = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read game spec {gpath}: {exc}") from exc
    if not isinstance(game, dict):
        raise ConfigError("game must be an object or a path to one")
    T = raw["T"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ConfigError("T must be a positive integer")
    eta = raw.get("eta", "recommended")
    if eta != "recommended" and not (_is_number(eta) and eta > 0):
        raise ConfigError("eta must be 'recommended' or a positive number")
    solver = raw.get("solver", "prox_newton")
    if solver not in SOLVERS:
        raise ConfigError(f"solver must be one of {SOLVERS}")
    eps = raw.get("epsilon", "auto")
    if eps != "auto" and not (_is_number(eps) and 0 < eps < 0.2):
        raise ConfigError("epsilon must be 'auto' or a number in (0, 0.2)")
    cps = raw.get("checkpoints", "powers_of_2")
    if cps != "powers_of_2":
        if not isinstance(cps, list) or not cps or \
                not all(isinstance(c, int) and 1 <= c <= T for c in cps):
            raise ConfigError("checkpoints must be 'powers_of_2' or a list of rounds in 1..T")
    cfg = RunConfig(game=game, T=T, eta=eta, solver=solver, epsilon=eps, checkpoints=cps,
                    strict=bool(raw.get("strict", False)),
                    strict_theory=bool(raw.get("strict_theory", False)),
                    out=raw.get("out"), seed=int(raw.get("seed", 0)))
    return cfg


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _checkpoints(cfg: RunConfig) -> list:
    if cfg.checkpoints == "powers_of_2":
        return power_of_two_checkpoints(cfg.T)
    return sorted(set(cfg.checkpoints))


# ---------------------------------------------------------------------------
# invariants


def check_invariants(trace, theory: bool) -> list:
    """Names of failed invariants.  Theory bounds are checked only if ``theory``."""
    game = trace.game
    failures = []
    for cp in trace.checkpoints:
        for i in range(trace.n):
            if not identity_holds(cp.lifted_regret[i], cp.external_regret[i]):
                failures.append(f"lifted-regret identity failed at t={cp.t}, player {i}")
    paths = [cp.path_length for cp in trace.checkpoints]
    if any(p < 0 for p in paths) or any(b < a for a, b in zip(paths, paths[1:])):
        failures.append("path length is negative or decreasing")
    for i, lr in enumerate(trace.learners):
        rounds = trace.zs[i] if lr.switch_round is None else trace.zs[i][:lr.switch_round]
        if np.any(rounds <= 0):
            failures.append(f"player {i}: lifted iterate with a nonpositive coordinate")
        if np.max(np.abs(trace.us[i])) > game.B * (1 + 1e-9):
            failures.append(f"player {i}: gradient exceeds B={game.B:g}")
    if theory:
        eta = max(lr.eta for lr in trace.learners)
        eps = max(lr.eps for lr in trace.learners)
        for cp in trace.checkpoints:
            rb = regret_bound(game, cp.t, eps)
            for i in range(trace.n):
                if cp.external_regret[i] > rb:
                    failures.append(f"regret bound exceeded at t={cp.t}, player {i}")
            if cp.t >= 2 and cp.path_length > path_length_bound(game, cp.t, eta):
                failures.append(f"path-length bound exceeded at t={cp.t}")
        for i, rep in enumerate(stability_report(trace)):
            if not rep["ok"]:
                failures.append(f"player {i}: stability {rep['max']:.3g} > {rep['bound']:.3g}")
        for i, lr in enumerate(trace.learners):
            if lr.adversarial:
                failures.append(f"player {i}: adversarial check fired in self-play at t={lr.switch_round}")
    return failures


# ---------------------------------------------------------------------------
# commands


def write_csv(trace, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cp in trace.checkpoints:
        for i in range(trace.n):
            writer.writerow([cp.t, i, "%.12g" % cp.external_regret[i], "%.12g" % cp.lifted_regret[i],
                             "%.12g" % cp.path_length, "%.12g" % cp.stability_max[i]])


def summary_lines(trace) -> list:
    ts = [cp.t for cp in trace.checkpoints]
    lines = [f"game={trace.game.name} T={trace.T} eta={trace.learners[0].eta:.6g} "
             f"eps={trace.learners[0].eps:.6g} solver={trace.learners[0].solver}"]
    for i in range(trace.n):
        regs = [cp.external_regret[i] for cp in trace.checkpoints]
        lines.append(f"player {i}: final_regret={regs[-1]:.6g} log_slope={log_slope(ts, regs):.6g}")
    return lines


def run(cfg: RunConfig, strict: bool = None, out_path: str = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    strict = cfg.strict if strict is None else strict
    out_path = out_path or cfg.out
    try:
        game = build_from_spec(cfg.game)
        eta = None if cfg.eta == "recommended" else float(cfg.eta)
        eps = None if cfg.epsilon == "auto" else float(cfg.epsilon)
        learners = make_learners(game, cfg.T, eta=eta, solver=cfg.solver, eps=eps)
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trace = run_self_play(game, learners, cfg.T, _checkpoints(cfg))
    except RunError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    # built-in games are deterministic; the seed is only echoed with the trace
    trace.config["seed"] = cfg.seed
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            write_csv(trace, fh)
    else:
        write_csv(trace, stdout)
    for line in summary_lines(trace):
        print(line, file=stdout if out_path else sys.stderr)
    if strict:
        rec = recommended_learning_rate(game.n, game.B, game.L, game.l1)
        theory = all(lr.eta <= rec * (1 + 1e-12) for lr in learners)
        failures = check_invariants(trace, theory)
        for f in failures:
            print(f"invariant: {f}", file=sys.stderr)
        if failures:
            return EXIT_INVARIANT
    return EXIT_OK


def _walk_treeplexes(obj, path="$"):
    """Yield ``(path, treeplex json)`` for every treeplex embedded in a game spec."""
    if isinstance(obj, dict):
        for key, val in obj.items():
            if key == "treeplex":
                yield f"{path}.{key}", val
            elif key == "treeplexes" and isinstance(val, list):
                for j, t in enumerate(val):
                    yield f"{path}.{key}[{j}]", t
            else:
                yield from _walk_treeplexes(val, f"{path}.{key}")
    elif isinstance(obj, list):
        for j, v in enumerate(obj):
            yield from _walk_treeplexes(v, f"{path}[{j}]")


def validate(raw, base: str = ".") -> list:
    """Report lines: ``error: ...`` and ``warning: ...``; empty when all is well."""
    report = []
    try:
        cfg = parse_config(raw, base)
    except ConfigError as exc:
        return [f"error: {exc}"]
    tree_errors = []
    for path, t in _walk_treeplexes(cfg.game):
        tree_errors += [f"error: treeplex {e}" for e in tp.structural_errors(t, path=path)]
    report += tree_errors
    if tree_errors:
        return report
    try:
        game = build_from_spec(cfg.game)
    except (ValueError, KeyError, TypeError) as exc:
        return report + [f"error: game spec: {exc}"]
    rec = recommended_learning_rate(game.n, game.B, game.L, game.l1)
    if cfg.strict_theory and cfg.eta != "recommended" and cfg.eta > rec:
        report.append(f"warning: eta={cfg.eta:g} exceeds the theoretical rate {rec:.6g}; "
                      "regret and path-length bounds are not guaranteed")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lrloftrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run self-play and write a CSV regret trace")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--strict", action="store_true", help="exit 1 if an invariant fails")
    p_run.add_argument("--out", help="CSV output path (default: standard output)")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return run(cfg, strict=args.strict or cfg.strict, out_path=args.out)

    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}")
        return EXIT_CONFIG
    report = validate(raw, os.path.dirname(os.path.abspath(args.config)))
    for line in report:
        print(line)
    if not report:
        print("ok")
    return EXIT_CONFIG if any(line.startswith("error") for line in report) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
