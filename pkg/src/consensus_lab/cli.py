"""``consensus-lab`` command line.

Subcommands: generate, analyze, simulate, reproduce-table, verify.  Global
flags ``--seed``, ``--threads`` and ``--out`` are accepted before or after
the subcommand; ``CONSENSUS_LAB_THREADS`` is used when ``--threads`` is
absent.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, generators, verify
from .dynamics import (
    CouplingSchedule,
    fit_decay_rate,
    integrate_deterministic,
    integrate_sde,
    stationary_prediction,
    uniform_bound,
)
from .errors import ConsensusLabError, NotConvergent, NotNormal, PreconditionNotDissipative
from .graph import OrientedNetwork, bfs_distances
from .io import load_network, network_to_json, save_network, write_csv, write_json
from .spectral import analyze, classify_convergent

FAMILIES = ("path", "complete", "star", "cycle-power", "bipartite-perm")


def _components(net: OrientedNetwork) -> int:
    adj = net.neighbors()
    seen = np.zeros(net.n, dtype=bool)
    count = 0
    for v in range(net.n):
        if not seen[v]:
            seen |= bfs_distances(adj, v) >= 0
            count += 1
    return count


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        p = Path(out)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    fam = args.family
    if fam in ("path", "complete", "star"):
        if args.n is None:
            raise ValueError(f"--n is required for family {fam}")
        net = getattr(generators, fam)(args.n)
    elif fam == "cycle-power":
        if args.n is None or args.d is None:
            raise ValueError("--n and --d are required for family cycle-power")
        net = generators.cycle_power(args.n, args.d)
    else:
        if args.m is None or args.d is None:
            raise ValueError("--m and --d are required for family bipartite-perm")
        net = generators.random_bipartite_permutation(args.m, args.d, args.seed or 0, args.duplicates)
    c = net.m - net.n + _components(net)
    if args.out is None:
        sys.stdout.write(json.dumps(network_to_json(net)) + "\n")
        sys.stderr.write(f"n={net.n} m={net.m} c={c}\n")
    else:
        save_network(net, args.out)
        print(f"n={net.n} m={net.m} c={c} -> {args.out}")
    return 0


def cmd_analyze(args) -> int:
    report = analyze(load_network(args.graph)).to_json()
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def _load_scenario(path: str) -> dict:
    scenario = json.loads(Path(path).read_text(encoding="utf-8"))
    if "graph_file" not in scenario:
        raise ValueError("scenario needs a graph_file entry")
    base = Path(path).parent
    for key in ("graph_file", "switch_graph_file"):
        if key in scenario and not Path(scenario[key]).is_absolute():
            scenario[key] = str(base / scenario[key])
    return scenario


def _schedule(scenario: dict, D: np.ndarray) -> CouplingSchedule:
    sigma = float(scenario.get("sigma", 0.0))
    gain = float(scenario.get("gain", 1.0))
    kind = scenario.get("schedule", "constant")
    if kind == "constant":
        return CouplingSchedule.constant(D, sigma=sigma, gain=gain)
    if kind == "switching":
        if "switch_graph_file" in scenario:
            other = load_network(scenario["switch_graph_file"]).coupling_matrix()
        else:
            other = np.zeros_like(D)
        period = float(scenario.get("switch_period", 1.0))
        return CouplingSchedule.switching([D, other], period, sigma=sigma, gain=gain)
    raise ValueError(f"unknown schedule {kind!r}; use 'constant' or 'switching'")


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    net = load_network(scenario["graph_file"])
    D = net.coupling_matrix()
    schedule = _schedule(scenario, D)
    seed = args.seed if args.seed is not None else int(scenario.get("seed", 0))
    rng = np.random.default_rng(seed)
    x0 = np.asarray(scenario["x0"], dtype=float) if "x0" in scenario else rng.normal(scale=0.5, size=net.n)
    if x0.shape != (net.n,):
        raise ValueError(f"x0 must have {net.n} entries")
    dt = scenario.get("dt")
    conv = classify_convergent(D * schedule.gain)
    T = scenario.get("T")
    if T is None:
        if not conv.convergent:
            raise ValueError("T is required when the coupling is not convergent")
        T = 10.0 / conv.alpha
    T = float(T)

    summary = {"T": T, "alpha": conv.alpha, "convergent": conv.convergent}
    if schedule.sigma == 0.0:
        traj = integrate_deterministic(schedule, x0, T, dt)
        rows = zip(traj.times.tolist(), traj.off_consensus.tolist())
        _write_rows(["time", "off_consensus"], rows, args.out)
        final = traj.off_consensus[-1]
        if final > 0 and traj.off_consensus[0] > 0:
            summary["fitted_rate"] = fit_decay_rate(traj.times, traj.off_consensus, t_min=0.2 * T)
        summary["ratio"] = float(final / traj.off_consensus[0]) if traj.off_consensus[0] > 0 else 0.0
    else:
        ens = integrate_sde(
            schedule, x0, T, dt, n_paths=int(scenario.get("n_paths", 1000)), seed=seed, threads=args.threads
        )
        mean_sq, se = ens.mean_off_consensus_sq()
        prediction, label = _prediction(schedule, D, T)
        summary.update({"n_paths": ens.n_paths, "dt": ens.dt, label: prediction})
        plateau, plateau_se = ens.late_window_average()
        summary.update({"plateau": plateau, "plateau_se": plateau_se})
        pred_col = [prediction] * len(ens.times)
        rows = zip(ens.times.tolist(), mean_sq.tolist(), se.tolist(), pred_col)
        _write_rows(["time", "mean_off_consensus_sq", "se", label], rows, args.out)
    sys.stderr.write(json.dumps(summary) + "\n")
    return 0


def _prediction(schedule: CouplingSchedule, D: np.ndarray, T: float) -> tuple[float | str, str]:
    """Stationary value for constant normal couplings, else the uniform bound if it applies."""
    if schedule.is_constant:
        try:
            return stationary_prediction(D, schedule.sigma, schedule.gain).limit_second_moment, "prediction"
        except (NotNormal, NotConvergent):
            pass
    try:
        return uniform_bound(schedule, T), "uniform_bound"
    except PreconditionNotDissipative:
        return "", "prediction"


def _write_rows(header, rows, out) -> None:
    if out is None:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    else:
        write_csv(header, rows, out)


def cmd_reproduce_table(args) -> int:
    table = experiments.expander_table(seeds=args.seeds, base_seed=args.seed or 0)
    _write_rows(table.header(), table.rows(), args.out)
    if args.out is not None:
        for row in table.rows():
            print(row[0].ljust(24) + "".join(f"{v:10.4f}" for v in row[1:]))
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(quick=args.quick, threads=args.threads)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out is not None:
        write_json([{"name": r.name, "passed": r.passed, "detail": r.detail, "seconds": r.seconds} for r in results],
                   args.out)
    return 1 if failed else 0


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--seed", type=int, default=default, help="RNG seed")
    parser.add_argument("--threads", type=int, default=default, help="worker threads for ensembles")
    parser.add_argument("--out", default=default, help="output file (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-lab", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _global_flags(p, argparse.SUPPRESS)
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a benchmark graph as JSON")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int, help="vertices per side for bipartite-perm")
    p.add_argument("--duplicates", choices=("weight", "collapse"), default="weight")

    p = add("analyze", cmd_analyze, "spectral report of a graph file")
    p.add_argument("graph")

    p = add("simulate", cmd_simulate, "run a scenario file")
    p.add_argument("scenario")

    p = add("reproduce-table", cmd_reproduce_table, "ring vs random bipartite algebraic connectivity")
    p.add_argument("--seeds", type=int, default=experiments.TABLE_SEEDS)

    p = add("verify", cmd_verify, "run the acceptance checks and print a pass/fail table")
    p.add_argument("--quick", action="store_true", help="smaller sizes, same tolerances")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConsensusLabError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"consensus-lab {args.command}: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
