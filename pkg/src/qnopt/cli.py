"""Command line interface.

Subcommands: ``run`` executes a JSON experiment spec, ``ftqc`` performs
single coordination runs, ``solve`` runs one of the gradient methods
from a JSON config, and ``sweep`` is a shorthand for the named parameter
sweeps. Exit codes: 0 success, 2 configuration error, 3 numeric
failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import harness
from .exceptions import ConfigurationError, NumericError
from .ftqc import ftqc_run, write_round_log
from .harness import ExperimentSpec, run_experiment
from .network import Graph, generate_graph
from .quantize import Quantizer
from .solvers import (SolverConfig, run_algorithm2, run_algorithm3, run_dgt,
                      run_near_dgd)

_SWEEP_PARAMS = {
    "delta": ("ftqc_table", "deltas", float),
    "rho": ("rho_delta_sweep", "rhos", float),
    "quantizer": ("quantizer_table", "kinds", str),
    "batch": ("batch_sweep", "batch_sizes", int),
    "activation": ("async_sweep", "activations", float),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qnopt",
        description="Distributed learning over peer-to-peer networks "
                    "with quantized communications")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment spec (JSON)")
    p_run.add_argument("spec", help="path to the ExperimentSpec JSON file")
    _common_flags(p_run)

    p_ftqc = sub.add_parser("ftqc", help="single coordination run")
    p_ftqc.add_argument("--delta", type=float, required=True)
    p_ftqc.add_argument("--rho", type=float, default=harness.DEFAULT_RHO)
    p_ftqc.add_argument("--graph", default="erdos_renyi",
                        help="graph kind (ring|complete|erdos_renyi) or a "
                             "JSON graph file")
    p_ftqc.add_argument("--num-agents", type=int, default=10)
    p_ftqc.add_argument("--dim", type=int, default=10)
    p_ftqc.add_argument("--edge-prob", type=float, default=0.4)
    _common_flags(p_ftqc)

    p_solve = sub.add_parser("solve", help="run a gradient method")
    p_solve.add_argument("--method", required=True,
                         choices=["alg2", "alg3", "near-dgd", "dgt"])
    p_solve.add_argument("--config", required=True,
                         help="JSON file with problem/graph/solver sections")
    _common_flags(p_solve)

    p_sweep = sub.add_parser("sweep", help="named parameter sweep")
    p_sweep.add_argument("--param", required=True,
                         choices=sorted(_SWEEP_PARAMS))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    _common_flags(p_sweep)
    return parser


def _common_flags(sub):
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None, help="output directory for CSVs")
    sub.add_argument("--replicates", type=int, default=None)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in {path}: {exc}") from exc


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_outputs(spec, result, out):
    paths = []
    table = result.get("table")
    if table is not None:
        path = os.path.join(out, f"{spec.experiment}_summary.csv")
        table.to_csv(path)
        paths.append(path)
    for key, record in result.get("records", {}).items():
        path = os.path.join(out, f"{spec.experiment}_{key}.csv")
        record.to_csv(path)
        paths.append(path)
    return paths


def _cmd_run(args):
    data = _load_json(args.spec)
    spec = ExperimentSpec.from_json_dict(data)
    if args.seed is not None:
        spec.seed = args.seed
    if args.replicates is not None:
        spec.replicates = args.replicates
    if args.out is not None:
        spec.out = args.out
    out = spec.out or "."
    os.makedirs(out, exist_ok=True)
    result = run_experiment(spec)
    for path in _write_outputs(spec, result, out):
        print(path)
    return 0


def _resolve_graph_arg(arg, num_agents, edge_prob, seed):
    if arg in ("ring", "complete", "erdos_renyi"):
        return generate_graph(arg, num_agents, edge_prob=edge_prob, seed=seed)
    return Graph.load(arg)


def _cmd_ftqc(args):
    replicates = args.replicates or 1
    graph = _resolve_graph_arg(args.graph, args.num_agents, args.edge_prob,
                               args.seed)
    spec = ExperimentSpec("ftqc_table", seed=args.seed)
    cfg = harness._ftqc_config(spec, rho=args.rho)
    out = _outdir(args) if args.out else None
    rows = []
    for rep in range(replicates):
        rng = np.random.default_rng(
            np.random.SeedSequence([args.seed, 1, rep]))
        y = rng.standard_normal((graph.num_agents, args.dim))
        res = ftqc_run(y, graph, Quantizer("symmetric", delta=args.delta), cfg)
        rows.append((rep, res.consensus_error, res.iterations_used,
                     int(res.terminated_naturally)))
        if out:
            write_round_log(os.path.join(out, f"ftqc_rounds_rep{rep}.csv"),
                            res)
        print(f"replicate {rep}: consensus_error={res.consensus_error:.6e} "
              f"iterations={res.iterations_used} "
              f"terminated={res.terminated_naturally}")
    if out:
        path = os.path.join(out, "ftqc_summary.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "consensus_error", "iterations",
                             "terminated_naturally"])
            for row in rows:
                writer.writerow([row[0], repr(row[1]), row[2], row[3]])
        print(path)
    return 0


def _cmd_solve(args):
    data = _load_json(args.config)
    spec = ExperimentSpec("method_comparison",
                          problem=data.get("problem", {}),
                          graph=data.get("graph", {}),
                          solver=data.get("solver", {}),
                          seed=args.seed)
    problem = harness._build_problem(spec)
    graph = harness._build_graph(spec, problem.num_agents)
    solver = dict(data.get("solver", {}))
    alpha = harness._auto_alpha(spec, problem)
    if "quantizer" in solver:
        quant = Quantizer.from_config(solver["quantizer"])
    else:
        quant = Quantizer("symmetric", delta=solver.get("delta", 1e-4))
    replicates = args.replicates or 1
    out = _outdir(args) if args.out else None
    method = args.method.replace("-", "_")
    for rep in range(replicates):
        cfg = SolverConfig(
            step_size=alpha,
            num_iters=int(solver.get("num_iters", 1000)),
            quantizer=quant,
            ftqc=harness._ftqc_config(spec),
            activation=solver.get("activation", 1.0),
            batch_size=solver.get("batch_size"),
            zoom_period=solver.get("zoom_period"),
            zoom_factor=solver.get("zoom_factor"),
            comm_rounds=int(solver.get("comm_rounds", 1)),
            seed=harness._derive_seed(args.seed, 2, rep),
        )
        runner = {"alg2": run_algorithm2, "alg3": run_algorithm3,
                  "near_dgd": run_near_dgd, "dgt": run_dgt}[method]
        record = runner(problem, graph, cfg)
        line = (f"replicate {rep}: final_err={record.err[-1]:.6e} "
                f"plateau={record.plateau():.6e} "
                f"comm_rounds={int(record.cum_comm_rounds[-1])}")
        if record.diverged:
            line += " diverged"
        print(line)
        if out:
            path = os.path.join(out, f"{method}_rep{rep}.csv")
            record.to_csv(path)
            print(path)
    return 0


def _cmd_sweep(args):
    experiment, key, cast = _SWEEP_PARAMS[args.param]
    try:
        values = [cast(v) for v in args.values.split(",") if v != ""]
    except ValueError as exc:
        raise ConfigurationError(
            f"could not parse --values {args.values!r} as {cast.__name__}"
        ) from exc
    if not values:
        raise ConfigurationError("--values is empty")
    spec = ExperimentSpec(experiment, params={key: values}, seed=args.seed,
                          replicates=args.replicates or 1)
    out = _outdir(args)
    result = run_experiment(spec)
    for path in _write_outputs(spec, result, out):
        print(path)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "ftqc": _cmd_ftqc, "solve": _cmd_solve,
                "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
