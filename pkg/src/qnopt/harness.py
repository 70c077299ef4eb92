"""Experiment orchestration: tables, sweeps, and trajectory dumps.

Each experiment consumes an :class:`ExperimentSpec` and produces a
:class:`SummaryTable` (rows keyed by the swept parameter, mean and std
over replicates) plus, for the trajectory experiments, the per-run
records. Replicates use common random numbers across sweep cells so the
reported trends are not washed out by instance noise; everything is
reproducible from (spec, seed).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError
from .ftqc import FtqcConfig, ftqc_run
from .network import Graph, generate_graph
from .problem import LogisticProblem, generate_classification, solve_centralized
from .quantize import Quantizer
from .solvers import (SolverConfig, run_algorithm2, run_algorithm3, run_dgt,
                      run_near_dgd)

EXPERIMENTS = ("ftqc_table", "rho_delta_sweep", "quantizer_table",
               "method_comparison", "delta_table", "batch_sweep",
               "async_sweep", "zoom_comparison")

# experiment scale used throughout the empirical section
DEFAULT_PROBLEM = {
    "num_agents": 10, "samples_per_agent": 150, "dim": 10,
    "class_sep": 1.0, "label_noise": 0.0, "reg": 0.075,
    "normalization": "sum",
}
DEFAULT_GRAPH = {"kind": "erdos_renyi", "edge_prob": 0.4}
DEFAULT_RHO = 0.3   # swept optimum, used inside the gradient methods
TABLE_RHO = 1.0     # coordination-table default; see run_ftqc_table

# outer horizons long enough to reach the quantization floor at each
# level (tuned on the default problem scale)
_DELTA_HORIZONS = {1e-6: 8000, 1e-4: 5000, 1e-2: 2500}
_FALLBACK_HORIZON = 5000


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment.

    Parameters
    ----------
    experiment : str
        One of :data:`EXPERIMENTS`.
    problem : dict
        Overrides for the synthetic problem (see ``DEFAULT_PROBLEM``).
    graph : dict
        ``{"kind", "edge_prob"}`` or ``{"path": file}``.
    solver : dict
        Outer-loop overrides: ``step_size`` ("auto" picks
        2/(lo+hi)), ``rho``, ``term_factor``, ``ftqc_max_iters``.
    params : dict
        Experiment-specific knobs (delta grids, horizons, batch sizes,
        activation probabilities, zoom parameters).
    replicates : int
    seed : int
    out : str, optional
        Directory for CSV outputs (used by the CLI).
    """

    experiment: str
    problem: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    replicates: int = 1
    seed: int = 0
    out: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {self.experiment!r}; "
                f"choose from {EXPERIMENTS}")
        if self.replicates < 1:
            raise ConfigurationError(
                f"replicates must be >= 1, got {self.replicates}")

    def to_json_dict(self):
        return {
            "experiment": self.experiment, "problem": dict(self.problem),
            "graph": dict(self.graph), "solver": dict(self.solver),
            "params": dict(self.params), "replicates": self.replicates,
            "seed": self.seed, "out": self.out,
        }

    @classmethod
    def from_json_dict(cls, data):
        known = {"experiment", "problem", "graph", "solver", "params",
                 "replicates", "seed", "out"}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown spec fields {sorted(extra)}")
        return cls(**data)


class SummaryTable:
    """Aggregated sweep results: one row per parameter cell.

    Rows are plain dicts; the leading ``key_names`` columns identify the
    cell and the rest are metrics. Rows are sorted by key so the table
    is bit-reproducible regardless of execution order.
    """

    def __init__(self, key_names, rows):
        self.key_names = tuple(key_names)
        self.rows = sorted(rows, key=lambda r: tuple(r[k] for k in self.key_names))
        names = []
        for row in self.rows:
            for name in row:
                if name not in names:
                    names.append(name)
        self.columns = tuple(names)
        self.meta = {}

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    def subset(self, **keys):
        return [row for row in self.rows
                if all(row[k] == v for k, v in keys.items())]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_csv_cell(row.get(c, "")) for c in self.columns])

    def __len__(self):
        return len(self.rows)


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _derive_seed(*parts):
    ss = np.random.SeedSequence(list(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _problem_params(spec):
    merged = dict(DEFAULT_PROBLEM)
    merged.update(spec.problem)
    return merged


def _build_problem(spec):
    pp = _problem_params(spec)
    dataset = generate_classification(
        pp["num_agents"], pp["samples_per_agent"], pp["dim"],
        class_sep=pp["class_sep"], label_noise=pp["label_noise"],
        seed=_derive_seed(spec.seed, 11))
    return LogisticProblem(dataset, reg=pp["reg"],
                           normalization=pp["normalization"])


def _build_graph(spec, num_agents):
    cfg = dict(DEFAULT_GRAPH)
    cfg.update(spec.graph)
    if "path" in cfg:
        graph = Graph.load(cfg["path"])
        if graph.num_agents != num_agents:
            raise ConfigurationError(
                f"graph file has {graph.num_agents} agents, expected {num_agents}")
        return graph
    return generate_graph(cfg["kind"], num_agents,
                          edge_prob=cfg.get("edge_prob", 0.4),
                          seed=_derive_seed(spec.seed, 97))


def _auto_alpha(spec, problem):
    alpha = spec.solver.get("step_size", "auto")
    if alpha == "auto":
        lo, hi = problem.curvature()
        return 2.0 / (lo + hi)
    return float(alpha)


def _ftqc_config(spec, **overrides):
    kwargs = {
        "rho": spec.solver.get("rho", DEFAULT_RHO),
        "term_factor": spec.solver.get("term_factor", 1.0),
        "max_iters": spec.solver.get("ftqc_max_iters", 10000),
    }
    kwargs.update(overrides)
    return FtqcConfig(**kwargs)


def _random_targets(spec, replicate):
    """Vectors to average in the coordination-only experiments.

    Scaled well above the sparsifier threshold (0.1) so thresholding
    stays a perturbation, and far enough from consensus that even the
    coarsest levels need a non-trivial number of rounds.
    """
    pp = _problem_params(spec)
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, 1, replicate]))
    return 10.0 * rng.standard_normal((pp["num_agents"], pp["dim"]))


def run_ftqc_table(spec):
    """Consensus error and iteration count per quantization level.

    Defaults to the unit penalty; the gradient methods instead default
    to the swept optimum (see ``DEFAULT_RHO`` and ``run_rho_sweep``),
    which terminates too eagerly to profile the round counts.
    """
    pp = _problem_params(spec)
    graph = _build_graph(spec, pp["num_agents"])
    deltas = spec.params.get("deltas", list(np.logspace(-8, 0, 9)))
    rho = spec.solver.get("rho", TABLE_RHO)
    rows = []
    for delta in deltas:
        errs, iters = [], []
        for rep in range(spec.replicates):
            y = _random_targets(spec, rep)
            res = ftqc_run(y, graph, Quantizer("symmetric", delta=delta),
                           _ftqc_config(spec, rho=rho))
            errs.append(res.consensus_error)
            iters.append(res.iterations_used)
        e_mean, e_std = _mean_std(errs)
        i_mean, i_std = _mean_std(iters)
        rows.append({"delta": float(delta), "error_mean": e_mean,
                     "error_std": e_std, "iters_mean": i_mean,
                     "iters_std": i_std})
    return SummaryTable(("delta",), rows)


def run_rho_sweep(spec):
    """Consensus error and iterations over a (penalty, level) grid."""
    pp = _problem_params(spec)
    graph = _build_graph(spec, pp["num_agents"])
    rhos = spec.params.get("rhos", list(np.logspace(-2, 1, 13)))
    deltas = spec.params.get("deltas", [1e-4, 1e-2])
    rows = []
    for rho in rhos:
        for delta in deltas:
            errs, iters = [], []
            for rep in range(spec.replicates):
                y = _random_targets(spec, rep)
                res = ftqc_run(y, graph, Quantizer("symmetric", delta=delta),
                               _ftqc_config(spec, rho=rho))
                errs.append(res.consensus_error)
                iters.append(res.iterations_used)
            e_mean, e_std = _mean_std(errs)
            i_mean, i_std = _mean_std(iters)
            rows.append({"rho": float(rho), "delta": float(delta),
                         "error_mean": e_mean, "error_std": e_std,
                         "iters_mean": i_mean, "iters_std": i_std})
    table = SummaryTable(("rho", "delta"), rows)
    for delta in deltas:
        cells = table.subset(delta=float(delta))
        table.meta[("argmin_rho_error", float(delta))] = min(
            cells, key=lambda r: r["error_mean"])["rho"]
        table.meta[("argmin_rho_iters", float(delta))] = min(
            cells, key=lambda r: r["iters_mean"])["rho"]
    return table


def run_quantizer_table(spec):
    """Consensus error and iterations per quantizer kind at fixed level.

    The lattice kinds terminate at theta = c * delta; the sparsifier
    (threshold 0.1) and the identity have no lattice, so they use an
    explicit theta (the table's delta, and 1e-12 for the exact oracle
    row). Defaults to the unit penalty like :func:`run_ftqc_table`.
    """
    pp = _problem_params(spec)
    graph = _build_graph(spec, pp["num_agents"])
    delta = spec.params.get("delta", 1e-2)
    sp_theta = spec.params.get("sparsifier_theta", 0.1)
    rho = spec.solver.get("rho", TABLE_RHO)
    kinds = spec.params.get(
        "kinds", ["symmetric", "floor", "ceil", "sparsifier", "identity"])
    rows = []
    for kind in kinds:
        if kind == "sparsifier":
            q = Quantizer("sparsifier", theta=sp_theta)
            cfg = _ftqc_config(spec, rho=rho, theta=delta)
        elif kind == "identity":
            q = Quantizer("identity")
            cfg = _ftqc_config(spec, rho=rho, theta=1e-12)
        else:
            q = Quantizer(kind, delta=delta)
            cfg = _ftqc_config(spec, rho=rho)
        errs, iters = [], []
        for rep in range(spec.replicates):
            y = _random_targets(spec, rep)
            res = ftqc_run(y, graph, q, cfg)
            errs.append(res.consensus_error)
            iters.append(res.iterations_used)
        e_mean, e_std = _mean_std(errs)
        i_mean, i_std = _mean_std(iters)
        rows.append({"kind": kind, "error_mean": e_mean, "error_std": e_std,
                     "iters_mean": i_mean, "iters_std": i_std})
    return SummaryTable(("kind",), rows)


def _horizon(spec, delta):
    if "num_iters" in spec.params:
        return int(spec.params["num_iters"])
    return _DELTA_HORIZONS.get(float(delta), _FALLBACK_HORIZON)


def run_method_comparison(spec):
    """Gradient methods under matched communication budgets.

    ``delta_table``: the coordinated gradient method vs Near-DGD across
    quantization levels. ``method_comparison``: those two plus gradient
    tracking at a single level. The coordinated method keeps its
    edge state across outer steps (``warm_start`` param, default on
    here), so each step needs about one communication round. Near-DGD
    uses t = (mean coordination rounds per outer step) mixing rounds
    and a horizon chosen so its total communication matches; tracking
    exchanges two vectors per round, halving its horizon.

    Returns ``(records, table)``.
    """
    problem = _build_problem(spec)
    graph = _build_graph(spec, problem.num_agents)
    x_star = solve_centralized(problem).x_star
    alpha = _auto_alpha(spec, problem)
    if spec.experiment == "delta_table":
        deltas = spec.params.get("deltas", [1e-6, 1e-4, 1e-2])
        methods = ["alg2", "near_dgd"]
    else:
        deltas = spec.params.get("deltas", [1e-2])
        methods = spec.params.get("methods", ["alg2", "near_dgd", "dgt"])

    warm = bool(spec.params.get("warm_start", True))
    records, rows = {}, []
    for delta in deltas:
        horizon = _horizon(spec, delta)
        for rep in range(spec.replicates):
            seed = _derive_seed(spec.seed, 2, rep)
            quant = Quantizer("symmetric", delta=delta)
            cfg2 = SolverConfig(step_size=alpha, num_iters=horizon,
                                quantizer=quant, ftqc=_ftqc_config(spec),
                                seed=seed, warm_start=warm)
            rec2 = run_algorithm2(problem, graph, cfg2, x_star=x_star)
            budget = int(rec2.cum_comm_rounds[-1])
            t = max(1, round(budget / horizon))
            entries = [("alg2", rec2)]
            if "near_dgd" in methods:
                cfg_nd = SolverConfig(
                    step_size=alpha, num_iters=max(1, math.ceil(budget / t)),
                    quantizer=quant, comm_rounds=t, seed=seed)
                entries.append(
                    ("near_dgd", run_near_dgd(problem, graph, cfg_nd,
                                              x_star=x_star)))
            if "dgt" in methods:
                t_dgt = int(spec.params.get("dgt_comm_rounds", t))
                # tracking tolerates a smaller step than the plain
                # gradient loop; alpha itself sits at its stability edge
                alpha_gt = float(spec.params.get("dgt_step_size", alpha / 2))
                cfg_gt = SolverConfig(
                    step_size=alpha_gt,
                    num_iters=max(1, math.ceil(budget / (2 * t_dgt))),
                    quantizer=quant, comm_rounds=t_dgt, seed=seed)
                entries.append(
                    ("dgt", run_dgt(problem, graph, cfg_gt, x_star=x_star)))
            for method, rec in entries:
                records[f"{method}_delta{delta:g}_rep{rep}"] = rec
                rows.append({
                    "method": method, "delta": float(delta),
                    "replicate": rep, "plateau": rec.plateau(),
                    "final_err": float(rec.err[-1]),
                    "total_comm_rounds": int(rec.cum_comm_rounds[-1]),
                    "diverged": int(rec.diverged),
                    "ftqc_cap_hits": rec.ftqc_cap_hits,
                })
    return records, SummaryTable(("method", "delta", "replicate"), rows)


def run_batch_and_async_sweeps(spec):
    """Plateau vs batch size, and error-at-k vs activation probability.

    ``batch_sweep`` runs the stochastic-gradient sweep, ``async_sweep``
    the activation-probability sweep; both report the plateau and the
    error at a reference iteration, averaged over replicates.
    """
    problem = _build_problem(spec)
    graph = _build_graph(spec, problem.num_agents)
    x_star = solve_centralized(problem).x_star
    alpha = _auto_alpha(spec, problem)
    delta = spec.params.get("delta", 1e-4)
    k_ref = int(spec.params.get("k_ref", 100))
    quant = Quantizer("symmetric", delta=delta)

    cells = []
    if spec.experiment == "batch_sweep":
        horizon = int(spec.params.get("num_iters", 1000))
        for b in spec.params.get("batch_sizes", [1, 15, 75, 150]):
            cells.append(("batch", int(b), {"batch_size": int(b)}, horizon))
    else:
        horizon = int(spec.params.get("num_iters", max(150, k_ref + 50)))
        for p in spec.params.get("activations", [0.25, 0.5, 1.0]):
            cells.append(("async", float(p), {"activation": float(p)}, horizon))
    if k_ref >= horizon:
        raise ConfigurationError(
            f"k_ref={k_ref} outside the horizon {horizon}")

    rows = []
    for sweep, value, overrides, horizon in cells:
        plateaus, at_k = [], []
        for rep in range(spec.replicates):
            cfg = SolverConfig(step_size=alpha, num_iters=horizon,
                               quantizer=quant, ftqc=_ftqc_config(spec),
                               seed=_derive_seed(spec.seed, 3, rep),
                               **overrides)
            rec = run_algorithm2(problem, graph, cfg, x_star=x_star)
            plateaus.append(rec.plateau())
            at_k.append(float(rec.err[k_ref]))
        p_mean, p_std = _mean_std(plateaus)
        k_mean, k_std = _mean_std(at_k)
        rows.append({"sweep": sweep, "value": value,
                     "plateau_mean": p_mean, "plateau_std": p_std,
                     "err_at_k_mean": k_mean, "err_at_k_std": k_std})
    return SummaryTable(("sweep", "value"), rows)


def run_zoom_comparison(spec):
    """Zooming quantization vs fixed levels, error per comm round.

    Returns ``(records, table)`` with one zooming run (initial level
    1e-2, period 25, factor 0.1) and one fixed-level run per requested
    delta, all with full gradients and full activation.
    """
    problem = _build_problem(spec)
    graph = _build_graph(spec, problem.num_agents)
    x_star = solve_centralized(problem).x_star
    alpha = _auto_alpha(spec, problem)
    horizon = int(spec.params.get("num_iters", 6000))
    delta0 = spec.params.get("initial_delta", 1e-2)
    fixed = spec.params.get("fixed_deltas", [1e-2, 1e-3, 1e-4])
    period = int(spec.params.get("zoom_period", 25))
    factor = float(spec.params.get("zoom_factor", 0.1))

    records, rows = {}, []
    seed = _derive_seed(spec.seed, 4)
    cfg_zoom = SolverConfig(step_size=alpha, num_iters=horizon,
                            quantizer=Quantizer("symmetric", delta=delta0),
                            ftqc=_ftqc_config(spec), zoom_period=period,
                            zoom_factor=factor, seed=seed)
    rec = run_algorithm3(problem, graph, cfg_zoom, x_star=x_star)
    records["zoom"] = rec
    rows.append({"run": "zoom", "delta": float(delta0),
                 "final_err": float(rec.err[-1]), "plateau": rec.plateau(),
                 "total_comm_rounds": int(rec.cum_comm_rounds[-1])})
    for delta in fixed:
        cfg = SolverConfig(step_size=alpha, num_iters=horizon,
                           quantizer=Quantizer("symmetric", delta=delta),
                           ftqc=_ftqc_config(spec), seed=seed)
        rec = run_algorithm2(problem, graph, cfg, x_star=x_star)
        records[f"fixed_delta{delta:g}"] = rec
        rows.append({"run": f"fixed_{delta:g}", "delta": float(delta),
                     "final_err": float(rec.err[-1]), "plateau": rec.plateau(),
                     "total_comm_rounds": int(rec.cum_comm_rounds[-1])})
    return records, SummaryTable(("run",), rows)


def run_experiment(spec):
    """Dispatch an ExperimentSpec; returns {"table": ..., "records": ...}."""
    if spec.experiment == "ftqc_table":
        return {"table": run_ftqc_table(spec), "records": {}}
    if spec.experiment == "rho_delta_sweep":
        return {"table": run_rho_sweep(spec), "records": {}}
    if spec.experiment == "quantizer_table":
        return {"table": run_quantizer_table(spec), "records": {}}
    if spec.experiment in ("method_comparison", "delta_table"):
        records, table = run_method_comparison(spec)
        return {"table": table, "records": records}
    if spec.experiment in ("batch_sweep", "async_sweep"):
        return {"table": run_batch_and_async_sweeps(spec), "records": {}}
    records, table = run_zoom_comparison(spec)
    return {"table": table, "records": records}
