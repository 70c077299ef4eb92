"""Outer optimization loops built on the coordination scheme.

The main method alternates local (possibly stochastic, possibly
asynchronous) gradient steps with a finite-time quantized coordination
run that replaces the exact projection onto the consensus set:

    y_{i,k} = x_{i,k} - alpha * grad_i(x_{i,k})   if agent i is active
    y_{i,k} = y_{i,k-1}                           otherwise
    x_{k+1} = coordinate(y_k)

A zooming variant shrinks each agent's quantization level over time.
Two classical baselines communicate through a doubly stochastic mixing
matrix instead: nearest-neighbor averaging of gradient steps (multiple
mixing rounds per outer step) and gradient tracking, both with
quantized transmissions.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import ConfigurationError
from .ftqc import FtqcConfig, ftqc_run
from .network import metropolis_weights
from .problem import solve_centralized
from .quantize import Quantizer, per_agent_arrays

DIVERGENCE_LIMIT = 1e6


@dataclass
class SolverConfig:
    """Parameters shared by all outer loops.

    Parameters
    ----------
    step_size : float
        Gradient step alpha; must satisfy alpha < 2 / smoothness, which
        is checked against the problem when a run starts.
    num_iters : int
        Outer horizon K.
    quantizer : Quantizer or sequence of Quantizer
        Per-agent quantizers for all transmissions.
    ftqc : FtqcConfig, optional
        Inner coordination parameters (required by the gradient methods
        that use it, ignored by the mixing baselines).
    activation : float or array_like
        Per-agent activation probabilities p_i in (0, 1].
    batch_size : int, sequence, or None
        Mini-batch size B_i; None means full (exact) gradients.
    zoom_period : int, optional
        Activations between zoom checks (T >= 1).
    zoom_factor : float, optional
        Level shrink factor r in (0, 1).
    comm_rounds : int
        Mixing rounds t per outer step for the baselines.
    seed : int, optional
        Seeds every random stream of the run.
    x0 : ndarray, optional
        Initial iterates, default zero.
    warm_start : bool
        Reuse the previous coordination run's edge state as z0.
    """

    step_size: float
    num_iters: int
    quantizer: object
    ftqc: FtqcConfig = None
    activation: object = 1.0
    batch_size: object = None
    zoom_period: int = None
    zoom_factor: float = None
    comm_rounds: int = 1
    seed: int = None
    x0: object = None
    warm_start: bool = False

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigurationError(
                f"step_size must be positive, got {self.step_size}")
        if self.num_iters < 1:
            raise ConfigurationError(
                f"num_iters must be >= 1, got {self.num_iters}")
        if self.zoom_period is not None and self.zoom_period < 1:
            raise ConfigurationError(
                f"zoom_period must be >= 1, got {self.zoom_period}")
        if self.zoom_factor is not None and not 0 < self.zoom_factor < 1:
            raise ConfigurationError(
                f"zoom_factor must be in (0, 1), got {self.zoom_factor}")
        if self.comm_rounds < 1:
            raise ConfigurationError(
                f"comm_rounds must be >= 1, got {self.comm_rounds}")


@dataclass
class RunRecord:
    """Per-iteration trajectory of one run.

    Row k describes the iterate x_k: distance to the stacked optimum,
    consensus spread, communication rounds consumed so far, the largest
    per-agent quantization level, and the projection/gradient error
    norms of the step that produced x_k (zero at k=0).
    """

    k: np.ndarray
    err: np.ndarray
    spread: np.ndarray
    cum_comm_rounds: np.ndarray
    deltas: np.ndarray
    e_p_norm: np.ndarray
    e_g_norm: np.ndarray
    x_final: np.ndarray
    x_star: np.ndarray
    diverged: bool = False
    ftqc_cap_hits: int = 0

    @property
    def delta_max(self):
        return self.deltas.max(axis=1)

    def plateau(self, fraction=0.1):
        """Mean distance to the optimum over the last ``fraction`` of rows."""
        tail = max(1, int(np.ceil(fraction * len(self.err))))
        return float(self.err[-tail:].mean())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "err", "spread", "cum_comm_rounds",
                             "delta_max", "e_p_norm", "e_g_norm"])
            dmax = self.delta_max
            for r in range(len(self.k)):
                writer.writerow([
                    int(self.k[r]), repr(float(self.err[r])),
                    repr(float(self.spread[r])),
                    int(self.cum_comm_rounds[r]), repr(float(dmax[r])),
                    repr(float(self.e_p_norm[r])),
                    repr(float(self.e_g_norm[r])),
                ])


def theoretical_constants(problem, config):
    """Contraction factors (zeta, chi) of the inexact projected method.

    zeta = max{|1 - alpha * lo|, |1 - alpha * hi|} over the per-agent
    curvature bounds, and chi = sqrt(1 - (1 - zeta^2) min_i p_i).
    Raises when the step size is too large (zeta >= 1).
    """
    lo, hi = problem.curvature()
    alpha = config.step_size
    zeta = max(abs(1.0 - alpha * lo), abs(1.0 - alpha * hi))
    if zeta >= 1.0:
        raise ConfigurationError(
            f"step_size {alpha} gives no contraction (needs < {2.0 / hi})")
    pmin = float(np.min(config.activation))
    if not 0 < pmin <= 1:
        raise ConfigurationError(
            f"activation probabilities must be in (0, 1], got {config.activation}")
    chi = float(np.sqrt(1.0 - (1.0 - zeta ** 2) * pmin))
    return float(zeta), chi


def _resolve_probs(activation, num_agents):
    probs = np.broadcast_to(
        np.asarray(activation, dtype=np.float64), (num_agents,)).copy()
    if not np.all((probs > 0) & (probs <= 1)):
        raise ConfigurationError(
            f"activation probabilities must be in (0, 1], got {activation}")
    return probs


def _resolve_batches(batch_size, num_agents):
    if batch_size is None:
        return [None] * num_agents
    if np.isscalar(batch_size):
        return [int(batch_size)] * num_agents
    batches = [None if b is None else int(b) for b in batch_size]
    if len(batches) != num_agents:
        raise ConfigurationError(
            f"expected {num_agents} batch sizes, got {len(batches)}")
    return batches


def _quantizer_list(quantizer, num_agents):
    if isinstance(quantizer, Quantizer):
        return [quantizer] * num_agents
    qs = list(quantizer)
    if len(qs) != num_agents:
        raise ConfigurationError(
            f"expected {num_agents} quantizers, got {len(qs)}")
    return qs


def _initial_x(config, num_agents, dim):
    if config.x0 is None:
        return np.zeros((num_agents, dim))
    x0 = np.array(config.x0, dtype=np.float64)
    if x0.shape != (num_agents, dim):
        raise ConfigurationError(
            f"x0 must have shape ({num_agents}, {dim}), got {x0.shape}")
    return x0


def _spread(x):
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2).max()))


def _oracle(problem, x_star):
    if x_star is not None:
        return np.asarray(x_star, dtype=np.float64)
    return solve_centralized(problem).x_star


def _rng_streams(seed, num_agents):
    act = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    batch = [np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(2, i)))
        for i in range(num_agents)]
    inner = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    return act, batch, inner


def run_algorithm2(problem, graph, config, x_star=None):
    """Asynchronous stochastic gradient method with quantized coordination.

    Parameters
    ----------
    problem : LogisticProblem or QuadraticProblem
    graph : Graph
    config : SolverConfig
        ``config.ftqc`` is required.
    x_star : ndarray, optional
        Precomputed centralized minimizer; solved to 1e-10 if omitted.

    Returns
    -------
    RunRecord
    """
    return _run_coordinated(problem, graph, config, x_star, zooming=False)


def run_algorithm3(problem, graph, config, x_star=None):
    """Zooming variant: per-agent levels shrink as iterates stall.

    Each agent counts its own activations; after ``zoom_period`` of them,
    if its iterate moved by at most its current level Delta_i, it sets
    Delta_i <- zoom_factor * Delta_i and restarts the count. Levels take
    effect at the next coordination run.
    """
    if config.zoom_period is None or config.zoom_factor is None:
        raise ConfigurationError(
            "zooming requires zoom_period and zoom_factor")
    return _run_coordinated(problem, graph, config, x_star, zooming=True)


def _run_coordinated(problem, graph, config, x_star, zooming):
    if config.ftqc is None:
        raise ConfigurationError("this method requires config.ftqc")
    zeta, _ = theoretical_constants(problem, config)  # validates step size
    num_agents, dim = graph.num_agents, problem.dim
    if problem.num_agents != num_agents:
        raise ConfigurationError("problem and graph disagree on num_agents")
    probs = _resolve_probs(config.activation, num_agents)
    batches = _resolve_batches(config.batch_size, num_agents)
    quantizers = _quantizer_list(config.quantizer, num_agents)
    _, deltas_now, _ = per_agent_arrays(quantizers, num_agents)
    if zooming and any(q.kind not in ("symmetric", "floor", "ceil")
                       for q in quantizers):
        raise ConfigurationError("zooming needs lattice quantizers")

    x_star = _oracle(problem, x_star)
    rng_act, rng_batch, rng_inner = _rng_streams(config.seed, num_agents)
    alpha = config.step_size
    all_sync = float(probs.min()) >= 1.0

    x = _initial_x(config, num_agents, dim)
    y = x.copy()
    zoom_counts = np.zeros(num_agents, dtype=np.int64)
    z_prev = None

    steps = config.num_iters
    err = np.empty(steps + 1)
    spread = np.empty(steps + 1)
    cum = np.zeros(steps + 1, dtype=np.int64)
    deltas = np.empty((steps + 1, num_agents))
    e_p = np.zeros(steps + 1)
    e_g = np.zeros(steps + 1)
    err[0] = np.linalg.norm(x - x_star)
    spread[0] = _spread(x)
    deltas[0] = deltas_now
    cap_hits = 0

    for k in range(steps):
        active = (np.ones(num_agents, dtype=bool) if all_sync
                  else rng_act.random(num_agents) < probs)
        grad_gap = np.zeros(dim)
        for i in np.flatnonzero(active):
            g = problem.stochastic_gradient(i, x[i], batches[i], rng_batch[i])
            y[i] = x[i] - alpha * g
            if batches[i] is not None:
                grad_gap += g - problem.local_gradient(i, x[i])

        if zooming:
            quantizers = [Quantizer(q.kind, delta=d)
                          for q, d in zip(quantizers, deltas_now)]
        res = ftqc_run(y, graph, quantizers, config.ftqc,
                       z0=z_prev, rng=rng_inner)
        if config.warm_start:
            z_prev = res.state.z
        if not res.terminated_naturally:
            cap_hits += 1
        x_new = res.w_final

        if zooming:
            moved = np.linalg.norm(x_new - x, axis=1)
            zoom_counts[active] += 1
            hit = (zoom_counts >= config.zoom_period) & (moved <= deltas_now)
            deltas_now = np.where(hit, config.zoom_factor * deltas_now,
                                  deltas_now)
            zoom_counts[hit] = 0

        err[k + 1] = np.linalg.norm(x_new - x_star)
        spread[k + 1] = _spread(x_new)
        cum[k + 1] = cum[k] + res.iterations_used
        deltas[k + 1] = deltas_now
        e_p[k + 1] = np.linalg.norm(x_new - y.mean(axis=0))
        # projection difference due to stochastic gradients, stacked
        e_g[k + 1] = alpha * np.linalg.norm(grad_gap) / np.sqrt(num_agents)
        x = x_new

    return RunRecord(np.arange(steps + 1), err, spread, cum, deltas, e_p,
                     e_g, x, x_star, diverged=False, ftqc_cap_hits=cap_hits)


def _mixing_setup(problem, graph, config):
    zeta, _ = theoretical_constants(problem, config)
    num_agents, dim = graph.num_agents, problem.dim
    if problem.num_agents != num_agents:
        raise ConfigurationError("problem and graph disagree on num_agents")
    quantizers = _quantizer_list(config.quantizer, num_agents)
    kinds, deltas_arr, sp_thetas = per_agent_arrays(quantizers, num_agents)
    weights = metropolis_weights(graph)
    edge_dst, edge_ptr, _ = graph.directed_index()
    return num_agents, dim, kinds, deltas_arr, sp_thetas, weights, edge_dst, edge_ptr


def run_near_dgd(problem, graph, config, x_star=None):
    """Gradient step followed by t rounds of quantized mixing.

    x_{k+1} = W^t (x_k - alpha * grad f(x_k)), each transmitted vector
    quantized (the agent's own W_ii term is not transmitted, hence
    exact). Counts t communication rounds per outer step.
    """
    (num_agents, dim, kinds, deltas_arr, sp_thetas, weights, edge_dst,
     edge_ptr) = _mixing_setup(problem, graph, config)
    x_star = _oracle(problem, x_star)
    x = _initial_x(config, num_agents, dim)
    alpha = config.step_size
    t = config.comm_rounds
    impl = kernels.impl()

    steps = config.num_iters
    err = np.empty(steps + 1)
    spread = np.empty(steps + 1)
    cum = np.zeros(steps + 1, dtype=np.int64)
    err[0] = np.linalg.norm(x - x_star)
    spread[0] = _spread(x)

    for k in range(steps):
        v = np.empty_like(x)
        for i in range(num_agents):
            v[i] = x[i] - alpha * problem.local_gradient(i, x[i])
        impl.mixing_rounds(v, weights, edge_dst, edge_ptr, kinds, deltas_arr,
                           sp_thetas, t)
        x = v
        err[k + 1] = np.linalg.norm(x - x_star)
        spread[k + 1] = _spread(x)
        cum[k + 1] = cum[k] + t

    deltas = np.tile(deltas_arr, (steps + 1, 1))
    zeros = np.zeros(steps + 1)
    return RunRecord(np.arange(steps + 1), err, spread, cum, deltas, zeros,
                     zeros.copy(), x, x_star)


def run_dgt(problem, graph, config, x_star=None):
    """Gradient tracking with quantized mixing of both iterates.

    x <- W^t(x) - alpha * s;  s <- W^t(s) + grad f(x_new) - grad f(x_old)
    with s_0 = grad f(x_0). Both exchanged variables are quantized, so
    each outer step costs 2t communication rounds. The run is truncated
    with ``diverged=True`` when the distance to the optimum leaves
    [0, 1e6], which coarse quantization is known to trigger.
    """
    (num_agents, dim, kinds, deltas_arr, sp_thetas, weights, edge_dst,
     edge_ptr) = _mixing_setup(problem, graph, config)
    x_star = _oracle(problem, x_star)
    x = _initial_x(config, num_agents, dim)
    alpha = config.step_size
    t = config.comm_rounds
    impl = kernels.impl()

    grad_old = np.empty((num_agents, dim))
    for i in range(num_agents):
        grad_old[i] = problem.local_gradient(i, x[i])
    s = grad_old.copy()

    steps = config.num_iters
    err = np.empty(steps + 1)
    spread = np.empty(steps + 1)
    cum = np.zeros(steps + 1, dtype=np.int64)
    err[0] = np.linalg.norm(x - x_star)
    spread[0] = _spread(x)
    diverged = False
    last = steps

    for k in range(steps):
        x_new = x.copy()
        impl.mixing_rounds(x_new, weights, edge_dst, edge_ptr, kinds,
                           deltas_arr, sp_thetas, t)
        x_new -= alpha * s
        x = x_new
        err[k + 1] = np.linalg.norm(x - x_star)
        spread[k + 1] = _spread(x)
        cum[k + 1] = cum[k] + 2 * t
        if not err[k + 1] < DIVERGENCE_LIMIT:
            diverged = True
            last = k + 1
            break
        impl.mixing_rounds(s, weights, edge_dst, edge_ptr, kinds, deltas_arr,
                           sp_thetas, t)
        for i in range(num_agents):
            g = problem.local_gradient(i, x_new[i])
            s[i] += g - grad_old[i]
            grad_old[i] = g

    sl = slice(0, last + 1)
    deltas = np.tile(deltas_arr, (last + 1, 1))
    zeros = np.zeros(last + 1)
    return RunRecord(np.arange(last + 1), err[sl], spread[sl], cum[sl],
                     deltas, zeros, zeros.copy(), x, x_star,
                     diverged=diverged)
