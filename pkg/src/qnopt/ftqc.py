"""Finite-time quantized coordination over a peer-to-peer network.

The scheme is a consensus ADMM recursion in which every exchanged
message is quantized. Each agent i keeps one auxiliary vector z_ij per
neighbor j and repeats synchronous rounds of

    w_i = (y_i + sum_j z_ij) / (1 + rho |N_i|)
    transmit t_ij = q(-z_ij + 2 rho w_i) to each neighbor j
    z_ij <- (z_ij + t_ji) / 2

until the per-edge updates fall below a threshold theta, after which it
stops transmitting. Neighbors treat the missing messages as "no update",
so termination spreads monotonically and the w_i freeze at lattice
fixpoints a bounded distance from the exact average of the y_i.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import ConfigurationError, NumericError
from .quantize import per_agent_arrays

# uniform draws are generated in chunks of this many rounds when the
# activation probability is below one (fixed so runs stay reproducible)
_CHUNK = 256

_NO_UNIFORMS = np.empty((0, 0))


@dataclass
class FtqcConfig:
    """Parameters of the coordination scheme.

    Parameters
    ----------
    rho : float
        ADMM penalty, > 0.
    term_factor : float
        Termination threshold factor c >= 1; theta_i = c * delta_i.
    theta : float, optional
        Explicit termination threshold, overriding ``term_factor``.
        Required for quantizers with no lattice spacing (identity,
        sparsifier).
    max_iters : int
        Safety cap on the number of rounds.
    activation : float or array_like
        Per-round probability that an agent participates, in (0, 1].
        Scalar or one value per agent; 1 means fully synchronous.
    """

    rho: float
    term_factor: float = 1.0
    theta: float = None
    max_iters: int = 10000
    activation: object = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if not self.term_factor >= 1:
            raise ConfigurationError(
                f"term_factor must be >= 1, got {self.term_factor}")
        if self.theta is not None and not self.theta >= 0:
            raise ConfigurationError(f"theta must be >= 0, got {self.theta}")
        if self.max_iters < 1:
            raise ConfigurationError(
                f"max_iters must be >= 1, got {self.max_iters}")


class FtqcState:
    """Mutable per-run state: edge vectors, termination flags, counters.

    Built by :func:`ftqc_run`; exposed so callers can inspect the final
    state or advance it manually with :func:`step_round`.
    """

    def __init__(self, graph, y, quantizers, config, z0=None):
        y = np.ascontiguousarray(y, dtype=np.float64)
        if y.ndim != 2 or y.shape[0] != graph.num_agents:
            raise ConfigurationError(
                f"y must be (num_agents, dim), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise NumericError("ftqc: non-finite entries in y")
        num_agents = graph.num_agents
        kinds, deltas, sp_thetas = per_agent_arrays(quantizers, num_agents)
        edge_dst, edge_ptr, edge_rev = graph.directed_index()
        if z0 is None:
            z = np.zeros((edge_dst.shape[0], y.shape[1]))
        else:
            z = np.array(z0, dtype=np.float64, order="C")
            if z.shape != (edge_dst.shape[0], y.shape[1]):
                raise ConfigurationError(
                    f"z0 must be (num_directed_edges, dim), got {z.shape}")
            if not np.all(np.isfinite(z)):
                raise NumericError("ftqc: non-finite entries in z0")

        self.graph = graph
        self.config = config
        self.y = y
        self.ybar = y.mean(axis=0)
        self.z = z
        self.rho = float(config.rho)
        self.kinds = kinds
        self.deltas = deltas
        self.sp_thetas = sp_thetas
        self.term_thetas = _resolve_term_thetas(config, kinds, deltas)
        self.probs = _resolve_probs(config.activation, num_agents)
        self.edge_dst = edge_dst
        self.edge_ptr = edge_ptr
        self.edge_rev = edge_rev
        self.degrees = graph.degrees
        self.terminated = np.zeros(num_agents, dtype=np.uint8)
        self.iteration = 0

    def w(self):
        """Per-agent averages implied by the current edge state."""
        return kernels.impl().compute_w(
            self.y, self.z, self.edge_ptr, self.rho, self.degrees)

    def all_terminated(self):
        return bool(self.terminated.all())


@dataclass
class FtqcResult:
    """Outcome of a coordination run.

    ``consensus_error`` is max_i ||w_i - mean(y)|| at the final state;
    the ``per_round_*`` arrays are diagnostics recorded every round
    (consensus uses the w values at the start of the round).
    """

    w_final: np.ndarray
    iterations_used: int
    terminated_naturally: bool
    consensus_error: float
    per_round_noise: np.ndarray
    per_round_consensus: np.ndarray
    per_round_terminated: np.ndarray
    state: FtqcState = field(repr=False)


def _resolve_term_thetas(config, kinds, deltas):
    num_agents = kinds.shape[0]
    if config.theta is not None:
        return np.full(num_agents, float(config.theta))
    # theta_i = c * delta_i only makes sense for lattice quantizers
    lattice = (kinds >= 1) & (kinds <= 3)
    if not lattice.all():
        raise ConfigurationError(
            "identity and sparsifier quantizers need an explicit theta")
    return config.term_factor * deltas


def _resolve_probs(activation, num_agents):
    probs = np.broadcast_to(
        np.asarray(activation, dtype=np.float64), (num_agents,)).copy()
    if not np.all((probs > 0) & (probs <= 1)):
        raise ConfigurationError(
            f"activation probabilities must lie in (0, 1], got {activation}")
    return probs


def ftqc_run(y, graph, quantizers, config, z0=None, rng=None):
    """Run the coordination scheme until termination or the round cap.

    Parameters
    ----------
    y : ndarray of shape (num_agents, dim)
        Vectors to average.
    graph : Graph
    quantizers : Quantizer or sequence of Quantizer
        Applied by each agent to its outgoing messages.
    config : FtqcConfig
    z0 : ndarray, optional
        Initial per-directed-edge state, defaults to zero.
    rng : numpy.random.Generator, optional
        Consumed only when activation < 1; a fresh unseeded generator is
        used if omitted.

    Returns
    -------
    FtqcResult
    """
    state = FtqcState(graph, y, quantizers, config, z0=z0)
    num_agents = graph.num_agents
    if num_agents == 1:
        empty = np.empty(0)
        state.terminated[:] = 1
        return FtqcResult(state.y.copy(), 0, True, 0.0, empty, empty.copy(),
                          np.empty(0, dtype=np.int64), state)

    impl = kernels.impl()
    all_active = float(state.probs.min()) >= 1.0
    if not all_active and rng is None:
        rng = np.random.default_rng()

    noise_parts, cons_parts, nterm_parts = [], [], []
    natural = False
    while state.iteration < config.max_iters:
        todo = config.max_iters - state.iteration
        if all_active:
            chunk, uniforms = todo, _NO_UNIFORMS
        else:
            chunk = min(todo, _CHUNK)
            uniforms = rng.random((chunk, num_agents))
        noise = np.empty(chunk)
        cons = np.empty(chunk)
        nterm = np.empty(chunk, dtype=np.int64)
        done, all_term = impl.ftqc_rounds(
            state.y, state.ybar, state.z, state.edge_dst, state.edge_ptr,
            state.edge_rev, state.rho, state.kinds, state.deltas,
            state.sp_thetas, state.term_thetas, state.probs, uniforms,
            state.terminated, chunk, noise, cons, nterm)
        state.iteration += done
        noise_parts.append(noise[:done])
        cons_parts.append(cons[:done])
        nterm_parts.append(nterm[:done])
        if all_term:
            natural = True
            break

    w = impl.compute_w(state.y, state.z, state.edge_ptr, state.rho,
                       state.degrees)
    dev = w - state.ybar
    consensus_error = float(np.sqrt(np.max(np.sum(dev * dev, axis=1))))
    return FtqcResult(
        w_final=w,
        iterations_used=state.iteration,
        terminated_naturally=natural,
        consensus_error=consensus_error,
        per_round_noise=np.concatenate(noise_parts),
        per_round_consensus=np.concatenate(cons_parts),
        per_round_terminated=np.concatenate(nterm_parts),
        state=state,
    )


def step_round(state, rng=None):
    """Advance the state by one synchronous round, honoring flags.

    On a fully terminated state this is a no-op round (nobody
    transmits), which is how the finite-time fixpoint is exercised.
    Returns the round diagnostics.
    """
    num_agents = state.y.shape[0]
    if float(state.probs.min()) >= 1.0:
        uniforms = _NO_UNIFORMS
    else:
        if rng is None:
            rng = np.random.default_rng()
        uniforms = rng.random((1, num_agents))
    noise = np.empty(1)
    cons = np.empty(1)
    nterm = np.empty(1, dtype=np.int64)
    kernels.impl().ftqc_rounds(
        state.y, state.ybar, state.z, state.edge_dst, state.edge_ptr,
        state.edge_rev, state.rho, state.kinds, state.deltas,
        state.sp_thetas, state.term_thetas, state.probs, uniforms,
        state.terminated, 1, noise, cons, nterm)
    state.iteration += 1
    return {
        "noise_norm": float(noise[0]),
        "max_consensus_error": float(cons[0]),
        "num_terminated": int(nterm[0]),
        "all_terminated": state.all_terminated(),
    }


def noise_bound(graph, dim, delta):
    """Worst-case per-round quantization noise for the symmetric kind.

    ||e|| <= (delta/2) * sqrt(dim * sum_i |N_i|); with heterogeneous
    levels the largest one is used.

    Parameters
    ----------
    graph : Graph
    dim : int
        Dimension of the averaged vectors.
    delta : float or array_like
        Quantization level(s).

    Returns
    -------
    float
    """
    dmax = float(np.max(delta))
    if dmax < 0:
        raise ConfigurationError(f"delta must be >= 0, got {dmax}")
    return 0.5 * dmax * np.sqrt(dim * float(graph.degrees.sum()))


def lemma1_error_bound(contraction_coeff, contraction_rate, initial_distance,
                       delta, graph, dim, iteration):
    """Distance-to-average bound after a number of rounds.

    Evaluates C * (mu^l * d0 + eps * (1 - mu^l) / (1 - mu)) with eps the
    per-round noise bound. The constants C, mu, d0 are not derived here;
    fit them empirically when using this as a diagnostic overlay.

    Parameters
    ----------
    contraction_coeff : float
        C > 0.
    contraction_rate : float
        mu in (0, 1).
    initial_distance : float
        d0 >= 0, distance of the initial edge state from its fixpoint.
    delta : float or array_like
        Quantization level(s).
    graph : Graph
    dim : int
    iteration : int
        Round count l >= 0.

    Returns
    -------
    float
    """
    if not contraction_coeff > 0:
        raise ConfigurationError(
            f"contraction_coeff must be > 0, got {contraction_coeff}")
    if not 0 < contraction_rate < 1:
        raise ConfigurationError(
            f"contraction_rate must be in (0, 1), got {contraction_rate}")
    if initial_distance < 0:
        raise ConfigurationError(
            f"initial_distance must be >= 0, got {initial_distance}")
    if iteration < 0:
        raise ConfigurationError(f"iteration must be >= 0, got {iteration}")
    eps = noise_bound(graph, dim, delta)
    decay = contraction_rate ** iteration
    geom = (1.0 - decay) / (1.0 - contraction_rate)
    return contraction_coeff * (decay * initial_distance + eps * geom)


def write_round_log(path, result):
    """Dump per-round diagnostics as CSV.

    Columns: round, max_consensus_error, noise_norm, num_terminated.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["round", "max_consensus_error", "noise_norm", "num_terminated"])
        for rnd in range(result.iterations_used):
            writer.writerow([
                rnd,
                repr(float(result.per_round_consensus[rnd])),
                repr(float(result.per_round_noise[rnd])),
                int(result.per_round_terminated[rnd]),
            ])
