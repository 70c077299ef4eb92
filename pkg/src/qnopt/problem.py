"""Distributed finite-sum learning problems and the centralized oracle.

Each agent i holds a local cost; the network-wide objective is the sum
of the local costs. Two problem families are provided: regularized
logistic regression on synthetic two-cluster data,

    f_i(x) = s_i * sum_h log(1 + exp(-b_i^h a_i^h x)) + (eps/2) ||x||^2

with s_i = 1 (sum normalization, the default) or 1/m_i (mean), and a
quadratic fixture with closed-form minimizer used as a test oracle.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import ConfigurationError, ConvergenceError, NumericError

_SOLVE_CAP = 10 ** 6
_POWER_TOL = 1e-8
_POWER_CAP = 100_000


class Dataset:
    """Per-agent classification data.

    Parameters
    ----------
    features : sequence of ndarray
        One (m_i, n) array per agent.
    labels : sequence of ndarray
        One (m_i,) array per agent with entries in {-1, +1}.
    """

    def __init__(self, features, labels):
        if len(features) != len(labels) or len(features) == 0:
            raise ConfigurationError("features and labels must pair up per agent")
        self.features = [np.ascontiguousarray(a, dtype=np.float64) for a in features]
        self.labels = [np.ascontiguousarray(b, dtype=np.float64) for b in labels]
        dims = {a.shape[1] for a in self.features}
        if len(dims) != 1:
            raise ConfigurationError(f"inconsistent feature dimensions {dims}")
        for a, b in zip(self.features, self.labels):
            if a.shape[0] != b.shape[0]:
                raise ConfigurationError("feature/label counts differ")
            if not np.all(np.isin(b, (-1.0, 1.0))):
                raise ConfigurationError("labels must be -1 or +1")
        self.dim = self.features[0].shape[1]
        self.counts = np.array([a.shape[0] for a in self.features], dtype=np.int64)

    @property
    def num_agents(self):
        return len(self.features)

    def save(self, path):
        """One row per sample: agent_id, label, feature columns."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["agent_id", "label"]
                            + [f"f{c}" for c in range(self.dim)])
            for i in range(self.num_agents):
                for h in range(self.counts[i]):
                    writer.writerow([i, int(self.labels[i][h])]
                                    + [repr(float(v)) for v in self.features[i][h]])

    @classmethod
    def load(cls, path):
        rows = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                i = int(row[0])
                rows.setdefault(i, []).append(
                    (float(row[1]), [float(v) for v in row[2:]]))
        if sorted(rows) != list(range(len(rows))):
            raise ConfigurationError("agent ids must be contiguous from 0")
        features = [np.array([f for _, f in rows[i]]) for i in sorted(rows)]
        labels = [np.array([b for b, _ in rows[i]]) for i in sorted(rows)]
        return cls(features, labels)


def generate_classification(num_agents, samples_per_agent, dim, class_sep=2.0,
                            label_noise=0.0, seed=None):
    """Two Gaussian clusters at +-class_sep along a random unit direction.

    Labels follow the generating cluster, then each one is flipped
    independently with probability ``label_noise``.

    Parameters
    ----------
    num_agents, samples_per_agent, dim : int
    class_sep : float
        Distance of each cluster center from the origin.
    label_noise : float
        Flip probability in [0, 1].
    seed : int, optional

    Returns
    -------
    Dataset
    """
    if num_agents < 1 or samples_per_agent < 1 or dim < 1:
        raise ConfigurationError("num_agents, samples_per_agent, dim must be >= 1")
    if not 0 <= label_noise <= 1:
        raise ConfigurationError(f"label_noise must be in [0,1], got {label_noise}")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    features, labels = [], []
    for _ in range(num_agents):
        b = rng.integers(0, 2, size=samples_per_agent) * 2.0 - 1.0
        a = b[:, None] * class_sep * u + rng.standard_normal(
            (samples_per_agent, dim))
        flip = rng.random(samples_per_agent) < label_noise
        features.append(a)
        labels.append(np.where(flip, -b, b))
    return Dataset(features, labels)


def _check_x(x, dim):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dim,):
        raise ConfigurationError(f"x must have shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite entries in x")
    return x


class LogisticProblem:
    """Regularized logistic regression split across agents.

    Parameters
    ----------
    dataset : Dataset
    reg : float
        Regularization weight eps > 0 (each local cost carries its own
        (eps/2)||x||^2 term).
    normalization : {'sum', 'mean'}
        Whether the data term is the plain sum over local samples or is
        divided by m_i.
    """

    def __init__(self, dataset, reg=0.075, normalization="sum"):
        if not reg > 0:
            raise ConfigurationError(f"reg must be positive, got {reg}")
        if normalization not in ("sum", "mean"):
            raise ConfigurationError(
                f"normalization must be 'sum' or 'mean', got {normalization!r}")
        self.dataset = dataset
        self.reg = float(reg)
        self.normalization = normalization
        self.scales = (np.ones(dataset.num_agents) if normalization == "sum"
                       else 1.0 / dataset.counts)
        self._curvature = None

    @property
    def num_agents(self):
        return self.dataset.num_agents

    @property
    def dim(self):
        return self.dataset.dim

    def local_cost(self, i, x):
        x = _check_x(x, self.dim)
        t = self.dataset.labels[i] * (self.dataset.features[i] @ x)
        data = np.logaddexp(0.0, -t).sum()
        return self.scales[i] * data + 0.5 * self.reg * (x @ x)

    def local_gradient(self, i, x):
        x = _check_x(x, self.dim)
        a, b = self.dataset.features[i], self.dataset.labels[i]
        sig = expit(-b * (a @ x))
        return self.scales[i] * (a.T @ (-b * sig)) + self.reg * x

    def stochastic_gradient(self, i, x, batch_size=None, rng=None):
        """Mini-batch gradient, unbiased for the data term.

        Samples ``batch_size`` local points uniformly without
        replacement and rescales their summed gradient to the full data
        term; the regularizer is never subsampled. ``batch_size=None``
        means the full batch (exact gradient, no draws).
        """
        if batch_size is None:
            return self.local_gradient(i, x)
        x = _check_x(x, self.dim)
        m = int(self.dataset.counts[i])
        if not 1 <= batch_size <= m:
            raise ConfigurationError(
                f"batch_size must be in [1, {m}], got {batch_size}")
        idx = rng.choice(m, size=batch_size, replace=False)
        a = self.dataset.features[i][idx]
        b = self.dataset.labels[i][idx]
        sig = expit(-b * (a @ x))
        data = a.T @ (-b * sig)
        return self.scales[i] * (m / batch_size) * data + self.reg * x

    def local_hessian(self, i, x):
        x = _check_x(x, self.dim)
        a, b = self.dataset.features[i], self.dataset.labels[i]
        sig = expit(-b * (a @ x))
        weights = sig * (1.0 - sig)
        h = self.scales[i] * (a.T @ (a * weights[:, None]))
        return h + self.reg * np.eye(self.dim)

    def curvature(self):
        """(strong convexity, smoothness) bounds valid for every agent."""
        if self._curvature is None:
            top = 0.0
            for i in range(self.num_agents):
                gram_top = _power_iteration_gram(self.dataset.features[i])
                top = max(top, self.scales[i] * gram_top)
            self._curvature = (self.reg, self.reg + 0.25 * top)
        return self._curvature

    def total_cost(self, x):
        return sum(self.local_cost(i, x) for i in range(self.num_agents))

    def total_gradient(self, x):
        g = np.zeros(self.dim)
        for i in range(self.num_agents):
            g += self.local_gradient(i, x)
        return g

    def total_curvature(self):
        """(strong convexity, smoothness) of the summed objective."""
        stacked = np.vstack([s * a for s, a in
                             zip(np.sqrt(self.scales), self.dataset.features)])
        top = _power_iteration_gram(stacked)
        n = self.num_agents
        return n * self.reg, n * self.reg + 0.25 * top


class QuadraticProblem:
    """Weighted quadratics f_i(x) = (w_i/2) ||x - c_i||^2.

    The network objective has the closed-form minimizer
    sum_i w_i c_i / sum_i w_i, exposed as ``x_star_analytic``.
    """

    def __init__(self, centers, weights=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        if weights is None:
            weights = np.ones(centers.shape[0])
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (centers.shape[0],):
            raise ConfigurationError("one weight per center required")
        if not np.all(weights > 0):
            raise ConfigurationError("weights must be positive")
        self.centers = centers
        self.weights = weights
        self.x_star_analytic = (weights @ centers) / weights.sum()

    @property
    def num_agents(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def local_cost(self, i, x):
        x = _check_x(x, self.dim)
        d = x - self.centers[i]
        return 0.5 * self.weights[i] * (d @ d)

    def local_gradient(self, i, x):
        x = _check_x(x, self.dim)
        return self.weights[i] * (x - self.centers[i])

    def stochastic_gradient(self, i, x, batch_size=None, rng=None):
        return self.local_gradient(i, x)

    def local_hessian(self, i, x):
        return self.weights[i] * np.eye(self.dim)

    def curvature(self):
        return float(self.weights.min()), float(self.weights.max())

    def total_cost(self, x):
        return sum(self.local_cost(i, x) for i in range(self.num_agents))

    def total_gradient(self, x):
        x = _check_x(x, self.dim)
        return self.weights.sum() * x - self.weights @ self.centers

    def total_curvature(self):
        s = float(self.weights.sum())
        return s, s


def quadratic_fixture(centers, weights=None):
    """Quadratic test problem with analytic minimizer."""
    return QuadraticProblem(centers, weights)


def curvature_constants(problem):
    """Per-agent (strong convexity, smoothness) bounds."""
    return problem.curvature()


def _power_iteration_gram(a):
    """Largest eigenvalue of a^T a by power iteration (1e-8 relative)."""
    if a.shape[0] == 0:
        return 0.0
    rng = np.random.default_rng(0)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(_POWER_CAP):
        u = a.T @ (a @ v)
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return 0.0
        v = u / norm
        lam_new = v @ (a.T @ (a @ v))
        if abs(lam_new - lam) <= _POWER_TOL * max(lam_new, 1e-300):
            return float(lam_new)
        lam = lam_new
    raise ConvergenceError("power iteration did not converge")


@dataclass
class OracleSolution:
    """Centralized minimizer with its optimality certificate."""

    x_star: np.ndarray
    value: float
    grad_norm: float


def solve_centralized(problem, tol=1e-10):
    """Minimize the summed objective to a gradient-norm certificate.

    Nesterov-accelerated gradient descent for strongly convex smooth
    functions, run until ||grad F(x)|| <= tol.

    Parameters
    ----------
    problem : LogisticProblem or QuadraticProblem
    tol : float

    Returns
    -------
    OracleSolution
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    mu, lip = problem.total_curvature()
    q = mu / lip
    beta = (1.0 - np.sqrt(q)) / (1.0 + np.sqrt(q))
    x = np.zeros(problem.dim)
    x_prev = x.copy()
    for _ in range(_SOLVE_CAP):
        g = problem.total_gradient(x)
        if np.linalg.norm(g) <= tol:
            return OracleSolution(x, float(problem.total_cost(x)),
                                  float(np.linalg.norm(g)))
        y = x + beta * (x - x_prev)
        x_prev = x
        x = y - problem.total_gradient(y) / lip
    raise ConvergenceError(
        f"centralized solver missed tol={tol} within {_SOLVE_CAP} iterations")


def estimate_gradient_deviation(problem, batch_size, rng, num_points=10,
                                num_draws=20, radius=1.0):
    """Empirical bound on E||stochastic - exact gradient||.

    Samples points around the origin and returns the largest mean
    deviation over (agent, point) pairs; a measured stand-in for the
    bounded-deviation constant assumed by the step-size theory.
    """
    worst = 0.0
    for _ in range(num_points):
        x = radius * rng.standard_normal(problem.dim)
        for i in range(problem.num_agents):
            exact = problem.local_gradient(i, x)
            dev = 0.0
            for _ in range(num_draws):
                g = problem.stochastic_gradient(i, x, batch_size, rng)
                dev += np.linalg.norm(g - exact)
            worst = max(worst, dev / num_draws)
    return worst
