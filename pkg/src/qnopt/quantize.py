"""Quantizers applied to every transmitted message.

Four lossy variants plus an exact identity used as the zero-level oracle:

* ``symmetric`` -- round to the nearest lattice point, ties away from zero
* ``floor`` / ``ceil`` -- one-sided lattice rounding
* ``sparsifier`` -- zero out components with magnitude below a threshold
* ``identity`` -- no distortion
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, NumericError

KINDS = ("symmetric", "floor", "ceil", "sparsifier", "identity")

# integer codes shared with the round kernels
KIND_CODES = {"identity": 0, "symmetric": 1, "floor": 2, "ceil": 3, "sparsifier": 4}


@dataclass(frozen=True)
class Quantizer:
    """A componentwise quantization map.

    Parameters
    ----------
    kind : str
        One of ``symmetric``, ``floor``, ``ceil``, ``sparsifier``,
        ``identity``.
    delta : float, optional
        Lattice spacing; required (positive) for the lattice kinds.
    theta : float, optional
        Sparsifier threshold; required (nonnegative) for ``sparsifier``.
    """

    kind: str
    delta: float = None
    theta: float = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown quantizer kind {self.kind!r}")
        if self.kind in ("symmetric", "floor", "ceil"):
            if self.delta is None or not self.delta > 0:
                raise ConfigurationError(
                    f"{self.kind} quantizer needs a positive delta, got {self.delta}")
        if self.kind == "sparsifier":
            if self.theta is None or self.theta < 0:
                raise ConfigurationError(
                    f"sparsifier needs a nonnegative theta, got {self.theta}")

    def __call__(self, x):
        return quantize(self, x)

    @classmethod
    def from_config(cls, cfg):
        """Build from a ``{kind, delta?, theta?}`` mapping."""
        return cls(cfg["kind"], cfg.get("delta"), cfg.get("theta"))

    def to_config(self):
        cfg = {"kind": self.kind}
        if self.delta is not None:
            cfg["delta"] = self.delta
        if self.theta is not None:
            cfg["theta"] = self.theta
        return cfg


def quantize(q, x):
    """Apply the quantizer componentwise.

    Parameters
    ----------
    q : Quantizer
    x : array_like
        Finite values.

    Returns
    -------
    ndarray
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("quantize: input contains non-finite values")
    if q.kind == "identity":
        return x.copy()
    if q.kind == "sparsifier":
        return np.where(np.abs(x) < q.theta, 0.0, x)
    v = x / q.delta
    if q.kind == "symmetric":
        # round half away from zero; np.round would round half to even
        return q.delta * np.trunc(v + np.copysign(0.5, v))
    if q.kind == "floor":
        return q.delta * np.floor(v)
    return q.delta * np.ceil(v)


def max_error(q):
    """Worst-case per-component error ``|q(x) - x|``.

    Delta/2 for the symmetric quantizer, Delta for floor and ceil, 0 for
    the identity. The sparsifier's error is input dependent (bounded by
    its threshold), so it is rejected here; the bound is reported on the
    raised error as ``input_dependent_bound``.
    """
    if q.kind == "symmetric":
        return q.delta / 2.0
    if q.kind in ("floor", "ceil"):
        return q.delta
    if q.kind == "identity":
        return 0.0
    err = ConfigurationError(
        f"max_error is input-dependent for the sparsifier (bounded by {q.theta})")
    err.input_dependent_bound = q.theta
    raise err


def per_agent_arrays(quantizers, num_agents):
    """Expand a quantizer (or per-agent list) into kernel-ready arrays.

    Returns ``(kinds, deltas, thetas)`` with one entry per agent; absent
    parameters are encoded as 0.
    """
    if isinstance(quantizers, Quantizer):
        quantizers = [quantizers] * num_agents
    if len(quantizers) != num_agents:
        raise ConfigurationError(
            f"expected {num_agents} quantizers, got {len(quantizers)}")
    kinds = np.array([KIND_CODES[q.kind] for q in quantizers], dtype=np.int64)
    deltas = np.array([q.delta if q.delta is not None else 0.0 for q in quantizers])
    thetas = np.array([q.theta if q.theta is not None else 0.0 for q in quantizers])
    return kinds, deltas, thetas
