"""Pure-numpy round kernels (fallback backend).

Implements the same synchronous-round semantics as the compiled core,
with matching operation order so both backends produce identical states.
Per-agent accumulations run in edge order; everything else is
elementwise and therefore order independent.
"""

import numpy as np

BACKEND_NAME = "python"

# quantizer kind codes, kept in sync with qnopt.quantize.KIND_CODES
_IDENTITY, _SYMMETRIC, _FLOOR, _CEIL, _SPARSIFIER = 0, 1, 2, 3, 4


def _quant_block(x, kind, delta, theta):
    """Componentwise quantization of a block of messages."""
    if kind == _IDENTITY:
        return x
    if kind == _SPARSIFIER:
        return np.where(np.abs(x) < theta, 0.0, x)
    v = x / delta
    if kind == _SYMMETRIC:
        return delta * np.trunc(v + np.copysign(0.5, v))
    if kind == _FLOOR:
        return delta * np.floor(v)
    return delta * np.ceil(v)


def compute_w(y, z, edge_ptr, rho, degrees):
    """Per-agent averages w_i = (y_i + sum_j z_ij) / (1 + rho * |N_i|)."""
    num_agents = y.shape[0]
    w = np.empty_like(y)
    for i in range(num_agents):
        acc = y[i].copy()
        for e in range(edge_ptr[i], edge_ptr[i + 1]):
            acc += z[e]
        w[i] = acc / (1.0 + rho * degrees[i])
    return w


def ftqc_rounds(y, ybar, z, edge_dst, edge_ptr, edge_rev, rho,
                kinds, deltas, sp_thetas, term_thetas,
                probs, uniforms, terminated, max_rounds,
                noise_out, consensus_out, nterm_out):
    """Run up to ``max_rounds`` synchronous coordination rounds in place.

    Each round: active non-terminated agents compute their w_i and send
    one quantized message per outgoing edge; active receivers halve
    their edge state toward the received message; an agent terminates
    once every incoming edge either comes from a terminated sender or
    was updated this round by no more than its threshold.

    Mutates ``z`` and ``terminated``; fills the per-round diagnostic
    buffers. Returns ``(rounds_done, all_terminated)``.
    """
    num_agents = y.shape[0]
    degrees = np.diff(edge_ptr)
    have_uniforms = uniforms.size > 0
    term_sq = np.repeat(term_thetas, degrees) ** 2
    # shared uint8 buffer (kept compatible with the compiled backend)
    terminated = terminated.view(bool)

    for rnd in range(max_rounds):
        if have_uniforms:
            active = uniforms[rnd] < probs
        else:
            active = np.ones(num_agents, dtype=bool)

        w = compute_w(y, z, edge_ptr, rho, degrees)

        # transmission: one message per outgoing edge of each sender
        sending = active & ~terminated
        sent = np.repeat(sending, degrees)
        raw = 2.0 * rho * np.repeat(w, degrees, axis=0) - z
        msg = np.empty_like(raw)
        for i in range(num_agents):
            lo, hi = edge_ptr[i], edge_ptr[i + 1]
            msg[lo:hi] = _quant_block(raw[lo:hi], kinds[i], deltas[i], sp_thetas[i])
        err = msg[sent] - raw[sent]
        noise_out[rnd] = np.sqrt(np.sum(err * err))

        # reception: edge e of agent i carries the message sent on the
        # reverse edge; applied only when the receiver is active
        arrived = sent[edge_rev]
        applied = np.repeat(active, degrees) & arrived
        z_new = 0.5 * (z + msg[edge_rev])
        diff = z_new - z
        z[applied] = z_new[applied]
        dsq = np.einsum("ec,ec->e", diff, diff)

        # termination check (senders above used the pre-round flags)
        edge_ok = terminated[edge_dst] | (applied & (dsq <= term_sq))
        all_ok = np.logical_and.reduceat(edge_ok, edge_ptr[:-1])
        terminated |= active & ~terminated & all_ok

        dev = w - ybar
        consensus_out[rnd] = np.sqrt(np.max(np.sum(dev * dev, axis=1)))
        nterm_out[rnd] = int(terminated.sum())
        if terminated.all():
            return rnd + 1, True
    return max_rounds, False


def mixing_rounds(x, weights, edge_dst, edge_ptr, kinds, deltas,
                  sp_thetas, num_rounds):
    """Quantized mixing-matrix rounds, in place.

    Each round every agent broadcasts its quantized state; receivers
    combine with their mixing weights, keeping their own (unquantized)
    self term.
    """
    num_agents = x.shape[0]
    xq = np.empty_like(x)
    for _ in range(num_rounds):
        for i in range(num_agents):
            xq[i] = _quant_block(x[i], kinds[i], deltas[i], sp_thetas[i])
        new = np.empty_like(x)
        for i in range(num_agents):
            acc = weights[i, i] * x[i]
            for e in range(edge_ptr[i], edge_ptr[i + 1]):
                j = edge_dst[e]
                acc += weights[i, j] * xq[j]
            new[i] = acc
        x[:] = new
