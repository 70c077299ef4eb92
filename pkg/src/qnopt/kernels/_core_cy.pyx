# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled round kernels.

Mirrors the pure-python backend operation for operation: per-agent
accumulations run in edge order and no expression is re-associated, so
edge states and termination decisions match the fallback bitwise
(diagnostic norms may differ in the last ulp; see the backend tests).
"""

import numpy as np

cimport numpy as cnp

from libc.math cimport ceil, copysign, fabs, floor, sqrt, trunc

cnp.import_array()

BACKEND_NAME = "cython"


cdef inline double _q1(double x, cnp.int64_t kind, double delta,
                       double theta) noexcept nogil:
    cdef double v
    if kind == 0:
        return x
    if kind == 4:
        if fabs(x) < theta:
            return 0.0
        return x
    v = x / delta
    if kind == 1:
        return delta * trunc(v + copysign(0.5, v))
    if kind == 2:
        return delta * floor(v)
    return delta * ceil(v)


def compute_w(double[:, ::1] y, double[:, ::1] z, cnp.int64_t[::1] edge_ptr,
              double rho, cnp.int64_t[::1] degrees):
    """Per-agent averages w_i = (y_i + sum_j z_ij) / (1 + rho * |N_i|)."""
    cdef Py_ssize_t num_agents = y.shape[0]
    cdef Py_ssize_t dim = y.shape[1]
    cdef Py_ssize_t i, c
    cdef cnp.int64_t e
    cdef double acc, denom
    w_arr = np.empty((num_agents, dim))
    cdef double[:, ::1] w = w_arr
    for i in range(num_agents):
        denom = 1.0 + rho * degrees[i]
        for c in range(dim):
            acc = y[i, c]
            for e in range(edge_ptr[i], edge_ptr[i + 1]):
                acc += z[e, c]
            w[i, c] = acc / denom
    return w_arr


def ftqc_rounds(double[:, ::1] y, double[::1] ybar, double[:, ::1] z,
                cnp.int64_t[::1] edge_dst, cnp.int64_t[::1] edge_ptr,
                cnp.int64_t[::1] edge_rev, double rho,
                cnp.int64_t[::1] kinds, double[::1] deltas,
                double[::1] sp_thetas, double[::1] term_thetas,
                double[::1] probs, double[:, ::1] uniforms,
                cnp.uint8_t[::1] terminated, long max_rounds,
                double[::1] noise_out, double[::1] consensus_out,
                cnp.int64_t[::1] nterm_out):
    """Run up to ``max_rounds`` synchronous coordination rounds in place.

    Same contract as the python backend: mutates ``z`` and
    ``terminated``, fills the diagnostic buffers, returns
    ``(rounds_done, all_terminated)``.
    """
    cdef Py_ssize_t num_agents = y.shape[0]
    cdef Py_ssize_t dim = y.shape[1]
    cdef Py_ssize_t num_dir = edge_dst.shape[0]
    cdef bint have_u = uniforms.shape[0] > 0
    cdef Py_ssize_t rnd, i, j, c
    cdef cnp.int64_t e, er
    cdef double acc, denom, raw, m, d, zn, dsq, ssq, noise_sq, cons_sq
    cdef bint ok, all_term
    cdef cnp.int64_t nterm

    w_arr = np.empty((num_agents, dim))
    msg_arr = np.empty((num_dir, dim))
    act_arr = np.ones(num_agents, dtype=np.uint8)
    newterm_arr = np.empty(num_agents, dtype=np.uint8)
    tt2_arr = np.asarray(term_thetas) ** 2
    cdef double[:, ::1] w = w_arr
    cdef double[:, ::1] msg = msg_arr
    cdef cnp.uint8_t[::1] act = act_arr
    cdef cnp.uint8_t[::1] newterm = newterm_arr
    cdef double[::1] tt2 = tt2_arr

    for rnd in range(max_rounds):
        if have_u:
            for i in range(num_agents):
                act[i] = 1 if uniforms[rnd, i] < probs[i] else 0

        # per-agent averages and the consensus diagnostic
        cons_sq = 0.0
        for i in range(num_agents):
            denom = 1.0 + rho * (edge_ptr[i + 1] - edge_ptr[i])
            ssq = 0.0
            for c in range(dim):
                acc = y[i, c]
                for e in range(edge_ptr[i], edge_ptr[i + 1]):
                    acc += z[e, c]
                acc = acc / denom
                w[i, c] = acc
                d = acc - ybar[c]
                ssq += d * d
            if ssq > cons_sq:
                cons_sq = ssq
        consensus_out[rnd] = sqrt(cons_sq)

        # transmission: one quantized message per outgoing edge
        noise_sq = 0.0
        for i in range(num_agents):
            if act[i] and not terminated[i]:
                for e in range(edge_ptr[i], edge_ptr[i + 1]):
                    for c in range(dim):
                        raw = 2.0 * rho * w[i, c] - z[e, c]
                        m = _q1(raw, kinds[i], deltas[i], sp_thetas[i])
                        msg[e, c] = m
                        d = m - raw
                        noise_sq += d * d
        noise_out[rnd] = sqrt(noise_sq)

        # reception and termination evidence (pre-round flags throughout)
        for j in range(num_agents):
            if not act[j]:
                newterm[j] = 0
                continue
            ok = 1
            for er in range(edge_ptr[j], edge_ptr[j + 1]):
                i = edge_dst[er]
                if act[i] and not terminated[i]:
                    dsq = 0.0
                    for c in range(dim):
                        zn = 0.5 * (z[er, c] + msg[edge_rev[er], c])
                        d = zn - z[er, c]
                        dsq += d * d
                        z[er, c] = zn
                    if dsq > tt2[j]:
                        ok = 0
                elif not terminated[i]:
                    ok = 0
            newterm[j] = ok

        all_term = 1
        nterm = 0
        for i in range(num_agents):
            if act[i] and newterm[i]:
                terminated[i] = 1
            if terminated[i]:
                nterm += 1
            else:
                all_term = 0
        nterm_out[rnd] = nterm
        if all_term:
            return rnd + 1, True
    return max_rounds, False


def mixing_rounds(double[:, ::1] x, double[:, ::1] weights,
                  cnp.int64_t[::1] edge_dst, cnp.int64_t[::1] edge_ptr,
                  cnp.int64_t[::1] kinds, double[::1] deltas,
                  double[::1] sp_thetas, long num_rounds):
    """Quantized mixing-matrix rounds, in place."""
    cdef Py_ssize_t num_agents = x.shape[0]
    cdef Py_ssize_t dim = x.shape[1]
    cdef Py_ssize_t rnd, i, c
    cdef cnp.int64_t e, j
    cdef double acc
    xq_arr = np.empty((num_agents, dim))
    new_arr = np.empty((num_agents, dim))
    cdef double[:, ::1] xq = xq_arr
    cdef double[:, ::1] new = new_arr
    for rnd in range(num_rounds):
        for i in range(num_agents):
            for c in range(dim):
                xq[i, c] = _q1(x[i, c], kinds[i], deltas[i], sp_thetas[i])
        for i in range(num_agents):
            for c in range(dim):
                acc = weights[i, i] * x[i, c]
                for e in range(edge_ptr[i], edge_ptr[i + 1]):
                    j = edge_dst[e]
                    acc += weights[i, j] * xq[j, c]
                new[i, c] = acc
        for i in range(num_agents):
            for c in range(dim):
                x[i, c] = new[i, c]
