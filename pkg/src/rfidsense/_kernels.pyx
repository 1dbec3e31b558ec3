# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics mirror ``_fallback`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sin, cos, sqrt, exp, log, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI
cdef double MAX_XENT = -log(1e-12)


def window_stats(const double[::1] rssi, const double[::1] phase,
                 const cnp.int64_t[::1] offsets, bint circular=True):
    cdef Py_ssize_t nw = offsets.shape[0] - 1
    out_arr = np.empty((nw, 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t w, i, lo, hi, n
    cdef double s, mean, acc, d, ss, cc, mu, rbar
    for w in range(nw):
        lo = offsets[w]
        hi = offsets[w + 1]
        n = hi - lo
        if n < 2:
            raise ValueError("window needs at least 2 reads")
        s = 0.0
        for i in range(lo, hi):
            s += rssi[i]
        mean = s / n
        acc = 0.0
        for i in range(lo, hi):
            d = rssi[i] - mean
            acc += d * d
        out[w, 0] = mean
        out[w, 1] = acc / (n - 1)
        if circular:
            ss = 0.0
            cc = 0.0
            for i in range(lo, hi):
                ss += sin(phase[i])
                cc += cos(phase[i])
            mu = atan2(ss, cc)
            if mu < 0.0:
                mu += TWO_PI
            if mu >= TWO_PI:
                mu = 0.0
            rbar = sqrt(ss * ss + cc * cc) / n
            d = 2.0 * (1.0 - rbar)
            out[w, 2] = mu
            out[w, 3] = d if d > 0.0 else 0.0
        else:
            s = 0.0
            for i in range(lo, hi):
                s += phase[i]
            mu = s / n
            acc = 0.0
            for i in range(lo, hi):
                d = phase[i] - mu
                acc += d * d
            out[w, 2] = mu
            out[w, 3] = acc / (n - 1)
    return out_arr


def adam_update(double[::1] param, const double[::1] grad, double[::1] m,
                double[::1] v, double lr, double beta1, double beta2,
                double eps, double bias1, double bias2):
    """In-place Adam step; ``bias1``/``bias2`` are 1 - beta**t."""
    cdef Py_ssize_t i, n = param.shape[0]
    cdef double g, mhat, vhat
    for i in range(n):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + ((1.0 - beta2) * g) * g
        mhat = m[i] / bias1
        vhat = v[i] / bias2
        param[i] = param[i] - (lr * mhat) / (sqrt(vhat) + eps)


def softmax_xent(const double[:, ::1] logits, const cnp.int64_t[::1] labels):
    """Row-wise stable softmax, per-row loss, and d(loss)/d(logits)."""
    cdef Py_ssize_t n = logits.shape[0], k = logits.shape[1], r, j
    probs_arr = np.empty((n, k), dtype=np.float64)
    loss_arr = np.empty(n, dtype=np.float64)
    grad_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] probs = probs_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[::1] loss = loss_arr
    cdef double mx, s, l
    cdef cnp.int64_t y
    for r in range(n):
        mx = logits[r, 0]
        for j in range(1, k):
            if logits[r, j] > mx:
                mx = logits[r, j]
        s = 0.0
        for j in range(k):
            probs[r, j] = exp(logits[r, j] - mx)
            s += probs[r, j]
        for j in range(k):
            probs[r, j] = probs[r, j] / s
            grad[r, j] = probs[r, j]
        y = labels[r]
        l = log(s) - (logits[r, y] - mx)
        loss[r] = l if l < MAX_XENT else MAX_XENT
        grad[r, y] -= 1.0
    return probs_arr, loss_arr, grad_arr
