"""Pure numpy implementations of the hot kernels."""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
MAX_XENT = -math.log(1e-12)


def window_stats(rssi, phase, offsets, circular=True):
    rssi = np.asarray(rssi, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    counts = np.diff(offsets)
    if counts.size == 0:
        return np.empty((0, 4))
    if counts.min() < 2:
        raise ValueError("window needs at least 2 reads")
    starts = offsets[:-1]
    out = np.empty((counts.size, 4))

    mean = np.add.reduceat(rssi, starts) / counts
    dev = rssi - np.repeat(mean, counts)
    out[:, 0] = mean
    out[:, 1] = np.add.reduceat(dev * dev, starts) / (counts - 1)

    if circular:
        ss = np.add.reduceat(np.sin(phase), starts)
        cc = np.add.reduceat(np.cos(phase), starts)
        mu = np.arctan2(ss, cc)
        mu = np.where(mu < 0.0, mu + TWO_PI, mu)
        mu = np.where(mu >= TWO_PI, 0.0, mu)
        rbar = np.sqrt(ss * ss + cc * cc) / counts
        out[:, 2] = mu
        out[:, 3] = np.maximum(2.0 * (1.0 - rbar), 0.0)
    else:
        mu = np.add.reduceat(phase, starts) / counts
        dev = phase - np.repeat(mu, counts)
        out[:, 2] = mu
        out[:, 3] = np.add.reduceat(dev * dev, starts) / (counts - 1)
    return out


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bias1, bias2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += ((1.0 - beta2) * grad) * grad
    mhat = m / bias1
    vhat = v / bias2
    param -= (lr * mhat) / (np.sqrt(vhat) + eps)


def softmax_xent(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(logits.shape[0])
    mx = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - mx)
    s = e.sum(axis=1, keepdims=True)
    probs = e / s
    loss = np.log(s[:, 0]) - (logits[rows, labels] - mx[:, 0])
    loss = np.minimum(loss, MAX_XENT)
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return probs, loss, grad
