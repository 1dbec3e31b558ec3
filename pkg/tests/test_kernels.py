"""Compiled kernels against the numpy fallback."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from rfidsense import _core, _fallback

kernels = pytest.importorskip("rfidsense._kernels")


def test_backend_selected():
    forced = os.environ.get("RFIDSENSE_PURE_PYTHON", "") in ("1", "true", "yes")
    assert _core.BACKEND == ("python" if forced else "cython")


@pytest.mark.parametrize("flag,want", [("1", "python"), ("0", "cython")])
def test_backend_env_override(flag, want):
    out = subprocess.run([sys.executable, "-c", "import rfidsense; print(rfidsense.BACKEND)"],
                         env=dict(os.environ, RFIDSENSE_PURE_PYTHON=flag), capture_output=True, text=True, check=True)
    assert out.stdout.strip() == want


@pytest.mark.parametrize("circular", [True, False])
def test_window_stats_parity(rng, circular):
    counts = rng.integers(2, 12, 500)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    rssi = rng.uniform(-84, -40, offsets[-1])
    phase = rng.uniform(0, 2 * math.pi, offsets[-1])
    a = kernels.window_stats(rssi, phase, offsets, circular)
    b = _fallback.window_stats(rssi, phase, offsets, circular)
    assert np.allclose(a, b, atol=1e-12, rtol=0)


def test_window_stats_rejects_short_windows():
    for impl in (kernels, _fallback):
        with pytest.raises(ValueError):
            impl.window_stats(np.zeros(3), np.zeros(3), np.array([0, 1, 3], dtype=np.int64))


def test_adam_parity_bitwise(rng):
    n = 1000
    p0 = rng.normal(size=n)
    states = []
    for impl in (kernels, _fallback):
        p, m, v = p0.copy(), np.zeros(n), np.zeros(n)
        for t in range(1, 30):
            g = np.random.default_rng(t).normal(size=n)
            impl.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 ** t, 1 - 0.999 ** t)
        states.append((p, m, v))
    for x, y in zip(*states):
        assert np.array_equal(x, y)


def test_softmax_xent_parity(rng):
    z = rng.normal(scale=5, size=(64, 7))
    y = rng.integers(0, 7, 64)
    for a, b in zip(kernels.softmax_xent(z, y), _fallback.softmax_xent(z, y)):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


def test_softmax_xent_clamps_extreme_loss():
    z = np.array([[0.0, 1000.0]])
    for impl in (kernels, _fallback):
        _, loss, _ = impl.softmax_xent(z, np.array([0]))
        assert loss[0] == pytest.approx(-math.log(1e-12))
