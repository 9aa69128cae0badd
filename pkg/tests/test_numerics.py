import math

import numpy as np
import pytest

from mocsm.errors import NonUniformGrid, NotPositiveDefinite
from mocsm.numerics import (CholFactor, cholesky, finite_diff_grad, log_det, min_eigenvalue,
                            periodogram, solve_psd)


def test_cholesky_identity():
    f = cholesky(np.eye(2))
    assert np.array_equal(f.lower, np.eye(2))
    assert f.jitter_used == 0


def test_cholesky_2x2():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    f = cholesky(m)
    assert np.allclose(f.lower, [[2, 0], [1, math.sqrt(2)]])
    assert np.allclose(f.lower @ f.lower.T, m)


def test_cholesky_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_uses_jitter_on_singular():
    f = cholesky(np.ones((3, 3)))
    assert f.jitter_used > 0


@pytest.mark.parametrize("m,b,want", [
    (np.eye(2), [3, -1], [3, -1]),
    (np.array([[4.0, 2.0], [2.0, 3.0]]), [2, 3], [0, 1]),
    (np.array([[2.0]]), [4], [2]),
])
def test_solve_psd(m, b, want):
    assert np.allclose(solve_psd(cholesky(m), np.array(b, float)), want, atol=1e-14)


@pytest.mark.parametrize("m,want", [
    (np.eye(2), 0.0),
    (np.diag([2.0, 3.0]), 1.791759),
    (np.array([[4.0, 2.0], [2.0, 3.0]]), 2.079442),
])
def test_log_det(m, want):
    assert log_det(cholesky(m)) == pytest.approx(want, abs=1e-6)


@pytest.mark.parametrize("m,want", [
    (np.eye(2), 1.0), (np.array([[1.0, 2.0], [2.0, 1.0]]), -1.0), (np.diag([3.0, 5.0]), 3.0)])
def test_min_eigenvalue(m, want):
    assert min_eigenvalue(m) == pytest.approx(want, abs=1e-12)


def test_finite_diff_examples():
    assert finite_diff_grad(lambda v: v[0] ** 2, np.array([3.0]), 1e-5)[0] == pytest.approx(6, abs=1e-8)
    assert finite_diff_grad(lambda v: math.sin(v[0]), np.array([0.0]), 1e-5)[0] == pytest.approx(1, abs=1e-9)
    g = finite_diff_grad(lambda v: v[0] * v[1], np.array([2.0, 5.0]))
    assert np.allclose(g, [5, 2], atol=1e-9)


def _dft_oracle(x, y):
    # direct O(n^2) transform of the demeaned series, one-sided power
    n = len(y)
    y = y - y.mean()
    k = np.arange(n // 2 + 1)
    t = np.arange(n)
    Y = np.array([np.sum(y * np.exp(-2j * np.pi * kk * t / n)) for kk in k])
    p = np.abs(Y) ** 2 / n**2
    p[1:(n + 1) // 2] *= 2
    return k / (n * (x[1] - x[0])), p


def test_periodogram_single_cosine():
    x = np.arange(0, 20, 0.1)
    y = np.cos(2 * np.pi * 0.5 * x)
    s = periodogram(x, y)
    f_o, p_o = _dft_oracle(x, y)
    assert np.allclose(s.freqs[:, 0], f_o)
    assert np.allclose(s.powers, p_o, atol=1e-12)
    assert abs(s.freqs[np.argmax(s.powers), 0] - 0.5) <= 1 / 20


def test_periodogram_constant_is_zero():
    s = periodogram(np.arange(50.0), np.full(50, 3.7))
    assert np.all(s.powers <= 1e-12)


def test_periodogram_two_peaks():
    x = np.arange(0, 20, 0.1)
    s = periodogram(x, np.cos(2 * np.pi * 0.2 * x) + np.cos(2 * np.pi * 1.0 * x))
    p, f = s.powers, s.freqs[:, 0]
    peaks = [f[k] for k in range(1, len(p) - 1) if p[k] > p[k - 1] and p[k] > p[k + 1] and p[k] > 0.1]
    assert np.allclose(sorted(peaks), [0.2, 1.0], atol=0.05)


def test_periodogram_parseval():
    rng = np.random.default_rng(0)
    for n in (31, 64):
        y = rng.normal(size=n)
        assert periodogram(np.arange(n, dtype=float), y).powers.sum() == pytest.approx(np.var(y))


def test_periodogram_rejects_nonuniform():
    with pytest.raises(NonUniformGrid):
        periodogram(np.array([0, 1, 2.5, 3, 4, 5, 6, 7.0]), np.arange(8.0))


def test_cholfactor_n():
    assert CholFactor(np.eye(3), 0.0).n == 3
