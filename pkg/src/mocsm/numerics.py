"""Dense symmetric linear algebra, finite differences and periodograms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (DimensionMismatch, NonFiniteEvaluation, NonUniformGrid,
                     NotPositiveDefinite, InputError)

JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class CholFactor:
    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def n(self):
        return self.lower.shape[0]


@dataclass(frozen=True)
class SpectralSampleSet:
    """Frequencies (cycles per input unit, shape ``(K, P)``) with powers."""

    freqs: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        if len(self.freqs) != len(self.powers):
            raise DimensionMismatch("freqs and powers differ in length")


def _as_sym(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteEvaluation("matrix has non-finite entries")
    return m


def cholesky(m, max_jitter=None):
    """Lower Cholesky factor with escalating diagonal jitter.

    Tries the ladder ``0, 1e-8 d, ..., 1e-4 d`` (``d`` the largest diagonal
    entry), stopping at the first step that factorises. Steps above
    ``max_jitter`` (absolute) are skipped when it is given.
    """
    m = _as_sym(m)
    d = float(np.max(np.abs(np.diag(m))))
    eye = np.eye(m.shape[0])
    for rel in JITTER_LADDER:
        jitter = rel * d
        if max_jitter is not None and jitter > max_jitter:
            break
        try:
            L = np.linalg.cholesky(m + jitter * eye if jitter else m)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.diag(L) > 0):
            return CholFactor(L, jitter)
    raise NotPositiveDefinite(
        "matrix is not positive definite even after jitter "
        f"{JITTER_LADDER[-1]:g} x max diagonal ({d:g})")


def solve_psd(f: CholFactor, b):
    """Solve ``(L L^T) x = b`` by two triangular solves."""
    from scipy.linalg import cho_solve
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, factor is {f.n}")
    return cho_solve((f.lower, True), b, check_finite=False)


def log_det(f: CholFactor):
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def min_eigenvalue(m):
    return float(np.linalg.eigvalsh(_as_sym(m))[0])


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h=None):
    """Central-difference gradient.

    ``h`` defaults to ``1e-5 * (1 + |x_i|)`` per coordinate; a scalar ``h``
    is used as-is for every coordinate.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if h is None:
        steps = 1e-5 * (1.0 + np.abs(x))
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = steps[i]
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(f"non-finite value near coordinate {i}")
        g[i] = (fp - fm) / (2.0 * steps[i])
    return g


def check_uniform(x, rtol=1e-9):
    x = np.asarray(x, dtype=float).ravel()
    dx = np.diff(x)
    step = (x[-1] - x[0]) / (len(x) - 1)
    if step <= 0 or np.max(np.abs(dx - step)) > rtol * abs(step):
        raise NonUniformGrid("input grid is not uniformly spaced")
    return step


def periodogram(x, y):
    """One-sided power spectrum of the demeaned signal.

    Normalised so the powers sum to the population variance of ``y``:
    ``P_0 = |Y_0|^2 / n^2``, ``P_k = 2 |Y_k|^2 / n^2`` for interior bins and
    the Nyquist bin (even ``n``) counted once.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise DimensionMismatch("x and y differ in length")
    if len(x) < 4:
        raise InputError("periodogram needs at least 4 points")
    dx = check_uniform(x)
    n = len(y)
    Y = np.fft.rfft(y - y.mean())
    power = np.abs(Y) ** 2 / n**2
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    freqs = np.fft.rfftfreq(n, d=dx)
    return SpectralSampleSet(freqs[:, None], power)
