"""Spectral initialisation: periodogram plus a power-weighted Gaussian mixture."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ChannelSeries, MultiChannelDataset
from .errors import DegenerateInput, InputError, TooFewPoints, UnsupportedDimension
from .kernels import BASE_LMC, SPECTRAL, Family, MOGPKernelParams
from .numerics import SpectralSampleSet, periodogram

MAX_EM_ITER = 500
EM_TOL = 1e-8


@dataclass(frozen=True)
class GMMResult:
    weights: np.ndarray  # (Q,)
    means: np.ndarray  # (Q, P)
    variances: np.ndarray  # (Q, P)
    loglik_trace: list
    iterations: int

    @property
    def Q(self):
        return self.weights.size


def empirical_spectral_density(channel: ChannelSeries) -> SpectralSampleSet:
    """Periodogram of one channel, resampling onto a uniform grid if needed."""
    if channel.X.shape[1] != 1:
        raise UnsupportedDimension("spectral initialisation needs one-dimensional inputs")
    n = len(channel)
    if n < 8:
        raise TooFewPoints(f"channel {channel.channel_id} has {n} points, need at least 8")
    order = np.argsort(channel.X[:, 0], kind="stable")
    x, y = channel.X[order, 0], channel.y[order]
    step = (x[-1] - x[0]) / (n - 1)
    if step <= 0:
        raise DegenerateInput(f"channel {channel.channel_id} has no input spread")
    if np.max(np.abs(np.diff(x) - step)) > 1e-9 * step:
        grid = np.linspace(x[0], x[-1], n)
        xu, idx = np.unique(x, return_index=True)
        # average repeated inputs before interpolating
        yu = np.array([y[x == v].mean() for v in xu]) if xu.size < n else y[idx]
        y = np.interp(grid, xu, yu)
        x = grid
    return periodogram(x, y)


def _log_gauss(f, mean, var):
    return -0.5 * np.sum(np.log(2 * math.pi * var) + (f - mean) ** 2 / var, axis=-1)


def gmm_em(samples: SpectralSampleSet, Q: int, seed=0) -> GMMResult:
    """Fit a ``Q``-component diagonal Gaussian mixture with powers as sample weights.

    Seeding is k-means++ on the weighted samples. Stops when the weighted
    log-likelihood improves by less than 1e-8 or after 500 iterations.
    Variances are floored at ``1e-6 * (frequency range)^2``.
    """
    if Q < 1:
        raise InputError("Q must be positive")
    f = np.asarray(samples.freqs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    p = np.asarray(samples.powers, dtype=float)
    keep = p > 1e-12 * p.max() if p.size and p.max() > 0 else np.zeros(p.size, bool)
    f, p = f[keep], p[keep]
    if len(np.unique(f, axis=0)) < Q:
        raise DegenerateInput(f"need at least {Q} distinct frequencies with positive power")
    p = p / p.sum()
    span = np.ptp(f, axis=0)
    floor = 1e-6 * np.where(span > 0, span, 1.0) ** 2

    rng = np.random.default_rng(seed)
    means = np.empty((Q, f.shape[1]))
    means[0] = f[rng.choice(len(f), p=p)]
    for q in range(1, Q):
        d2 = np.min(((f[:, None, :] - means[None, :q]) ** 2).sum(-1), axis=1)
        prob = p * d2
        prob = prob / prob.sum() if prob.sum() > 0 else p
        means[q] = f[rng.choice(len(f), p=prob)]
    overall = np.maximum(p @ (f - p @ f) ** 2, floor)
    variances = np.tile(overall / Q**2, (Q, 1))
    weights = np.full(Q, 1.0 / Q)

    trace = []
    it = 0
    for it in range(1, MAX_EM_ITER + 1):
        logr = np.log(weights)[None, :] + _log_gauss(f[:, None, :], means[None], variances[None])
        top = logr.max(axis=1, keepdims=True)
        lse = top[:, 0] + np.log(np.exp(logr - top).sum(axis=1))
        trace.append(float(p @ lse))
        r = np.exp(logr - lse[:, None]) * p[:, None]
        nk = r.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / nk.sum()
        means = (r.T @ f) / nk[:, None]
        variances = np.maximum((r.T @ f**2) / nk[:, None] - means**2, 0.0)
        variances = np.maximum(variances, floor)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < EM_TOL:
            break
    order = np.argsort(means[:, 0], kind="stable")
    return GMMResult(weights[order], means[order], variances[order], trace, it)


def _pooled_samples(dataset):
    freqs, powers = [], []
    for c in dataset.channels:
        s = empirical_spectral_density(c)
        tot = s.powers.sum()
        freqs.append(s.freqs)
        powers.append(s.powers / tot if tot > 0 else s.powers)
    return SpectralSampleSet(np.concatenate(freqs), np.concatenate(powers))


def init_params(dataset: MultiChannelDataset, Q: int, family, seed=0) -> MOGPKernelParams:
    """Initial hyperparameters from each channel's empirical spectrum.

    Per-channel families (SM, MOCSM, MOSM) fit one mixture per channel, with
    components sorted by frequency so component ``q`` pairs similar bands
    across channels. Weights are rescaled so each channel's prior variance
    ``k^{mm}(0)`` equals its sample variance. Shared-component families
    (CSM, LMC) fit one mixture to the pooled, per-channel normalised spectra.
    Delays start at zero.
    """
    family = Family.parse(family)
    M, P = dataset.M, dataset.P
    if P != 1:
        raise UnsupportedDimension("spectral initialisation needs one-dimensional inputs")
    var = np.array([np.var(c.y) for c in dataset.channels])
    var = np.where(var > 0, var, 1.0)
    if family in SPECTRAL:
        w = np.empty((Q, M))
        mu = np.empty((Q, M, P))
        s2 = np.empty((Q, M, P))
        for m, c in enumerate(dataset.channels):
            g = gmm_em(empirical_spectral_density(c), Q, seed)
            mu[:, m], s2[:, m] = g.means, g.variances
            if family is Family.MOSM:
                # MOSM's diagonal prefactor is sqrt(2 pi)^P w^2 prod sqrt(sigma2)
                scale = (2 * math.pi) ** (P / 2) * np.prod(np.sqrt(g.variances), axis=1)
                w[:, m] = np.sqrt(g.weights * var[m] / scale)
            else:
                w[:, m] = g.weights * var[m]
        return MOGPKernelParams(family, Q, M, P, {"w": w, "mu": mu, "sigma2": s2})

    g = gmm_em(_pooled_samples(dataset), Q, seed)
    sd = np.sqrt(var)
    A = np.linalg.cholesky(0.5 * np.outer(sd, sd) + 0.5 * np.diag(var))
    A = np.broadcast_to(A, (Q, M, M))
    if family is Family.CSM:
        w = np.sqrt(np.outer(g.weights, var))
        return MOGPKernelParams(family, Q, M, P, {"mu": g.means, "sigma2": g.variances, "w": w,
                                                  "phi": np.zeros((Q, M))})
    if family is Family.SM_LMC:
        return MOGPKernelParams(family, Q, M, P, {"w": g.weights, "mu": g.means,
                                                  "sigma2": g.variances, "A": A})
    assert family in BASE_LMC
    # length-scale of the characteristic frequency sqrt(mu^2 + sigma2)
    ls = 1.0 / (2 * math.pi * np.sqrt(g.means**2 + g.variances))
    return MOGPKernelParams(family, Q, M, P, {"scale": g.weights, "lengthscale": ls, "A": A})
