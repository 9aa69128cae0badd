"""Exact multi-output GP inference over stacked channel data."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import MultiChannelDataset
from .errors import (AllRestartsFailed, DimensionMismatch, InputError,
                     NumericalError)
from .kernels import (MOGPKernelParams, _FIELDS, _free_mask, cross_gram,
                      diag_prior, gram_gradient, gram_matrix, params_to_dict)
from .numerics import cholesky, log_det

log = logging.getLogger(__name__)

_LOG2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class MOGPModel:
    """Kernel hyperparameters, per-channel noise variances and training data.

    With ``tie_noise`` the optimiser keeps a single noise level shared by all
    channels (the value of channel 1 is used).
    """

    kernel: MOGPKernelParams
    noise: np.ndarray
    train: MultiChannelDataset
    tie_noise: bool = False

    def __post_init__(self):
        noise = np.broadcast_to(np.asarray(self.noise, dtype=float),
                                (self.kernel.M,)).copy()
        if self.tie_noise:
            noise[:] = noise[0]
        object.__setattr__(self, "noise", noise)
        if self.train.M != self.kernel.M:
            raise DimensionMismatch(f"kernel has M={self.kernel.M}, data has {self.train.M} channels")
        if self.train.P != self.kernel.P:
            raise DimensionMismatch(f"kernel has P={self.kernel.P}, data has P={self.train.P}")
        if np.any(noise < 0):
            raise InputError("noise variances must be nonnegative")

    # unconstrained coordinates: kernel free values then log noise
    def free_vector(self):
        with np.errstate(divide="ignore"):
            ln = np.log(self.noise[:1] if self.tie_noise else self.noise)
        return np.concatenate([self.kernel.free_vector(), ln])

    def free_log_mask(self):
        parts = []
        for f in _FIELDS[self.kernel.family]:
            mask = _free_mask(self.kernel.family, f.name, self.kernel.values[f.name].shape)
            parts.append(np.full(int(mask.sum()), f.log))
        parts.append(np.ones(1 if self.tie_noise else self.kernel.M, dtype=bool))
        return np.concatenate(parts)

    def with_free_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        k = 1 if self.tie_noise else self.kernel.M
        kernel = self.kernel.with_free_vector(vec[:-k])
        noise = np.broadcast_to(np.exp(vec[-k:]), (self.kernel.M,))
        return replace(self, kernel=kernel, noise=noise)

    def with_params(self, kernel, noise=None):
        return replace(self, kernel=kernel, noise=self.noise if noise is None else noise)


@dataclass(frozen=True)
class GPPosterior:
    mean: np.ndarray
    variance: np.ndarray
    clamped: int = 0


@dataclass
class OptimizerConfig:
    algorithm: str = "lbfgs"  # "lbfgs" or "adam"
    step_size: float = 0.01  # adam only
    max_iter: int = 1500
    tol: float = 1e-7  # relative NLML change (lbfgs) / absolute over `patience` steps (adam)
    gtol: float = 1e-5  # lbfgs projected-gradient tolerance
    restarts: int = 3
    seed: int = 0
    patience: int = 50

    def __post_init__(self):
        if self.algorithm not in ("adam", "lbfgs"):
            raise InputError(f"unknown optimizer {self.algorithm!r}")
        if not (self.step_size > 0 and self.max_iter > 0 and self.tol > 0 and self.restarts >= 1):
            raise InputError("step size, iterations, tolerance and restarts must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass
class FitReport:
    nlml_trace: list
    final_params: MOGPKernelParams
    final_noise: np.ndarray
    iterations: int
    converged: bool
    restarts_used: int
    restart_nlml: list = field(default_factory=list)

    @property
    def final_nlml(self):
        return self.nlml_trace[-1]

    def to_dict(self):
        return {"nlml_trace": [float(v) for v in self.nlml_trace],
                "final_params": params_to_dict(self.final_params, self.final_noise),
                "final_noise": [float(v) for v in self.final_noise],
                "iterations": int(self.iterations), "converged": bool(self.converged),
                "restarts_used": int(self.restarts_used),
                "restart_nlml": [None if not math.isfinite(v) else float(v)
                                 for v in self.restart_nlml]}

    def trace_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "nlml"])
        for i, v in enumerate(self.nlml_trace):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()


def _factor(model: MOGPModel):
    ch, X, y = model.train.stacked()
    if y.size == 0:
        raise InputError("training data is empty")
    K = gram_matrix(model.kernel, ch, X)
    K[np.diag_indices_from(K)] += model.noise[ch - 1]
    return cholesky(K), ch, X, y


def nlml(model: MOGPModel) -> float:
    """Negative log marginal likelihood, including the ``N/2 log 2 pi`` constant."""
    f, _, _, y = _factor(model)
    alpha = cho_solve((f.lower, True), y, check_finite=False)
    return 0.5 * float(y @ alpha) + 0.5 * log_det(f) + 0.5 * y.size * _LOG2PI


def nlml_and_grad(model: MOGPModel):
    """NLML and its gradient in the model's unconstrained coordinates.

    Uses ``dNLML = tr(G dK)`` with ``G = (Kinv - alpha alpha^T) / 2``.
    """
    f, ch, X, y = _factor(model)
    Kinv = cho_solve((f.lower, True), np.eye(y.size), check_finite=False)
    alpha = Kinv @ y
    value = 0.5 * float(y @ alpha) + 0.5 * log_det(f) + 0.5 * y.size * _LOG2PI
    G = 0.5 * (Kinv - np.outer(alpha, alpha))
    g_kernel = gram_gradient(model.kernel, ch, X, G)
    gd = np.diag(G)
    g_noise = np.array([model.noise[m] * gd[ch == m + 1].sum() for m in range(model.kernel.M)])
    if model.tie_noise:
        g_noise = g_noise.sum(keepdims=True)
    return value, np.concatenate([g_kernel, g_noise])


def nlml_grad(model: MOGPModel):
    return nlml_and_grad(model)[1]


def predict(model: MOGPModel, channels, X, include_noise=False) -> GPPosterior:
    """Posterior mean and variance at stacked test inputs."""
    f, ch, Xtr, y = _factor(model)
    channels = np.asarray(channels, dtype=int).ravel()
    X = np.asarray(X, dtype=float).reshape(channels.size, -1)
    Ks = cross_gram(model.kernel, channels, X, ch, Xtr)
    alpha = cho_solve((f.lower, True), y, check_finite=False)
    mean = Ks @ alpha
    V = solve_triangular(f.lower, Ks.T, lower=True, check_finite=False)
    var = diag_prior(model.kernel, channels) - np.sum(V * V, axis=0)
    if include_noise:
        var = var + model.noise[channels - 1]
    neg = var < 0
    clamped = int(neg.sum())
    if clamped:
        log.debug("clamped %d negative predictive variances (min %g)", clamped, var.min())
        var = np.where(neg, 0.0, var)
    return GPPosterior(mean, var, clamped)


# -- optimisation -----------------------------------------------------------------

def _objective(model):
    def fun(vec):
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v, g = nlml_and_grad(model.with_free_vector(vec))
        except (NumericalError, ValueError, np.linalg.LinAlgError):
            return math.inf, np.zeros_like(vec)
        if not (math.isfinite(v) and np.all(np.isfinite(g))):
            return math.inf, np.zeros_like(vec)
        return v, g
    return fun


def _adam(fun, x0, f0, g0, cfg):
    x = x0.copy()
    best_x, best_f = x0.copy(), f0
    trace = [f0]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    lr = cfg.step_size
    f, g = f0, g0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**it)
        vhat = v / (1 - b2**it)
        x = x - lr * mhat / (np.sqrt(vhat) + eps)
        f, g = fun(x)
        if not math.isfinite(f):
            # back off to the best point with a smaller step
            x, lr = best_x.copy(), lr * 0.5
            m[:] = 0.0
            v[:] = 0.0
            f, g = fun(x)
        if f < best_f:
            best_f, best_x = f, x.copy()
        trace.append(best_f)
        k = cfg.patience
        if len(trace) > k and trace[-k - 1] - trace[-1] < cfg.tol:
            converged = True
            break
    return best_x, trace, it, converged


def _lbfgs(fun, x0, f0, g0, cfg):
    from scipy.optimize import minimize
    best = {"x": x0.copy(), "f": f0}
    trace = [f0]

    def wrapped(x):
        f, g = fun(x)
        if f < best["f"]:
            best["f"], best["x"] = f, x.copy()
        return (f if math.isfinite(f) else 1e300), g

    def callback(xk):
        trace.append(best["f"])

    res = minimize(wrapped, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": cfg.tol})
    x = best["x"]
    # a line-search probe can undercut the final iterate by rounding noise
    # while being less stationary; prefer the iterate in that case
    if math.isfinite(res.fun) and res.fun <= best["f"] + 1e-12 * max(1.0, abs(best["f"])):
        x = res.x
        trace.append(min(trace[-1], float(res.fun)))
    return x, trace, int(res.nit), bool(res.success)


def _perturb(model, x0, rng):
    logmask = model.free_log_mask()
    step = np.where(logmask, 0.2, 0.05 * np.abs(x0) + 0.01)
    return x0 + step * rng.standard_normal(x0.size)


def fit(model: MOGPModel, cfg: OptimizerConfig | None = None) -> FitReport:
    """Minimise NLML from the model's current parameters.

    Restart 0 starts at the given parameters; later restarts start from
    seeded perturbations of them. The restart with the lowest final NLML
    wins (ties go to the earlier restart). Traces report best-so-far NLML.
    """
    cfg = cfg or OptimizerConfig()
    fun = _objective(model)
    x0 = model.free_vector()
    results = []
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, r])
        start = x0 if r == 0 else _perturb(model, x0, rng)
        if not np.all(np.isfinite(start)):
            results.append(None)
            continue
        f0, g0 = fun(start)
        if not math.isfinite(f0):
            results.append(None)
            continue
        step = _adam if cfg.algorithm == "adam" else _lbfgs
        results.append(step(fun, start, f0, g0, cfg))
    done = [(i, r) for i, r in enumerate(results) if r is not None]
    if not done:
        raise AllRestartsFailed("NLML is not finite at any restart's starting point")
    finals = [math.inf if r is None else r[1][-1] for r in results]
    i_best = min(done, key=lambda t: (t[1][1][-1], t[0]))[0]
    x, trace, iters, conv = results[i_best]
    best = model.with_free_vector(x)
    return FitReport(trace, best.kernel, best.noise, iters, conv, len(done), finals)
