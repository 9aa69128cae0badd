"""Kernel families for multi-output GPs.

Spectral families share one building block, the delayed spectral term in
:mod:`mocsm._accel`. Each family maps a channel pair ``(i, j)`` to a list of
``(c, m, S, theta, phi)`` tuples; the Gram block is ``sum c * term``.

All frequencies are ordinary frequencies (cycles per input unit). Channels
are 1-based at the public surface.

Note on delays: the MOCSM cross term peaks where ``2 tau - theta_ij = 0``,
i.e. at ``tau = theta_ij / 2``. Learned ``theta`` values are therefore twice
the apparent lag between channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _accel
from .errors import (ChannelOutOfRange, DimensionMismatch, InputError,
                     UnsupportedDimension)

_PI2 = math.pi**2
_SQRT3 = math.sqrt(3.0)


class Family(str, Enum):
    SM = "SM"
    MOCSM = "MOCSM"
    MOSM = "MOSM"
    CSM = "CSM"
    SM_LMC = "SM_LMC"
    SE_LMC = "SE_LMC"
    MATERN_LMC = "MATERN_LMC"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        if key == "MATÉRN_LMC":
            key = "MATERN_LMC"
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown kernel family {name!r}") from None


SPECTRAL = (Family.SM, Family.MOCSM, Family.MOSM)
BASE_LMC = (Family.SE_LMC, Family.MATERN_LMC)


@dataclass(frozen=True)
class SpectralComponent:
    w: float
    mu: np.ndarray
    sigma2: np.ndarray
    theta: np.ndarray = None
    phi: np.ndarray = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        zeros = np.zeros_like(mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", np.broadcast_to(
            np.asarray(self.sigma2, dtype=float), mu.shape).copy())
        for name in ("theta", "phi"):
            v = getattr(self, name)
            v = zeros.copy() if v is None else np.broadcast_to(
                np.asarray(v, dtype=float), mu.shape).copy()
            object.__setattr__(self, name, v)
        object.__setattr__(self, "w", float(self.w))

    @property
    def P(self):
        return self.mu.size


@dataclass(frozen=True)
class CrossSpectralParams:
    w_ij: float
    a_ij: float
    mu_ij: np.ndarray
    sigma2_ij: np.ndarray
    theta_ij: np.ndarray
    phi_ij: np.ndarray


@dataclass(frozen=True)
class BaseKernelParams:
    kind: str  # "SE" or "MATERN32"
    scale: float
    lengthscale: np.ndarray


def cross_params(ci: SpectralComponent, cj: SpectralComponent) -> CrossSpectralParams:
    """Convolution cross parameters of two spectral components."""
    if ci.P != cj.P:
        raise DimensionMismatch(f"components have P={ci.P} and P={cj.P}")
    Si, Sj = ci.sigma2, cj.sigma2
    s = Si + Sj
    d = ci.mu - cj.mu
    a = np.prod(np.sqrt(2.0 * np.sqrt(Si * Sj) / s)) * math.exp(
        -0.25 * float(np.sum(d * d / s)))
    return CrossSpectralParams(
        w_ij=math.sqrt(ci.w * cj.w),
        a_ij=float(a),
        mu_ij=(Si * cj.mu + Sj * ci.mu) / s,
        sigma2_ij=2.0 * Si * Sj / s,
        theta_ij=ci.theta - cj.theta,
        phi_ij=ci.phi - cj.phi,
    )


# -- parameter store ----------------------------------------------------------

@dataclass(frozen=True)
class _Field:
    name: str
    log: bool


_FIELDS = {
    Family.SM: (_Field("w", True), _Field("mu", False), _Field("sigma2", True),
                _Field("theta", False), _Field("phi", False)),
    Family.CSM: (_Field("mu", False), _Field("sigma2", True), _Field("w", True),
                 _Field("phi", False)),
    Family.SM_LMC: (_Field("w", True), _Field("mu", False), _Field("sigma2", True),
                    _Field("A", False)),
    Family.SE_LMC: (_Field("scale", True), _Field("lengthscale", True),
                    _Field("A", False)),
}
_FIELDS[Family.MOCSM] = _FIELDS[Family.MOSM] = _FIELDS[Family.SM]
_FIELDS[Family.MATERN_LMC] = _FIELDS[Family.SE_LMC]


def _shapes(family, Q, M, P):
    if family in SPECTRAL:
        return {"w": (Q, M), "mu": (Q, M, P), "sigma2": (Q, M, P),
                "theta": (Q, M, P), "phi": (Q, M, P)}
    if family is Family.CSM:
        return {"mu": (Q, P), "sigma2": (Q, P), "w": (Q, M), "phi": (Q, M)}
    if family is Family.SM_LMC:
        return {"w": (Q,), "mu": (Q, P), "sigma2": (Q, P), "A": (Q, M, M)}
    return {"scale": (Q,), "lengthscale": (Q, P), "A": (Q, M, M)}


def _free_mask(family, name, shape):
    mask = np.ones(shape, dtype=bool)
    if family in SPECTRAL and name in ("theta", "phi"):
        if family is Family.SM:
            mask[:] = False
        else:
            mask[:, 0, :] = False
            if family is Family.MOSM and name == "phi":
                mask[:, :, 1:] = False
    elif family is Family.CSM and name == "phi":
        mask[:, 0] = False
    elif name == "A":
        M = shape[-1]
        mask[:] = np.tril(np.ones((M, M), dtype=bool))
    return mask


@dataclass
class MOGPKernelParams:
    """Hyperparameters of one kernel family over ``Q`` components and ``M`` channels.

    Values live in ``values`` as arrays keyed by field name; the layout per
    family is

    ========== ================================================================
    SM, MOCSM, ``w (Q,M)``, ``mu/sigma2/theta/phi (Q,M,P)``
    MOSM
    CSM        ``mu/sigma2 (Q,P)`` shared, ``w/phi (Q,M)`` per channel (P = 1)
    SM_LMC     ``w (Q,)``, ``mu/sigma2 (Q,P)``, ``A (Q,M,M)`` lower triangular
    SE_LMC,    ``scale (Q,)``, ``lengthscale (Q,P)``, ``A (Q,M,M)``
    MATERN_LMC
    ========== ================================================================

    SM treats channels as independent (zero cross-covariance). Delays that
    are pinned for identifiability (channel 1 of MOCSM/MOSM/CSM) are
    normalised on construction by subtracting the channel-1 value, which
    leaves the kernel unchanged.
    """

    family: Family
    Q: int
    M: int
    P: int
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = Family.parse(self.family)
        if min(self.Q, self.M, self.P) < 1:
            raise InputError("Q, M and P must be positive")
        if self.family is Family.CSM and self.P != 1:
            raise UnsupportedDimension("CSM is defined for one-dimensional inputs only")
        shapes = _shapes(self.family, self.Q, self.M, self.P)
        vals = {}
        for name, shape in shapes.items():
            if name not in self.values:
                if name in ("theta", "phi"):
                    vals[name] = np.zeros(shape)
                    continue
                raise InputError(f"{self.family.value} parameters need field {name!r}")
            v = np.asarray(self.values[name], dtype=float)
            try:
                v = np.broadcast_to(v, shape).copy()
            except ValueError:
                raise DimensionMismatch(
                    f"field {name!r} has shape {v.shape}, expected {shape}") from None
            vals[name] = v
        for f in _FIELDS[self.family]:
            v = vals[f.name]
            if f.log and np.any(v < 0):
                raise InputError(f"field {f.name!r} must be nonnegative")
        if "sigma2" in vals and np.any(vals["sigma2"] <= 0):
            raise InputError("spectral variances must be strictly positive")
        if self.family in (Family.MOCSM, Family.MOSM):
            for name in ("theta", "phi"):
                vals[name] = vals[name] - vals[name][:, :1, :]
            if self.family is Family.MOSM:
                total = vals["phi"].sum(axis=2)
                vals["phi"][:] = 0.0
                vals["phi"][:, :, 0] = total
        elif self.family is Family.SM:
            # independent channels: delays have no effect
            vals["theta"][:] = 0.0
            vals["phi"][:] = 0.0
        elif self.family is Family.CSM:
            vals["phi"] = vals["phi"] - vals["phi"][:, :1]
        if "A" in vals and np.any(np.triu(vals["A"], 1) != 0):
            raise InputError("mixing factors A must be lower triangular")
        self.values = vals

    def __getitem__(self, name):
        return self.values[name]

    # -- component views --
    def component(self, q, m=1) -> SpectralComponent:
        """Spectral component ``q`` (0-based) of channel ``m`` (1-based)."""
        v = self.values
        if self.family in SPECTRAL:
            k = m - 1
            return SpectralComponent(v["w"][q, k], v["mu"][q, k], v["sigma2"][q, k],
                                     v["theta"][q, k], v["phi"][q, k])
        if self.family is Family.SM_LMC:
            return SpectralComponent(v["w"][q], v["mu"][q], v["sigma2"][q])
        raise InputError(f"{self.family.value} has no per-channel spectral components")

    @property
    def components(self):
        f = self.family
        if f in SPECTRAL:
            return [[self.component(q, m) for m in range(1, self.M + 1)]
                    for q in range(self.Q)]
        if f is Family.SM_LMC:
            return [self.component(q) for q in range(self.Q)]
        if f is Family.CSM:
            return [{"mu": self["mu"][q], "sigma2": self["sigma2"][q],
                     "w": self["w"][q], "phi": self["phi"][q]} for q in range(self.Q)]
        return [BaseKernelParams("SE" if f is Family.SE_LMC else "MATERN32",
                                 float(self["scale"][q]), self["lengthscale"][q])
                for q in range(self.Q)]

    def mixing(self, q):
        """Coregionalisation matrix ``B_q = A_q A_q^T`` of an LMC family."""
        A = self.values["A"][q]
        return A @ A.T

    # -- unconstrained coordinates --
    def free_vector(self):
        parts = []
        for f in _FIELDS[self.family]:
            v = self.values[f.name]
            mask = _free_mask(self.family, f.name, v.shape)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.log(v) if f.log else v
            parts.append(t[mask])
        return np.concatenate(parts)

    def with_free_vector(self, vec):
        vec = np.asarray(vec, dtype=float)
        vals = {k: v.copy() for k, v in self.values.items()}
        pos = 0
        for f in _FIELDS[self.family]:
            v = vals[f.name]
            mask = _free_mask(self.family, f.name, v.shape)
            k = int(mask.sum())
            chunk = vec[pos:pos + k]
            v[mask] = np.exp(chunk) if f.log else chunk
            pos += k
        if pos != vec.size:
            raise DimensionMismatch(f"expected {pos} free values, got {vec.size}")
        return MOGPKernelParams(self.family, self.Q, self.M, self.P, vals)

    def pack_gradient(self, grads):
        """Flatten a per-field gradient dict (unconstrained coordinates)."""
        parts = []
        for f in _FIELDS[self.family]:
            mask = _free_mask(self.family, f.name, self.values[f.name].shape)
            parts.append(grads[f.name][mask])
        return np.concatenate(parts)

    def free_labels(self):
        labels = []
        for f in _FIELDS[self.family]:
            v = self.values[f.name]
            mask = _free_mask(self.family, f.name, v.shape)
            prefix = f"log_{f.name}" if f.log else f.name
            labels.extend(f"{prefix}{list(idx)}" for idx in zip(*np.nonzero(mask)))
        return labels

    @property
    def n_free(self):
        return self.free_vector().size


def param_count(family, Q, M, P):
    """Degrees of freedom per family.

    SE/Matérn LMC use ``Q`` base kernels, which reduces to the single-kernel
    count at ``Q = 1``. SM (independent channels) counts ``QM(2P+1)``.
    """
    family = Family.parse(family)
    lmc = (M * M + M) // 2
    return {
        Family.MOCSM: Q * M * (4 * P + 1),
        Family.MOSM: Q * M * (3 * P + 2),
        Family.CSM: 2 * Q + M * (2 * Q - 1),
        Family.SM_LMC: Q * (lmc + 2 * P + 1),
        Family.SE_LMC: Q * (lmc + P + 1),
        Family.MATERN_LMC: Q * (lmc + P + 1),
        Family.SM: Q * M * (2 * P + 1),
    }[family]


# -- pairwise terms -----------------------------------------------------------

def _spectral_cross(params, q, i, j):
    """Cross quantities for 0-based channels i, j of component q."""
    v = params.values
    wi, wj = v["w"][q, i], v["w"][q, j]
    Si, Sj = v["sigma2"][q, i], v["sigma2"][q, j]
    mi, mj = v["mu"][q, i], v["mu"][q, j]
    s = Si + Sj
    d = mi - mj
    log_a = float(np.sum(0.5 * np.log(2.0 * np.sqrt(Si * Sj) / s) - 0.25 * d * d / s))
    if params.family is Family.MOSM:
        c = (2 * math.pi) ** (params.P / 2) * wi * wj * float(
            np.prod((Si * Sj) ** 0.25)) * math.exp(log_a)
    else:
        c = math.sqrt(wi * wj) * math.exp(log_a)
    m = (Si * mj + Sj * mi) / s
    S = 2.0 * Si * Sj / s
    theta = v["theta"][q, i] - v["theta"][q, j]
    phi = float(np.sum(v["phi"][q, i] - v["phi"][q, j]))
    return c, m, S, theta, phi


def _terms(params, i, j):
    """Yield ``(q, c, m, S, theta, phi)`` for 0-based channel pair (i, j)."""
    f, v, P = params.family, params.values, params.P
    zeros = np.zeros(P)
    if f is Family.SM and i != j:
        return
    for q in range(params.Q):
        if f in SPECTRAL:
            yield (q,) + _spectral_cross(params, q, i, j)
        elif f is Family.CSM:
            c = v["w"][q, i] * v["w"][q, j]
            yield q, c, v["mu"][q], v["sigma2"][q], zeros, float(v["phi"][q, j] - v["phi"][q, i])
        elif f is Family.SM_LMC:
            c = params.mixing(q)[i, j] * v["w"][q]
            yield q, c, v["mu"][q], v["sigma2"][q], zeros, 0.0


def _check_channel(params, *chs):
    for c in chs:
        if not 1 <= c <= params.M:
            raise ChannelOutOfRange(f"channel {c} outside 1..{params.M}")


def _tau2d(tau, P):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau.shape[-1] != P:
        if P == 1:
            tau = tau[..., None]
        else:
            raise DimensionMismatch(f"tau has trailing size {tau.shape[-1]}, expected {P}")
    return np.ascontiguousarray(tau.reshape(-1, P))


def _base_block(kind, scale, ls, xa, xb):
    tau = xa[:, None, :] - xb[None, :, :]
    r2 = np.einsum("abp,p->ab", tau * tau, 1.0 / ls**2)
    if kind is Family.SE_LMC:
        return scale * np.exp(-0.5 * r2)
    r = np.sqrt(r2)
    return scale * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)


def kernel_eval(params: MOGPKernelParams, i, j, tau):
    """Cross-covariance ``k^{ij}(tau)`` for 1-based channels; tau may be a grid.

    ``tau`` of shape ``(P,)`` gives a scalar; ``(n, P)`` (or ``(n,)`` when
    ``P = 1``) gives ``n`` values.
    """
    _check_channel(params, i, j)
    scalar = np.ndim(tau) == 0 or (np.ndim(tau) == 1 and np.size(tau) == params.P)
    t = _tau2d(tau, params.P)
    zero = np.zeros((1, params.P))
    out = np.zeros(len(t))
    if params.family in BASE_LMC:
        for q in range(params.Q):
            b = params.mixing(q)[i - 1, j - 1]
            out += b * _base_block(params.family, params["scale"][q],
                                   params["lengthscale"][q], t, zero)[:, 0]
    else:
        for _, c, m, S, theta, phi in _terms(params, i - 1, j - 1):
            out += c * _accel.spectral_block_numpy(t, zero, m, S, theta, phi)[:, 0]
    return float(out[0]) if scalar else out


def _require(params, *families):
    if params.family not in families:
        raise InputError(f"expected family {[f.value for f in families]}, "
                         f"got {params.family.value}")


def mocsm_eval(params, i, j, tau):
    _require(params, Family.MOCSM)
    return kernel_eval(params, i, j, tau)


def mosm_eval(params, i, j, tau):
    _require(params, Family.MOSM)
    return kernel_eval(params, i, j, tau)


def csm_eval(params, i, j, tau):
    _require(params, Family.CSM)
    return kernel_eval(params, i, j, tau)


def smlmc_eval(params, i, j, tau):
    _require(params, Family.SM_LMC)
    return kernel_eval(params, i, j, tau)


def sm_eval(components, tau):
    """Single-output spectral mixture kernel, written out term by term."""
    P = components[0].P
    scalar = np.ndim(tau) == 0 or (np.ndim(tau) == 1 and np.size(tau) == P)
    tau = _tau2d(tau, P)
    total = np.zeros(len(tau))
    for c in components:
        total += c.w * np.cos(2 * math.pi * tau @ c.mu) * np.prod(
            np.exp(-2 * _PI2 * tau**2 * c.sigma2), axis=-1)
    return float(total[0]) if scalar else total


def base_kernel_eval(p: BaseKernelParams, tau):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    r2 = float(np.sum((tau / np.asarray(p.lengthscale, dtype=float)) ** 2))
    kind = p.kind.upper()
    if kind == "SE":
        return p.scale * math.exp(-0.5 * r2)
    if kind in ("MATERN32", "MATERN", "MATERN-3/2"):
        r = math.sqrt(r2)
        return p.scale * (1.0 + _SQRT3 * r) * math.exp(-_SQRT3 * r)
    raise InputError(f"unknown base kernel {p.kind!r}")


# -- Gram assembly -----------------------------------------------------------

def stack_points(pairs):
    """Turn a list of ``(channel, x)`` pairs into ``(channels, X)`` arrays."""
    ch = np.array([int(c) for c, _ in pairs], dtype=int)
    X = np.array([np.atleast_1d(np.asarray(x, dtype=float)) for _, x in pairs])
    return ch, X


def _groups(params, channels, X):
    channels = np.asarray(channels, dtype=int).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape != (channels.size, params.P):
        raise DimensionMismatch(f"inputs have shape {X.shape}, expected "
                                f"({channels.size}, {params.P})")
    if channels.size and (channels.min() < 1 or channels.max() > params.M):
        raise ChannelOutOfRange(f"channels must lie in 1..{params.M}")
    idx = [np.flatnonzero(channels == m + 1) for m in range(params.M)]
    xs = [np.ascontiguousarray(X[ix]) for ix in idx]
    return idx, xs


def _block(params, i, j, xa, xb, symmetric):
    out = np.zeros((xa.shape[0], xb.shape[0]))
    if params.family in BASE_LMC:
        for q in range(params.Q):
            b = params.mixing(q)[i, j]
            if b != 0.0:
                out += b * _base_block(params.family, params["scale"][q],
                                       params["lengthscale"][q], xa, xb)
        if symmetric:
            out = np.triu(out) + np.triu(out, 1).T
        return out
    for _, c, m, S, theta, phi in _terms(params, i, j):
        if c != 0.0:
            out += c * _accel.spectral_block(
                xa, xb, np.ascontiguousarray(m, dtype=float),
                np.ascontiguousarray(S, dtype=float),
                np.ascontiguousarray(theta, dtype=float), float(phi), symmetric)
    return out


def gram_matrix(params: MOGPKernelParams, channels, X):
    """Covariance over stacked ``(channel, x)`` inputs, symmetric by construction."""
    idx, xs = _groups(params, channels, X)
    n = sum(len(ix) for ix in idx)
    K = np.zeros((n, n))
    for i in range(params.M):
        if not len(idx[i]):
            continue
        for j in range(i, params.M):
            if not len(idx[j]):
                continue
            B = _block(params, i, j, xs[i], xs[j], i == j)
            K[np.ix_(idx[i], idx[j])] = B
            if i != j:
                K[np.ix_(idx[j], idx[i])] = B.T
    return K


def cross_gram(params: MOGPKernelParams, channels_a, Xa, channels_b, Xb):
    """Rectangular covariance between two stacked input sets."""
    ia, xa = _groups(params, channels_a, Xa)
    ib, xb = _groups(params, channels_b, Xb)
    K = np.zeros((sum(map(len, ia)), sum(map(len, ib))))
    for i in range(params.M):
        for j in range(params.M):
            if len(ia[i]) and len(ib[j]):
                K[np.ix_(ia[i], ib[j])] = _block(params, i, j, xa[i], xb[j], False)
    return K


def diag_prior(params: MOGPKernelParams, channels):
    """Prior variances ``k^{mm}(0)`` for each stacked channel label."""
    k0 = np.array([kernel_eval(params, m, m, np.zeros(params.P))
                   for m in range(1, params.M + 1)])
    return k0[np.asarray(channels, dtype=int) - 1]


# -- gradient contraction -------------------------------------------------------

def gram_gradient(params: MOGPKernelParams, channels, X, G):
    """Contract ``sum_ab G_ab dK_ab/d(param)`` for every free parameter.

    ``G`` is a symmetric ``N x N`` sensitivity matrix. Returns the flat
    gradient in the unconstrained coordinates of :meth:`free_vector`.
    """
    idx, xs = _groups(params, channels, X)
    G = np.asarray(G, dtype=float)
    grads = {k: np.zeros_like(v) for k, v in params.values.items()}
    for i in range(params.M):
        if not len(idx[i]):
            continue
        for j in range(i, params.M):
            if not len(idx[j]):
                continue
            W = G[np.ix_(idx[i], idx[j])]
            if i != j:
                W = 2.0 * W
            W = np.ascontiguousarray(W)
            if params.family in BASE_LMC:
                _base_chain(params, i, j, xs[i], xs[j], W, grads)
                continue
            for q, c, m, S, theta, phi in _terms(params, i, j):
                g = _accel.spectral_block_grad(
                    xs[i], xs[j], W, np.ascontiguousarray(m, dtype=float),
                    np.ascontiguousarray(S, dtype=float),
                    np.ascontiguousarray(theta, dtype=float), float(phi), i == j)
                _spectral_chain(params, q, i, j, c, g, grads)
    return params.pack_gradient(grads)


def _spectral_chain(params, q, i, j, c, g, grads):
    g_unit, g_m, g_S, g_theta, g_phi = g
    f, v = params.family, params.values
    gc_log = c * g_unit  # d/d log c
    gm, gS, gth, gph = c * g_m, c * g_S, c * g_theta, c * g_phi
    if f is Family.CSM:
        grads["w"][q, i] += gc_log
        grads["w"][q, j] += gc_log
        grads["mu"][q] += gm
        grads["sigma2"][q] += v["sigma2"][q] * gS
        grads["phi"][q, j] += gph
        grads["phi"][q, i] -= gph
        return
    if f is Family.SM_LMC:
        grads["w"][q] += gc_log
        grads["mu"][q] += gm
        grads["sigma2"][q] += v["sigma2"][q] * gS
        gB = v["w"][q] * g_unit
        A = v["A"][q]
        grads["A"][q, i] += gB * A[j]
        grads["A"][q, j] += gB * A[i]
        return
    Si, Sj = v["sigma2"][q, i], v["sigma2"][q, j]
    mi, mj = v["mu"][q, i], v["mu"][q, j]
    s = Si + Sj
    d = mi - mj
    m = (Si * mj + Sj * mi) / s
    mosm = f is Family.MOSM
    wexp = 1.0 if mosm else 0.5
    grads["w"][q, i] += wexp * gc_log
    grads["w"][q, j] += wexp * gc_log
    grads["mu"][q, i] += gc_log * (-0.5 * d / s) + gm * Sj / s
    grads["mu"][q, j] += gc_log * (0.5 * d / s) + gm * Si / s
    common = -0.5 / s + 0.25 * d * d / s**2
    extra = 0.25 * gc_log if mosm else 0.0
    grads["sigma2"][q, i] += Si * (gc_log * (0.25 / Si + common)
                                   + gm * (mj - m) / s + gS * 2 * Sj**2 / s**2) + extra
    grads["sigma2"][q, j] += Sj * (gc_log * (0.25 / Sj + common)
                                   + gm * (mi - m) / s + gS * 2 * Si**2 / s**2) + extra
    grads["theta"][q, i] += gth
    grads["theta"][q, j] -= gth
    grads["phi"][q, i] += gph
    grads["phi"][q, j] -= gph


def _base_chain(params, i, j, xa, xb, W, grads):
    f, v = params.family, params.values
    tau = xa[:, None, :] - xb[None, :, :]
    for q in range(params.Q):
        A = v["A"][q]
        b = float(A[i] @ A[j])
        scale, ls = v["scale"][q], v["lengthscale"][q]
        k = _base_block(f, scale, ls, xa, xb)
        t2 = tau * tau / ls**2
        if f is Family.SE_LMC:
            dk = k[..., None] * t2  # d k / d log ls
        else:
            r = np.sqrt(t2.sum(-1))
            dk = (3.0 * scale * np.exp(-_SQRT3 * r))[..., None] * t2
        gB = float(np.sum(W * k))
        grads["scale"][q] += b * gB
        grads["lengthscale"][q] += b * np.einsum("ab,abp->p", W, dk)
        grads["A"][q, i] += gB * A[j]
        grads["A"][q, j] += gB * A[i]


# -- random draws (tests, benchmarks, acceptance) -------------------------------

def random_params(family, Q, M, P, rng, delays=True):
    """Draw a well-conditioned random parameter set."""
    family = Family.parse(family)
    rng = np.random.default_rng(rng)
    if family in SPECTRAL:
        vals = {
            "w": rng.uniform(0.3, 1.5, (Q, M)),
            "mu": rng.uniform(0.0, 1.0, (Q, M, P)),
            "sigma2": rng.uniform(0.01, 0.3, (Q, M, P)),
        }
        if delays and family is not Family.SM:
            vals["theta"] = rng.uniform(-1.0, 1.0, (Q, M, P))
            vals["phi"] = rng.uniform(-0.5, 0.5, (Q, M, P))
    elif family is Family.CSM:
        vals = {"mu": rng.uniform(0.0, 1.0, (Q, P)), "sigma2": rng.uniform(0.01, 0.3, (Q, P)),
                "w": rng.uniform(0.3, 1.5, (Q, M)), "phi": rng.uniform(-0.5, 0.5, (Q, M))}
    elif family is Family.SM_LMC:
        vals = {"w": rng.uniform(0.3, 1.5, Q), "mu": rng.uniform(0.0, 1.0, (Q, P)),
                "sigma2": rng.uniform(0.01, 0.3, (Q, P)),
                "A": np.tril(rng.normal(size=(Q, M, M)))}
    else:
        vals = {"scale": rng.uniform(0.5, 1.5, Q), "lengthscale": rng.uniform(0.3, 2.0, (Q, P)),
                "A": np.tril(rng.normal(size=(Q, M, M)))}
    return MOGPKernelParams(family, Q, M, P, vals)


# -- JSON ---------------------------------------------------------------------

def _lst(a):
    return np.asarray(a, dtype=float).tolist()


def params_to_dict(params: MOGPKernelParams, noise=None):
    f, v = params.family, params.values
    comps = []
    for q in range(params.Q):
        if f in SPECTRAL:
            comps.append([{"w": float(v["w"][q, m]), "mu": _lst(v["mu"][q, m]),
                           "sigma2": _lst(v["sigma2"][q, m]), "theta": _lst(v["theta"][q, m]),
                           "phi": _lst(v["phi"][q, m])} for m in range(params.M)])
        elif f is Family.CSM:
            comps.append({"mu": _lst(v["mu"][q]), "sigma2": _lst(v["sigma2"][q]),
                          "w": _lst(v["w"][q]), "phi": _lst(v["phi"][q])})
        elif f is Family.SM_LMC:
            comps.append({"w": float(v["w"][q]), "mu": _lst(v["mu"][q]),
                          "sigma2": _lst(v["sigma2"][q]), "A": _lst(v["A"][q])})
        else:
            comps.append({"scale": float(v["scale"][q]), "lengthscale": _lst(v["lengthscale"][q]),
                          "A": _lst(v["A"][q])})
    return {"family": f.value, "Q": params.Q, "M": params.M, "P": params.P,
            "components": comps, "noise": None if noise is None else _lst(noise)}


def params_from_dict(doc):
    """Inverse of :func:`params_to_dict`; returns ``(params, noise)``."""
    try:
        f = Family.parse(doc["family"])
        Q, M, P = int(doc["Q"]), int(doc["M"]), int(doc["P"])
        comps = doc["components"]
        if len(comps) != Q:
            raise InputError(f"expected {Q} components, got {len(comps)}")
        if f in SPECTRAL:
            vals = {k: np.array([[c[k] for c in row] for row in comps], dtype=float)
                    for k in ("w", "mu", "sigma2")}
            for k in ("theta", "phi"):
                # delays are optional; absent means zero
                if any(k in c for row in comps for c in row):
                    vals[k] = np.array([[c[k] for c in row] for row in comps], dtype=float)
        else:
            keys = comps[0].keys() if comps else ()
            vals = {k: np.array([c[k] for c in comps], dtype=float) for k in keys}
        noise = doc.get("noise")
    except (KeyError, TypeError, IndexError) as exc:
        raise InputError(f"malformed kernel document: {exc!r}") from None
    params = MOGPKernelParams(f, Q, M, P, vals)
    return params, None if noise is None else np.asarray(noise, dtype=float)
