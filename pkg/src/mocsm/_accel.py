"""Hot loops of Gram assembly: the delayed spectral term and its gradient.

Every spectral family reduces to blocks of the unit-amplitude term

    t(u) = exp(-0.5 pi^2 sum_p u_p^2 S_p) * cos(pi (u . m - phi)),
    u = 2 (x_a - x_b) - theta,

so only this term (and its contraction against a weight matrix for the
gradient) is compiled. Two implementations are kept: numba ``@njit`` loops
and a vectorised numpy path. Set ``MOCSM_DISABLE_NUMBA=1`` to force numpy.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("MOCSM_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return deco

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

_PI = math.pi
_PI2 = math.pi * math.pi


# -- numpy path ---------------------------------------------------------------

def _lags(xa, xb, theta):
    return 2.0 * (xa[:, None, :] - xb[None, :, :]) - theta


def spectral_block_numpy(xa, xb, m, S, theta, phi, symmetric=False):
    u = _lags(xa, xb, theta)
    out = np.exp(-0.5 * _PI2 * np.einsum("abp,abp,p->ab", u, u, S)) * np.cos(
        _PI * (u @ m - phi))
    if symmetric:
        out = np.triu(out) + np.triu(out, 1).T
    return out


def spectral_block_grad_numpy(xa, xb, W, m, S, theta, phi, symmetric=False):
    # ``symmetric`` (xa is xb, zero delays) only matters to the compiled loop
    u = _lags(xa, xb, theta)
    E = np.exp(-0.5 * _PI2 * np.einsum("abp,abp,p->ab", u, u, S))
    arg = _PI * (u @ m - phi)
    EC = E * np.cos(arg)
    ES = E * np.sin(arg)
    wEC = W * EC
    wES = W * ES
    g_unit = wEC.sum()
    g_m = -_PI * np.einsum("ab,abp->p", wES, u)
    g_S = -0.5 * _PI2 * np.einsum("ab,abp->p", wEC, u * u)
    g_theta = _PI2 * S * np.einsum("ab,abp->p", wEC, u) + _PI * m * wES.sum()
    g_phi = _PI * wES.sum()
    return g_unit, g_m, g_S, g_theta, g_phi


# -- numba path ---------------------------------------------------------------

@njit(cache=True)
def spectral_block_numba(xa, xb, m, S, theta, phi, symmetric=False):
    na, P = xa.shape
    nb = xb.shape[0]
    out = np.empty((na, nb))
    for a in range(na):
        b0 = a if symmetric else 0
        for b in range(b0, nb):
            q = 0.0
            d = 0.0
            for p in range(P):
                u = 2.0 * (xa[a, p] - xb[b, p]) - theta[p]
                q += u * u * S[p]
                d += u * m[p]
            v = math.exp(-0.5 * _PI2 * q) * math.cos(_PI * (d - phi))
            out[a, b] = v
            if symmetric:
                out[b, a] = v
    return out


@njit(cache=True)
def spectral_block_grad_numba(xa, xb, W, m, S, theta, phi, symmetric=False):
    na, P = xa.shape
    nb = xb.shape[0]
    g_unit = 0.0
    g_phi = 0.0
    g_m = np.zeros(P)
    g_S = np.zeros(P)
    g_u = np.zeros(P)
    u = np.empty(P)
    for a in range(na):
        b0 = a if symmetric else 0
        for b in range(b0, nb):
            # (b, a) mirrors (a, b) with u -> -u: even terms take W[a,b] + W[b,a],
            # odd terms (sin, and cos times u) take W[a,b] - W[b,a]
            w = W[a, b]
            wo = w
            if symmetric and b != a:
                w += W[b, a]
                wo -= W[b, a]
            q = 0.0
            d = 0.0
            for p in range(P):
                u[p] = 2.0 * (xa[a, p] - xb[b, p]) - theta[p]
                q += u[p] * u[p] * S[p]
                d += u[p] * m[p]
            E = math.exp(-0.5 * _PI2 * q)
            arg = _PI * (d - phi)
            EC = E * math.cos(arg)
            ES = E * math.sin(arg)
            g_unit += w * EC
            g_phi += wo * ES
            for p in range(P):
                g_m[p] += w * ES * u[p]
                g_S[p] += w * EC * u[p] * u[p]
                g_u[p] += wo * EC * u[p]
    g_theta = _PI2 * S * g_u + _PI * m * g_phi
    return g_unit, -_PI * g_m, -0.5 * _PI2 * g_S, g_theta, _PI * g_phi


if USE_NUMBA:
    spectral_block = spectral_block_numba
    spectral_block_grad = spectral_block_grad_numba
else:
    spectral_block = spectral_block_numpy
    spectral_block_grad = spectral_block_grad_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
