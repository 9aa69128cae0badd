"""Multi-channel datasets: synthetic generation, CSV I/O and split schemes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, EmptyFile, InputError, MalformedRow,
                     TooFewPoints)


@dataclass(frozen=True)
class ChannelSeries:
    channel_id: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"channel {self.channel_id}: {X.shape[0]} inputs, {y.size} outputs")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError(f"channel {self.channel_id}: non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "channel_id", int(self.channel_id))

    def __len__(self):
        return self.y.size


@dataclass(frozen=True)
class MultiChannelDataset:
    channels: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise InputError("dataset has no channels")
        ids = [c.channel_id for c in chans]
        if ids != list(range(1, len(chans) + 1)):
            raise InputError(f"channel ids must be 1..M in order, got {ids}")
        dims = {c.X.shape[1] for c in chans}
        if len(dims) != 1:
            raise DimensionMismatch(f"channels disagree on input dimension: {sorted(dims)}")
        object.__setattr__(self, "channels", chans)

    @property
    def M(self):
        return len(self.channels)

    @property
    def P(self):
        return self.channels[0].X.shape[1]

    @property
    def n(self):
        return sum(len(c) for c in self.channels)

    def __getitem__(self, channel_id):
        return self.channels[channel_id - 1]

    def stacked(self):
        """``(channels, X, y)`` with channels 1-based, in channel order."""
        ch = np.concatenate([np.full(len(c), c.channel_id) for c in self.channels]).astype(int)
        X = np.concatenate([c.X for c in self.channels]).reshape(-1, self.P)
        y = np.concatenate([c.y for c in self.channels])
        return ch, X, y

    @classmethod
    def from_stacked(cls, channels, X, y, M=None, meta=None):
        channels = np.asarray(channels, dtype=int)
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float)
        M = int(channels.max()) if M is None else M
        series = tuple(ChannelSeries(m, X[channels == m], y[channels == m])
                       for m in range(1, M + 1))
        return cls(series, meta or {})

    def equals(self, other):
        return self.M == other.M and all(
            np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
            for a, b in zip(self.channels, other.channels))


# -- calculus helpers ---------------------------------------------------------

def numerical_integral(y, dx):
    """Cumulative trapezoid starting at 0."""
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        raise TooFewPoints("need at least 3 samples")
    if dx <= 0:
        raise InputError("dx must be positive")
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * dx * (y[1:] + y[:-1]))
    return out


def numerical_derivative(y, dx):
    """Central differences inside, first-order one-sided at the ends."""
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        raise TooFewPoints("need at least 3 samples")
    if dx <= 0:
        raise InputError("dx must be positive")
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (2 * dx)
    out[0] = (y[1] - y[0]) / dx
    out[-1] = (y[-1] - y[-2]) / dx
    return out


# -- synthetic experiment -------------------------------------------------------

def random_sm_components(Q, rng, interval=(-10.0, 10.0)):
    """Random spectral-mixture components for the synthetic signal.

    Frequencies are drawn between ~3 cycles over the interval and 1 cycle
    per unit; spectral variances keep each component coherent over a few
    periods. Weights sum to one.
    """
    from .kernels import SpectralComponent
    span = interval[1] - interval[0]
    mu = np.sort(rng.uniform(3.0 / span, 1.0, Q))
    sigma2 = (rng.uniform(0.02, 0.1, Q) * mu) ** 2 + 1e-4
    w = rng.dirichlet(np.full(Q, 2.0))
    return [SpectralComponent(w[q], [mu[q]], [sigma2[q]]) for q in range(Q)]


def generate_synthetic(seed=0, Q=4, n=300, interval=(-10.0, 10.0)):
    """Signal drawn from a zero-mean SM-kernel GP, its integral and derivative.

    Channel 1 is a GP draw on ``n`` evenly spaced points (Cholesky of the
    Gram matrix with 1e-6 jitter applied to seeded standard normals);
    channel 2 is its cumulative trapezoidal integral and channel 3 its
    central-difference derivative.
    """
    from .kernels import sm_eval
    if n < 16:
        raise TooFewPoints("synthetic series needs n >= 16")
    if Q < 1:
        raise InputError("Q must be positive")
    lo, hi = map(float, interval)
    if not hi > lo:
        raise InputError("interval must be nonempty")
    rng = np.random.default_rng(seed)
    comps = random_sm_components(Q, rng, (lo, hi))
    x = np.linspace(lo, hi, n)
    dx = x[1] - x[0]
    K = sm_eval(comps, (x[:, None] - x[None, :]).reshape(-1, 1)).reshape(x.size, x.size)
    L = np.linalg.cholesky(K + 1e-6 * np.eye(n))
    f = L @ rng.standard_normal(n)
    X = x[:, None]
    meta = {"kind": "synthetic", "seed": seed, "Q": Q, "n": n, "interval": [lo, hi],
            "labels": ["signal", "integral", "derivative"],
            "components": [{"w": c.w, "mu": c.mu.tolist(), "sigma2": c.sigma2.tolist()}
                           for c in comps]}
    return MultiChannelDataset((
        ChannelSeries(1, X, f),
        ChannelSeries(2, X, numerical_integral(f, dx)),
        ChannelSeries(3, X, numerical_derivative(f, dx)),
    ), meta)


def generate_delayed_copy(seed=0, n=120, interval=(0.0, 12.0), delay=0.3, Q=2, noise=0.02):
    """Two channels where channel 2 is channel 1 shifted by ``delay``.

    Used to check that cross-channel structure is learned. Both channels
    share one smooth GP draw on an extended grid; small white noise is added.
    """
    from .kernels import sm_eval
    rng = np.random.default_rng(seed)
    lo, hi = interval
    comps = random_sm_components(Q, rng, interval)
    x = np.linspace(lo, hi, n)
    dx = x[1] - x[0]
    shift = int(round(delay / dx))
    grid = np.linspace(lo - shift * dx, hi, n + shift)
    K = sm_eval(comps, (grid[:, None] - grid[None, :]).reshape(-1, 1)).reshape(grid.size, grid.size)
    f = np.linalg.cholesky(K + 1e-6 * np.eye(grid.size)) @ rng.standard_normal(grid.size)
    y1 = f[shift:] + noise * rng.standard_normal(n)
    y2 = f[:n] + noise * rng.standard_normal(n)
    meta = {"kind": "delayed_copy", "seed": seed, "delay": shift * dx,
            "labels": ["source", "delayed"]}
    return MultiChannelDataset((ChannelSeries(1, x[:, None], y1),
                                ChannelSeries(2, x[:, None], y2)), meta)


# -- splits ---------------------------------------------------------------------

@dataclass(frozen=True)
class SplitScheme:
    """``kind`` is ``"random"``, ``"first"``, ``"last"``, ``"all"`` (train only) or ``"none"`` (test only)."""

    kind: str
    seed: int = 0

    def __post_init__(self):
        kind = str(self.kind).strip().lower()
        aliases = {"randomhalf": "random", "firsthalf": "first", "lasthalf": "last",
                   "train": "all", "test": "none"}
        kind = aliases.get(kind, kind)
        if kind not in ("random", "first", "last", "all", "none"):
            raise InputError(f"unknown split scheme {self.kind!r}")
        object.__setattr__(self, "kind", kind)

    @classmethod
    def RandomHalf(cls, seed=0):
        return cls("random", seed)

    @classmethod
    def FirstHalf(cls):
        return cls("first")

    @classmethod
    def LastHalf(cls):
        return cls("last")

    def indices(self, series: ChannelSeries):
        n = len(series)
        k = math.ceil(n / 2)
        if self.kind == "random":
            perm = np.random.default_rng(self.seed).permutation(n)
            return np.sort(perm[:k]), np.sort(perm[k:])
        if self.kind == "all":
            return np.arange(n), np.arange(0)
        if self.kind == "none":
            return np.arange(0), np.arange(n)
        order = np.argsort(series.X[:, 0], kind="stable")
        if self.kind == "first":
            return np.sort(order[:k]), np.sort(order[k:])
        return np.sort(order[n - k:]), np.sort(order[:n - k])


def parse_schemes(text, M, seed=0):
    """Parse ``"random,first,last"``; a single entry is repeated for all channels."""
    if isinstance(text, str):
        parts = [p for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    if len(parts) == 1:
        parts = parts * M
    if len(parts) != M:
        raise InputError(f"need {M} split schemes, got {len(parts)}")
    out = []
    for p in parts:
        if isinstance(p, SplitScheme):
            out.append(p)
            continue
        name, _, s = str(p).partition(":")
        out.append(SplitScheme(name, int(s) if s else seed))
    return out


def default_schemes(M, seed=0):
    """Random half for channel 1, first half for 2, last half for 3, random for the rest."""
    kinds = ["random", "first", "last"] + ["random"] * max(0, M - 3)
    return [SplitScheme(k, seed) for k in kinds[:M]]


def split(dataset: MultiChannelDataset, schemes):
    if len(schemes) != dataset.M:
        raise InputError(f"need {dataset.M} split schemes, got {len(schemes)}")
    train, test = [], []
    for series, scheme in zip(dataset.channels, schemes):
        tr, te = scheme.indices(series)
        train.append(ChannelSeries(series.channel_id, series.X[tr], series.y[tr]))
        test.append(ChannelSeries(series.channel_id, series.X[te], series.y[te]))
    return (MultiChannelDataset(tuple(train), dict(dataset.meta)),
            MultiChannelDataset(tuple(test), dict(dataset.meta)))


# -- CSV ------------------------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def dataset_to_csv(dataset: MultiChannelDataset):
    buf = io.StringIO()
    header = ["channel"] + [f"x{p + 1}" for p in range(dataset.P)] + ["y"]
    buf.write(",".join(header) + "\n")
    for c in dataset.channels:
        for x, y in zip(c.X, c.y):
            buf.write(",".join([str(c.channel_id)] + [_fmt(v) for v in x] + [_fmt(y)]) + "\n")
    return buf.getvalue()


def save_csv(dataset, path):
    Path(path).write_text(dataset_to_csv(dataset), encoding="utf-8", newline="\n")


def _read_rows(path, expected_tail):
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(s.strip() for s in r)]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    _, header = rows[0]
    header = [h.strip() for h in header]
    if not header or header[0] != "channel" or header[-len(expected_tail):] != expected_tail:
        raise MalformedRow(1, f"unexpected header {header}")
    return header, rows[1:]


def load_csv(path, P=None):
    """Read ``channel,x1..xP,y``; channel labels are remapped to 1..M by first appearance."""
    header, rows = _read_rows(path, ["y"])
    P_file = len(header) - 2
    if P is None:
        P = P_file
    if P_file != P or P < 1:
        raise MalformedRow(1, f"header has {P_file} input columns, expected {P}")
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")
    remap, chans, xs, ys = {}, [], [], []
    for line, r in rows:
        if len(r) != P + 2:
            raise MalformedRow(line, f"expected {P + 2} fields, got {len(r)}")
        try:
            vals = [float(s) for s in r]
        except ValueError:
            raise MalformedRow(line, "non-numeric field") from None
        if not all(math.isfinite(v) for v in vals):
            raise MalformedRow(line, "non-finite value")
        label = r[0].strip()
        remap.setdefault(label, len(remap) + 1)
        chans.append(remap[label])
        xs.append(vals[1:-1])
        ys.append(vals[-1])
    ch = np.array(chans)
    ds = MultiChannelDataset.from_stacked(ch, np.array(xs), np.array(ys), M=len(remap))
    return MultiChannelDataset(ds.channels, {"kind": "csv", "source": str(path),
                                             "labels": list(remap)})


def load_points(path, P=None):
    """Read prediction inputs ``channel,x1..xP``; returns ``(channels, X)``."""
    text = Path(path).read_text(encoding="utf-8")
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text)))
            if r and any(s.strip() for s in r)]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0][1]]
    if header[0] != "channel" or len(header) < 2:
        raise MalformedRow(1, f"unexpected header {header}")
    P_file = len(header) - 1
    if P is not None and P != P_file:
        raise MalformedRow(1, f"header has {P_file} input columns, expected {P}")
    chans, xs = [], []
    for line, r in rows[1:]:
        if len(r) != P_file + 1:
            raise MalformedRow(line, f"expected {P_file + 1} fields, got {len(r)}")
        try:
            chans.append(int(r[0]))
            xs.append([float(s) for s in r[1:]])
        except ValueError:
            raise MalformedRow(line, "non-numeric field") from None
    return np.array(chans, dtype=int), np.array(xs, dtype=float).reshape(-1, P_file)
