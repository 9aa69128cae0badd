"""Experiment orchestration: fit/predict per family, MAE tables and curve export."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gp
from .data import ChannelSeries, MultiChannelDataset, split
from .errors import ChannelOutOfRange, DimensionMismatch, InputError, MOGPError
from .init import init_params
from .kernels import (Family, MOGPKernelParams, kernel_eval, param_count,
                      params_from_dict, params_to_dict)

log = logging.getLogger(__name__)

DEFAULT_FAMILIES = ("SM_LMC", "CSM", "MOSM", "MOCSM")
NOISE_FRACTION = 0.01


def mae(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size or y_true.size == 0:
        raise DimensionMismatch(f"MAE needs equal nonzero lengths, got {y_true.size} and {y_pred.size}")
    return float(np.mean(np.abs(y_true - y_pred)))


# -- fitted model bundle ----------------------------------------------------------

@dataclass
class FittedModel:
    """A GP on per-channel centred data plus the offsets to add back."""

    model: gp.MOGPModel
    offsets: np.ndarray
    report: gp.FitReport | None = None

    def predict(self, channels, X, include_noise=False):
        channels = np.asarray(channels, dtype=int)
        post = gp.predict(self.model, channels, X, include_noise)
        return gp.GPPosterior(post.mean + self.offsets[channels - 1], post.variance, post.clamped)

    def to_dict(self):
        ch, X, y = self.model.train.stacked()
        y = y + self.offsets[ch - 1]
        doc = {"kernel": params_to_dict(self.model.kernel, self.model.noise),
               "tie_noise": self.model.tie_noise,
               "offsets": self.offsets.tolist(),
               "train": {"P": self.model.train.P, "M": self.model.train.M,
                         "channel": ch.tolist(), "X": X.tolist(), "y": y.tolist()}}
        if self.report is not None:
            doc["fit"] = self.report.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc):
        try:
            params, noise = params_from_dict(doc["kernel"])
            t = doc["train"]
            train = MultiChannelDataset.from_stacked(t["channel"], np.reshape(t["X"], (-1, t["P"])),
                                                     t["y"], M=t["M"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed model document: {exc!r}") from None
        if "offsets" in doc:
            offsets = np.asarray(doc["offsets"], dtype=float)
            train = MultiChannelDataset(tuple(
                ChannelSeries(c.channel_id, c.X, c.y - o) for c, o in zip(train.channels, offsets)))
        else:
            train, offsets = center(train)
        if noise is None:
            noise = default_noise(train)
        model = gp.MOGPModel(params, noise, train, bool(doc.get("tie_noise", False)))
        return cls(model, offsets)


def center(dataset: MultiChannelDataset):
    """Subtract each channel's mean; returns ``(centred, offsets)``."""
    offsets = np.array([c.y.mean() if len(c) else 0.0 for c in dataset.channels])
    chans = tuple(ChannelSeries(c.channel_id, c.X, c.y - o)
                  for c, o in zip(dataset.channels, offsets))
    return MultiChannelDataset(chans, dict(dataset.meta)), offsets


def default_noise(dataset):
    v = np.array([np.var(c.y) if len(c) > 1 else 1.0 for c in dataset.channels])
    return NOISE_FRACTION * np.where(v > 0, v, 1.0)


def fit_family(train: MultiChannelDataset, family, Q, cfg=None, seed=0, tie_noise=False):
    """Centre, initialise from the spectrum, and fit one kernel family."""
    cfg = cfg or gp.OptimizerConfig(seed=seed)
    centred, offsets = center(train)
    params = init_params(centred, Q, family, seed)
    model = gp.MOGPModel(params, default_noise(centred), centred, tie_noise)
    report = gp.fit(model, cfg)
    fitted = model.with_params(report.final_params, report.final_noise)
    return FittedModel(fitted, offsets, report)


def evaluate(fitted: FittedModel, test: MultiChannelDataset, labels=None):
    """MAE per channel that has test points, keyed by task label."""
    out = {}
    for c in test.channels:
        if not len(c):
            continue
        label = _label(labels, c.channel_id)
        post = fitted.predict(np.full(len(c), c.channel_id), c.X)
        out[label] = mae(c.y, post.mean)
    return out


def _label(labels, m):
    if labels and len(labels) >= m:
        return str(labels[m - 1])
    return f"ch{m}"


# -- comparison report ------------------------------------------------------------

@dataclass
class ComparisonRow:
    family: str
    mae: dict
    nlml: float | None
    param_count: int
    n_free: int | None = None
    fit_seconds: float | None = None
    error: str | None = None

    def to_dict(self, include_timing=False):
        d = {"family": self.family, "mae": dict(self.mae), "nlml": self.nlml,
             "param_count": self.param_count, "n_free": self.n_free, "error": self.error}
        if include_timing:
            d["fit_seconds"] = self.fit_seconds
        return d


@dataclass
class ComparisonReport:
    tasks: list
    rows: list
    meta: dict = field(default_factory=dict)

    def row(self, family):
        fam = Family.parse(family).value
        return next(r for r in self.rows if r.family == fam)

    def to_dict(self, include_timing=False):
        return {"tasks": list(self.tasks), "meta": self.meta,
                "rows": [r.to_dict(include_timing) for r in self.rows]}

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def timing_json(self):
        return json.dumps({r.family: r.fit_seconds for r in self.rows}, indent=2) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["family", "param_count", "n_free", "nlml"] + list(self.tasks) + ["error"])
        for r in self.rows:
            w.writerow([r.family, r.param_count, _cell(r.n_free), _cell(r.nlml)]
                       + [_cell(r.mae.get(t)) for t in self.tasks] + [r.error or ""])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc):
        rows = [ComparisonRow(r["family"], r["mae"], r["nlml"], r["param_count"], r.get("n_free"),
                              r.get("fit_seconds"), r.get("error")) for r in doc["rows"]]
        return cls(doc["tasks"], rows, doc.get("meta", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_csv(cls, text, meta=None):
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        tasks = header[4:-1]
        out = []
        for r in body:
            maes = {t: float(v) for t, v in zip(tasks, r[4:-1]) if v != ""}
            out.append(ComparisonRow(r[0], maes, _num(r[3]), int(r[1]),
                                     None if r[2] == "" else int(r[2]), None, r[-1] or None))
        return cls(tasks, out, meta or {})


def _cell(v):
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def _num(s):
    return None if s == "" else float(s)


def baseline_mae(train, test, labels=None):
    """MAE of predicting each test channel by its training mean."""
    out = {}
    for tr, te in zip(train.channels, test.channels):
        if len(te):
            m = tr.y.mean() if len(tr) else 0.0
            out[_label(labels, te.channel_id)] = mae(te.y, np.full(len(te), m))
    return out


def compare(dataset: MultiChannelDataset, schemes, families=DEFAULT_FAMILIES, Q=3,
            cfg=None, seed=0, tie_noise=False):
    """Fit each family on the training split and score MAE on the test split.

    A failure in one family is recorded in its row; other rows still run.
    """
    cfg = cfg or gp.OptimizerConfig(seed=seed)
    if not families:
        raise InputError("no kernel families given")
    train, test = split(dataset, schemes)
    labels = dataset.meta.get("labels")
    tasks = [_label(labels, c.channel_id) for c in test.channels if len(c)]
    rows = []
    for fam in families:
        fam = Family.parse(fam)
        count = param_count(fam, Q, dataset.M, dataset.P)
        t0 = time.perf_counter()
        try:
            fitted = fit_family(train, fam, Q, cfg, seed, tie_noise)
            scores = evaluate(fitted, test, labels)
            rows.append(ComparisonRow(fam.value, scores, float(fitted.report.final_nlml), count,
                                      fitted.model.kernel.n_free, time.perf_counter() - t0))
        except (MOGPError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.warning("family %s failed: %s", fam.value, exc)
            rows.append(ComparisonRow(fam.value, {}, None, count, None,
                                      time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"))
    meta = {"Q": Q, "seed": seed, "schemes": [s.kind for s in schemes],
            "dataset": {k: v for k, v in dataset.meta.items() if k != "components"},
            "M": dataset.M, "P": dataset.P, "n": dataset.n,
            "baseline_mae": baseline_mae(train, test, labels),
            "optimizer": {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}}
    return ComparisonReport(tasks, rows, meta)


# -- cross-covariance curves --------------------------------------------------------

def counterpart(params: MOGPKernelParams, family) -> MOGPKernelParams:
    """Same spectral components under another per-channel family (MOCSM <-> MOSM)."""
    family = Family.parse(family)
    if params.family not in (Family.MOCSM, Family.MOSM) or family not in (Family.MOCSM, Family.MOSM):
        raise InputError("counterparts exist only between MOCSM and MOSM")
    return MOGPKernelParams(family, params.Q, params.M, params.P, params.values)


def export_cross_covariance(params: MOGPKernelParams, pairs, tau_grid, with_counterpart=False):
    """Rows ``(tau, pair_label, family, value)`` for each channel pair.

    With ``with_counterpart`` the MOSM (or MOCSM) curves of the same
    components are appended, for side-by-side plots.
    """
    tau = np.asarray(tau_grid, dtype=float).reshape(-1, params.P)
    sets = [params]
    if with_counterpart:
        other = Family.MOSM if params.family is Family.MOCSM else Family.MOCSM
        sets.append(counterpart(params, other))
    rows = []
    for p in sets:
        for i, j in pairs:
            if not (1 <= i <= p.M and 1 <= j <= p.M):
                raise ChannelOutOfRange(f"pair ({i},{j}) outside 1..{p.M}")
            vals = np.atleast_1d(kernel_eval(p, i, j, tau))
            for t, v in zip(tau, vals):
                rows.append((t if p.P > 1 else float(t[0]), f"{i}x{j}", p.family.value, float(v)))
    return rows


def curves_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "pair_label", "family", "value"])
    for t, label, fam, v in rows:
        tcell = repr(float(t)) if np.ndim(t) == 0 else " ".join(repr(float(x)) for x in t)
        w.writerow([tcell, label, fam, repr(v)])
    return buf.getvalue()


def weight_scale_params(mu=0.5, theta=None, phi=None):
    """Four-channel MOCSM setting with weights {0.5, 0.6, 2.0, 2.1} and variances {0.4, 0.5, 2.0, 2.1}."""
    w = np.array([[0.5, 0.6, 2.0, 2.1]])
    s2 = np.array([0.4, 0.5, 2.0, 2.1]).reshape(1, 4, 1)
    vals = {"w": w, "mu": np.full((1, 4, 1), mu), "sigma2": s2}
    if theta is not None:
        vals["theta"] = np.reshape(theta, (1, 4, 1))
    if phi is not None:
        vals["phi"] = np.reshape(phi, (1, 4, 1))
    return MOGPKernelParams(Family.MOCSM, 1, 4, 1, vals)


def cross_weight(params: MOGPKernelParams, i, j, q=0):
    """Cross-weight prefactor of component ``q`` (excludes the cross amplitude)."""
    from .kernels import cross_params
    ci, cj = params.component(q, i), params.component(q, j)
    cp = cross_params(ci, cj)
    if params.family is Family.MOSM:
        return (2 * math.pi) ** (params.P / 2) * ci.w * cj.w * float(
            np.prod((ci.sigma2 * cj.sigma2) ** 0.25))
    return cp.w_ij
