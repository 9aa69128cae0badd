"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, gp, harness
from .errors import InputError, NumericalError
from .init import init_params
from .kernels import Family, params_from_dict, params_to_dict

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _floats(text, n=None):
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _config(path):
    if not path:
        return {}
    return _read_json(path)


def _optimizer(conf, seed=None):
    opt = dict(conf.get("optimizer", {}))
    if seed is not None:
        opt.setdefault("seed", seed)
    return gp.OptimizerConfig.from_dict(opt)


def _schemes(arg, conf, M, seed):
    split = conf.get("split", {})
    seed = split.get("seed", seed)
    spec = arg or split.get("schemes")
    if not spec:
        return data.default_schemes(M, seed)
    return data.parse_schemes(spec, M, seed)


def cmd_generate(a):
    lo, hi = _floats(a.interval, 2)
    ds = data.generate_synthetic(a.seed, a.q, a.n, (lo, hi))
    data.save_csv(ds, a.out)


def cmd_init(a):
    ds = data.load_csv(a.data)
    ds, _ = harness.center(ds)
    params = init_params(ds, a.q, a.family, a.seed)
    _write(a.out, json.dumps(params_to_dict(params, harness.default_noise(ds)), indent=2) + "\n")


def cmd_fit(a):
    conf = _config(a.config)
    train = data.load_csv(a.data)
    centred, offsets = harness.center(train)
    params, noise = params_from_dict(_read_json(a.params))
    if noise is None:
        noise = harness.default_noise(centred)
    model = gp.MOGPModel(params, noise, centred, bool(conf.get("tie_noise", False)))
    report = gp.fit(model, _optimizer(conf))
    fitted = harness.FittedModel(model.with_params(report.final_params, report.final_noise),
                                 offsets, report)
    _write(a.out, json.dumps(fitted.to_dict(), indent=2) + "\n")
    _write(Path(a.out).with_suffix(".trace.csv"), report.trace_csv())


def cmd_predict(a):
    fitted = harness.FittedModel.from_dict(_read_json(a.model))
    ch, X = data.load_points(a.points, fitted.model.kernel.P)
    post = fitted.predict(ch, X, include_noise=a.include_noise)
    P = X.shape[1]
    lines = [",".join(["channel"] + [f"x{p + 1}" for p in range(P)] + ["mean", "variance"])]
    for c, x, m, v in zip(ch, X, post.mean, post.variance):
        lines.append(",".join([str(c)] + [repr(float(t)) for t in x] + [repr(float(m)), repr(float(v))]))
    _write(a.out, "\n".join(lines) + "\n")


def cmd_evaluate(a):
    conf = _config(a.config)
    fitted = harness.FittedModel.from_dict(_read_json(a.model))
    ds = data.load_csv(a.data, fitted.model.kernel.P)
    _, test = data.split(ds, _schemes(a.scheme, conf, ds.M, a.seed))
    scores = harness.evaluate(fitted, test, ds.meta.get("labels"))
    print(json.dumps(scores, indent=2, sort_keys=True))


def cmd_compare(a):
    conf = _config(a.config)
    ds = data.load_csv(a.data)
    if ds.M == 3 and not a.labels:
        labels = ["signal", "integral", "derivative"]
    else:
        labels = a.labels.split(",") if a.labels else None
    if labels:
        ds = data.MultiChannelDataset(ds.channels, {**ds.meta, "labels": labels})
    families = [Family.parse(f) for f in a.families.split(",") if f.strip()]
    report = harness.compare(ds, _schemes(a.scheme, conf, ds.M, a.seed), families, a.q,
                             _optimizer(conf, a.seed), a.seed, bool(conf.get("tie_noise", False)))
    out = Path(a.out)
    _write(out, report.to_json())
    _write(out.with_suffix(".csv"), report.to_csv())
    _write(out.with_suffix(".timing.json"), report.timing_json())
    print(report.to_csv(), end="")


def cmd_crosscov(a):
    params, _ = params_from_dict(_read_json(a.params))
    pairs = []
    for item in a.pairs.split(","):
        i, _, j = item.strip().partition("-")
        try:
            pairs.append((int(i), int(j)))
        except ValueError:
            raise InputError(f"bad channel pair {item!r}; use e.g. 1-2,3-4") from None
    lo, hi, n = _floats(a.grid, 3)
    grid = np.linspace(lo, hi, int(n))
    rows = harness.export_cross_covariance(params, pairs, grid, a.counterpart)
    _write(a.out, harness.curves_to_csv(rows))


def build_parser():
    p = argparse.ArgumentParser(prog="mocsm", description="Multi-output spectral mixture GPs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthetic signal / integral / derivative dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--q", type=int, default=4)
    g.add_argument("--n", type=int, default=300)
    g.add_argument("--interval", default="-10,10")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("init", help="spectral initialisation of kernel parameters")
    i.add_argument("--data", required=True)
    i.add_argument("--q", type=int, required=True)
    i.add_argument("--family", default="MOCSM")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_init)

    f = sub.add_parser("fit", help="optimise NLML from initial parameters")
    f.add_argument("--data", required=True)
    f.add_argument("--params", required=True)
    f.add_argument("--config")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="posterior mean and variance at given points")
    pr.add_argument("--model", required=True)
    pr.add_argument("--points", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--include-noise", action="store_true")
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="MAE of a fitted model on the test split of a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--scheme", help="per-channel schemes, e.g. random,first,last")
    e.add_argument("--config")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="fit several kernel families and tabulate MAE")
    c.add_argument("--data", required=True)
    c.add_argument("--families", default=",".join(harness.DEFAULT_FAMILIES))
    c.add_argument("--q", type=int, default=3)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--scheme")
    c.add_argument("--labels")
    c.add_argument("--config")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    x = sub.add_parser("crosscov", help="export cross-covariance curves")
    x.add_argument("--params", required=True)
    x.add_argument("--pairs", required=True, help="e.g. 1-2,2-3,3-4")
    x.add_argument("--grid", default="-5,5,201", help="lo,hi,count")
    x.add_argument("--counterpart", action="store_true", help="also export the MOSM/MOCSM counterpart")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_crosscov)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
