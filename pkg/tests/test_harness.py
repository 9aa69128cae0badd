import numpy as np
import pytest

from mocsm import data, harness
from mocsm.errors import ChannelOutOfRange, DimensionMismatch
from mocsm.gp import OptimizerConfig
from mocsm.kernels import Family, kernel_eval, param_count

FAST = OptimizerConfig(restarts=1, max_iter=60)


@pytest.mark.parametrize("a,b,want", [([1, 2], [1, 3], 0.5), ([4, 5, 6], [4, 5, 6], 0.0),
                                      ([0, 0, 0], [1, -1, 2], 4 / 3)])
def test_mae(a, b, want):
    assert harness.mae(a, b) == pytest.approx(want)


def test_mae_length_mismatch():
    with pytest.raises(DimensionMismatch):
        harness.mae([1, 2], [1])


@pytest.fixture(scope="module")
def small_report():
    ds = data.generate_synthetic(seed=2, Q=2, n=60)
    return harness.compare(ds, data.default_schemes(3, 2), harness.DEFAULT_FAMILIES, 2, FAST, 2)


def test_compare_layout(small_report):
    rep = small_report
    assert [r.family for r in rep.rows] == ["SM_LMC", "CSM", "MOSM", "MOCSM"]
    assert rep.tasks == ["signal", "integral", "derivative"]
    for r in rep.rows:
        assert r.error is None and set(r.mae) == set(rep.tasks)
        assert all(v >= 0 for v in r.mae.values())
        assert r.param_count == param_count(r.family, 2, 3, 1)


def test_report_roundtrips(small_report):
    rep = small_report
    back = harness.ComparisonReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    csv_back = harness.ComparisonReport.from_csv(rep.to_csv())
    assert csv_back.to_csv() == rep.to_csv()
    for a, b in zip(rep.rows, csv_back.rows):
        assert a.mae == b.mae and a.nlml == b.nlml and a.param_count == b.param_count


def test_compare_isolates_failures(monkeypatch):
    ds = data.generate_synthetic(seed=1, Q=2, n=40)
    real = harness.fit_family

    def flaky(train, family, *a, **k):
        if family is Family.CSM:
            from mocsm.errors import AllRestartsFailed
            raise AllRestartsFailed("boom")
        return real(train, family, *a, **k)

    monkeypatch.setattr(harness, "fit_family", flaky)
    rep = harness.compare(ds, data.default_schemes(3), ["CSM", "MOCSM"], 2, FAST)
    assert "boom" in rep.row("CSM").error and rep.row("CSM").mae == {}
    assert rep.row("MOCSM").error is None


def test_constant_series_bounded_by_std():
    rng = np.random.default_rng(0)
    x = np.linspace(0, 10, 60)
    y = 2.0 + 0.1 * rng.normal(size=60)
    ds = data.MultiChannelDataset((data.ChannelSeries(1, x, y),))
    rep = harness.compare(ds, [data.SplitScheme.RandomHalf(0)], ["MOCSM"], 1, OptimizerConfig(restarts=1))
    assert rep.rows[0].mae["ch1"] <= np.std(y)


def test_fitted_model_roundtrip():
    ds = data.generate_synthetic(seed=3, Q=2, n=40)
    fitted = harness.fit_family(ds, Family.MOCSM, 2, FAST)
    back = harness.FittedModel.from_dict(fitted.to_dict())
    ch, X = np.array([1, 2, 3]), np.array([[0.1], [0.2], [11.0]])
    a, b = fitted.predict(ch, X), back.predict(ch, X)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(a.variance, b.variance)


def test_crosscov_examples():
    p = harness.weight_scale_params()
    rows = harness.export_cross_covariance(p, [(2, 2)], [0.0])
    assert len(rows) == 1 and rows[0][3] == pytest.approx(0.6)
    with pytest.raises(ChannelOutOfRange):
        harness.export_cross_covariance(p, [(1, 5)], [0.0])
    text = harness.curves_to_csv(rows)
    assert text.splitlines()[0] == "tau,pair_label,family,value" and len(text.splitlines()) == 2


def test_weight_scale_curves():
    p = harness.weight_scale_params()
    grid = np.linspace(-3, 3, 601)
    rows = harness.export_cross_covariance(p, [(1, 2), (3, 4)], grid, with_counterpart=True)
    peak = {}
    for _, label, fam, v in rows:
        peak[label, fam] = max(peak.get((label, fam), -np.inf), v)
    assert peak["3x4", "MOSM"] > 7 * peak["3x4", "MOCSM"]
    assert peak["1x2", "MOSM"] < peak["1x2", "MOCSM"]


def test_crosscov_matches_kernel():
    p = harness.weight_scale_params(theta=[0, 0.2, 0.4, 0.6], phi=[0, 0.1, 0.2, 0.3])
    grid = np.linspace(-1, 1, 5)
    rows = harness.export_cross_covariance(p, [(1, 4)], grid)
    assert np.allclose([r[3] for r in rows], kernel_eval(p, 1, 4, grid), rtol=0, atol=0)


@pytest.mark.slow
def test_delayed_copy_mae_beats_independent():
    wins = 0
    for seed in range(5):
        ds = data.generate_delayed_copy(seed)
        schemes = [data.SplitScheme("all"), data.SplitScheme.LastHalf()]
        rep = harness.compare(ds, schemes, ["MOCSM", "SM"], 2, OptimizerConfig(seed=seed, restarts=2), seed)
        wins += rep.row("MOCSM").mae["delayed"] < rep.row("SM").mae["delayed"]
    assert wins >= 4
