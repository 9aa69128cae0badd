import numpy as np
import pytest

from mocsm import data
from mocsm.errors import DimensionMismatch, EmptyFile, InputError, MalformedRow


def test_synthetic_defaults_and_determinism():
    a, b = data.generate_synthetic(), data.generate_synthetic()
    assert a.M == 3 and all(len(c) == 300 for c in a.channels)
    assert a[1].X[0, 0] == -10 and a[1].X[-1, 0] == 10
    assert len(a.meta["components"]) == 4
    assert data.dataset_to_csv(a) == data.dataset_to_csv(b)
    assert not a.equals(data.generate_synthetic(seed=1))


def test_synthetic_channels_derive_from_signal():
    ds = data.generate_synthetic(seed=2, n=100)
    dx = ds[1].X[1, 0] - ds[1].X[0, 0]
    assert np.array_equal(ds[2].y, data.numerical_integral(ds[1].y, dx))
    assert np.array_equal(ds[3].y, data.numerical_derivative(ds[1].y, dx))


def test_integral_and_derivative():
    assert np.allclose(data.numerical_integral(np.ones(5), 0.1), [0, 0.1, 0.2, 0.3, 0.4])
    d = data.numerical_derivative(3.0 * np.arange(10.0) + 1, 0.5)
    assert np.all(d[1:-1] == 6.0)
    x = np.arange(0, 6, 0.01)
    assert np.max(np.abs(data.numerical_derivative(np.sin(x), 0.01)[1:-1] - np.cos(x[1:-1]))) <= 1e-3


def test_first_half_split():
    ds = data.generate_synthetic(n=300)
    tr, te = data.split(ds, [data.SplitScheme.FirstHalf()] * 3)
    assert len(tr[2]) == 150 and tr[2].X.max() <= 0 and te[2].X.min() > 0


def test_last_half_n4():
    s = data.ChannelSeries(1, [3.0, 1.0, 2.0, 0.0], [30.0, 10.0, 20.0, 0.0])
    tr, te = data.SplitScheme.LastHalf().indices(s)
    assert sorted(s.X[tr, 0]) == [2.0, 3.0] and sorted(s.X[te, 0]) == [0.0, 1.0]


def test_random_half_reproducible_partition():
    ds = data.generate_synthetic(n=51)
    s = data.SplitScheme.RandomHalf(seed=4)
    a, b = s.indices(ds[1]), s.indices(ds[1])
    assert np.array_equal(a[0], b[0]) and len(a[0]) == 26
    assert sorted(np.concatenate(a)) == list(range(51))
    tr, te = data.split(ds, data.default_schemes(3, 4))
    for c, t, e in zip(ds.channels, tr.channels, te.channels):
        assert sorted(np.concatenate([t.y, e.y])) == sorted(c.y)


def test_parse_schemes():
    s = data.parse_schemes("random:3,first,last", 3, seed=9)
    assert [x.kind for x in s] == ["random", "first", "last"] and s[0].seed == 3 and s[1].seed == 9
    assert len(data.parse_schemes("all", 4)) == 4
    with pytest.raises(InputError):
        data.parse_schemes("random,first", 3)
    with pytest.raises(InputError):
        data.SplitScheme("sideways")


def test_csv_roundtrip(tmp_path):
    ds = data.generate_synthetic(seed=5, n=40)
    p = tmp_path / "d.csv"
    data.save_csv(ds, p)
    back = data.load_csv(p)
    assert back.equals(ds)
    assert data.dataset_to_csv(back) == p.read_text()


def test_csv_two_channels_in_order(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("channel,x1,y\n1,0.5,1\n2,0.1,2\n1,0.2,3\n")
    ds = data.load_csv(p)
    assert ds.M == 2 and list(ds[1].y) == [1.0, 3.0] and list(ds[1].X[:, 0]) == [0.5, 0.2]


def test_csv_missing_y(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("channel,x1,y\n1,0.5,1\n1,0.7\n")
    with pytest.raises(MalformedRow) as exc:
        data.load_csv(p)
    assert exc.value.line == 3


def test_csv_label_remap(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("channel,x1,y\n7,0,1\n3,0,2\n7,1,3\n")
    ds = data.load_csv(p)
    assert ds.M == 2 and list(ds[1].y) == [1.0, 3.0] and list(ds[2].y) == [2.0]
    assert ds.meta["labels"] == ["7", "3"]


def test_csv_empty_and_bad_header(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(EmptyFile):
        data.load_csv(p)
    p.write_text("chan,x,y\n1,0,0\n")
    with pytest.raises(MalformedRow):
        data.load_csv(p)


def test_load_points(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("channel,x1,x2\n1,0.5,1\n2,3,4\n")
    ch, X = data.load_points(p, 2)
    assert list(ch) == [1, 2] and X.shape == (2, 2)
    with pytest.raises(MalformedRow):
        data.load_points(p, 1)


def test_dataset_validation():
    with pytest.raises(DimensionMismatch):
        data.ChannelSeries(1, np.zeros(3), np.zeros(4))
    with pytest.raises(InputError):
        data.MultiChannelDataset((data.ChannelSeries(2, [0.0], [0.0]),))


def test_delayed_copy_is_shifted():
    ds = data.generate_delayed_copy(seed=0, noise=0.0)
    shift = round(ds.meta["delay"] / (ds[1].X[1, 0] - ds[1].X[0, 0]))
    assert np.allclose(ds[2].y[shift:], ds[1].y[:-shift])
