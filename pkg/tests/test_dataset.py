import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import mat_bytes
from oracles import matmul_loops
from iclabel_engine.dataset import (
    ChannelLoc,
    EegDataset,
    IcaDecomposition,
    MissingField,
    PayloadMissing,
    ShapeMismatch,
    from_matfile,
    ica_activations,
    load_set,
)
from iclabel_engine.matreader import parse_mat


def identity_file(**overrides):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((2, 10))
    fields = {
        "nbchan": 2.0,
        "srate": 100.0,
        "pnts": 10.0,
        "trials": 1.0,
        "data": data,
        "icaweights": np.eye(2),
        "icasphere": np.eye(2),
        "icawinv": np.eye(2),
    }
    fields.update(overrides)
    fields = {k: v for k, v in fields.items() if v is not None}
    return parse_mat(mat_bytes(fields)), data


def make_ds(data, weights, sphere=None, chans=None):
    n_chan, pnts, trials = data.shape
    chans = tuple(range(n_chan)) if chans is None else tuple(chans)
    sphere = np.eye(len(chans)) if sphere is None else sphere
    winv = np.linalg.pinv(weights @ sphere)
    return EegDataset(
        n_chan=n_chan, srate=100.0, pnts=pnts, trials=trials, data=data,
        chanlocs=tuple(ChannelLoc(f"E{i}") for i in range(n_chan)),
        ica=IcaDecomposition(weights, sphere, winv, chans),
    )


def test_identity_round_trip():
    f, data = identity_file()
    ds = from_matfile(f)
    assert (ds.n_chan, ds.pnts, ds.trials, ds.srate) == (2, 10, 1, 100.0)
    np.testing.assert_array_equal(ds.data[:, :, 0], data)
    np.testing.assert_array_equal(ds.ica.weights, np.eye(2))
    assert ds.ica.chan_indices == (0, 1)
    assert all(not c.has_position for c in ds.chanlocs)
    np.testing.assert_array_equal(ica_activations(ds)[:, :, 0], data)


def test_missing_weights():
    f, _ = identity_file(icaweights=None)
    with pytest.raises(MissingField):
        from_matfile(f)


def test_missing_winv_is_derived():
    w = np.array([[2.0, 1.0], [0.0, 3.0]])
    f, _ = identity_file(icaweights=w, icawinv=None)
    ds = from_matfile(f)
    np.testing.assert_allclose(ds.ica.winv, np.linalg.inv(w), atol=1e-12)


def test_shape_mismatch():
    f, _ = identity_file(pnts=11.0)
    with pytest.raises(ShapeMismatch):
        from_matfile(f)


def test_payload_missing(tmp_path):
    f, _ = identity_file(data="gone.fdt")
    with pytest.raises(PayloadMissing):
        from_matfile(f)
    with pytest.raises(PayloadMissing):
        from_matfile(f, lambda name: (tmp_path / name).read_bytes())


def test_epoched_fixture(epoched):
    ds = epoched
    assert (ds.n_chan, ds.srate, ds.pnts, ds.trials, ds.n_comp) == (12, 128.0, 256, 6, 12)
    assert ds.data.dtype == np.float64
    assert all(c.has_position for c in ds.chanlocs)
    assert ds.chanlocs[0].label == "E1" and ds.chanlocs[0].radius == 0.0


def test_continuous_fixture_fdt(continuous, fixtures_dir):
    ds = continuous
    assert (ds.n_chan, ds.pnts, ds.trials, ds.n_comp) == (12, 2000, 1, 11)
    assert 4 not in ds.ica.chan_indices
    assert not ds.chanlocs[4].has_position
    raw = np.frombuffer((fixtures_dir / "synthetic_continuous.fdt").read_bytes(), "<f4")
    np.testing.assert_array_equal(ds.data[:, :, 0], raw.reshape(12, 2000, order="F"))


def test_stored_icaact_ignored(epoched):
    # fixture carries an empty icaact; activations come from weights @ sphere @ data
    np.testing.assert_allclose(
        ica_activations(epoched)[:, :, 0],
        epoched.ica.weights @ epoched.ica.sphere @ epoched.data[:, :, 0],
        atol=1e-12,
    )


def test_diagonal_unmixing():
    data = np.ones((2, 1, 1))
    ds = make_ds(data, np.array([[2.0, 0.0], [0.0, 3.0]]))
    assert ica_activations(ds)[:, 0, 0].tolist() == [2.0, 3.0]


def test_against_loop_oracle():
    rng = np.random.default_rng(7)
    data = rng.standard_normal((4, 9, 2))
    weights = rng.standard_normal((3, 4))
    sphere = rng.standard_normal((4, 4))
    ds = make_ds(data, weights, sphere)
    unmix = matmul_loops(weights, sphere)
    for t in range(2):
        expected = matmul_loops(unmix, data[:, :, t])
        np.testing.assert_allclose(ica_activations(ds)[:, :, t], expected, rtol=0, atol=1e-12)


def test_channel_subset():
    rng = np.random.default_rng(3)
    data = rng.standard_normal((5, 6, 1))
    weights = rng.standard_normal((2, 3))
    ds = make_ds(data, weights, chans=(0, 2, 4))
    np.testing.assert_allclose(ica_activations(ds)[:, :, 0], weights @ data[[0, 2, 4], :, 0], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    x=arrays(np.float64, (3, 5, 2), elements=st.floats(-1e3, 1e3)),
    y=arrays(np.float64, (3, 5, 2), elements=st.floats(-1e3, 1e3)),
    a=st.floats(-10, 10),
    b=st.floats(-10, 10),
)
def test_linearity(x, y, a, b):
    w = np.array([[1.0, -2.0, 0.5], [0.3, 0.0, 4.0]])
    act = lambda d: ica_activations(make_ds(d, w))  # noqa: E731
    lhs = act(a * x + b * y)
    rhs = a * act(x) + b * act(y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + np.abs(rhs).max()))


def test_loading_is_deterministic(fixtures_dir):
    a = load_set(fixtures_dir / "synthetic_epoched.set")
    b = load_set(fixtures_dir / "synthetic_epoched.set")
    np.testing.assert_array_equal(a.data, b.data)
    assert a.chanlocs == b.chanlocs
    np.testing.assert_array_equal(a.ica.winv, b.ica.winv)
