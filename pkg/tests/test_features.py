import numpy as np
import pytest

from sigsplit import ALL_CHANNELS, DeltaConfig, delta, delta_delta, extract, zscore
from conftest import make_sig
from oracles import delta_oracle, rel_err, zscore_oracle


def test_delta_small_example():
    # Hand-checked against the regression formula with replicated ends:
    # window [-1, 0, 1] / 2.
    out = delta(np.array([1.0, 3.0, 2.0, 5.0, 4.0]), DeltaConfig(1))
    assert out.tolist() == [1.0, 0.5, 1.0, 1.0, -0.5]


def test_delta_constant_is_zero():
    out = delta(np.full(20, 3.7), DeltaConfig(2))
    assert np.all(out == 0.0)


def test_delta_linear_ramp_interior():
    # On a ramp a*n + b the regression recovers the slope away from the
    # replicated endpoints, for any half-window.
    n = np.arange(30.0)
    for m in (1, 2, 3):
        out = delta(2.5 * n + 1.0, DeltaConfig(m))
        assert np.allclose(out[m:-m], 2.5, atol=1e-12)


def test_delta_quadratic_interior():
    # sum k*(n+k)^2 = 2n * sum k^2, so the interior slope is exactly 2n.
    n = np.arange(25.0)
    for m in (1, 2):
        out = delta(n**2, DeltaConfig(m))
        assert np.allclose(out[m:-m], 2.0 * n[m:-m], atol=1e-9)


def test_delta_matches_oracle():
    rng = np.random.default_rng(101)
    for _ in range(300):
        m = int(rng.integers(1, 4))
        length = int(rng.integers(2 * m + 1, 40))
        series = rng.uniform(-100, 100, length)
        got = delta(series, DeltaConfig(m))
        want = delta_oracle(series.tolist(), m)
        assert max(rel_err(g, w) for g, w in zip(got, want)) < 1e-12


def test_delta_is_linear():
    rng = np.random.default_rng(102)
    cfg = DeltaConfig(2)
    a = rng.standard_normal(25)
    b = rng.standard_normal(25)
    combined = delta(3.0 * a - 2.0 * b, cfg)
    assert np.allclose(combined, 3.0 * delta(a, cfg) - 2.0 * delta(b, cfg),
                       atol=1e-9)


def test_delta_rejects_short_series():
    with pytest.raises(ValueError, match="shorter than the delta window"):
        delta(np.zeros(4), DeltaConfig(2))
    # Exactly the window length is fine.
    assert delta(np.zeros(5), DeltaConfig(2)).shape == (5,)


def test_delta_config_validation():
    with pytest.raises(ValueError):
        DeltaConfig(0)


def test_delta_delta_is_double_application():
    rng = np.random.default_rng(103)
    s = rng.standard_normal(30)
    cfg = DeltaConfig(2)
    assert np.array_equal(delta_delta(s, cfg), delta(delta(s, cfg), cfg))
    assert np.all(delta_delta(np.full(15, 9.0), cfg) == 0.0)


def test_zscore_small_example():
    out = zscore(np.array([1.0, 2.0, 3.0]))
    want = zscore_oracle([1.0, 2.0, 3.0])
    assert np.allclose(out, want, atol=1e-12)
    assert abs(out[0] + 1.224744871) < 1e-6


def test_zscore_constant_guard():
    assert np.all(zscore(np.full(10, 5.0)) == 0.0)
    # A barely varying column still normalizes.
    v = np.array([0.0, 1e-6])
    assert np.allclose(zscore(v), [-1.0, 1.0])


def test_zscore_matches_oracle():
    rng = np.random.default_rng(104)
    for _ in range(200):
        length = int(rng.integers(2, 50))
        col = rng.uniform(-1000, 1000, length)
        got = zscore(col)
        want = zscore_oracle(col.tolist())
        assert max(rel_err(g, w) for g, w in zip(got, want)) < 1e-12


def test_zscore_population_std():
    # ddof must be 0: for [0, 2] the population std is 1, not sqrt(2).
    assert zscore(np.array([0.0, 2.0])).tolist() == [-1.0, 1.0]


def test_zscore_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        zscore(np.array([]))


def _wavy_sig(length=80, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, length)
    return make_sig(
        1000 + 300 * np.sin(2 * np.pi * 1.3 * t) + rng.normal(0, 5, length),
        800 + 200 * np.cos(2 * np.pi * 0.9 * t) + rng.normal(0, 5, length),
        500 + 100 * np.sin(2 * np.pi * 2.1 * t) ** 2,
        1800 + 200 * np.sin(2 * np.pi * 0.5 * t),
        600 + 80 * np.cos(2 * np.pi * 0.4 * t),
    )


def test_extract_shape_and_order():
    sig = _wavy_sig()
    fm = extract(sig)
    assert fm.data.shape == (80, 15)
    assert fm.channels == tuple(c.value for c in ALL_CHANNELS)


def test_extract_columns_are_normalized():
    fm = extract(_wavy_sig())
    means = fm.data.mean(axis=0)
    stds = fm.data.std(axis=0)
    assert np.all(np.abs(means) < 1e-9)
    assert np.all(np.abs(stds - 1.0) < 1e-6)


def test_extract_constant_channel_goes_to_zero():
    length = 40
    sig = make_sig(
        np.linspace(0, 100, length),
        np.linspace(0, 50, length),
        np.full(length, 512.0),   # flat pressure
        np.linspace(0, 3600, length),
        np.linspace(300, 900, length),
    )
    fm = extract(sig)
    # Flat pressure: the channel and its derivatives all collapse.
    for ch in ("p", "dp", "ddp"):
        assert np.all(fm.column(ch) == 0.0), ch


def test_extract_derivatives_from_raw_channels():
    # The delta columns must be the z-scored delta of the *raw* series.
    sig = _wavy_sig(seed=3)
    fm = extract(sig, DeltaConfig(2))
    raw_x = sig.channel_matrix()[:, 0]
    want = zscore(delta(raw_x, DeltaConfig(2)))
    assert np.allclose(fm.column("dx"), want, atol=1e-12)
    want2 = zscore(delta_delta(raw_x, DeltaConfig(2)))
    assert np.allclose(fm.column("ddx"), want2, atol=1e-12)


def test_extract_minimum_length():
    length = 5  # exactly the default window 2*2+1
    sig = make_sig(*[np.arange(length)] * 5)
    assert extract(sig).data.shape == (5, 15)
    short = make_sig(*[np.arange(4)] * 5)
    with pytest.raises(ValueError, match="shorter"):
        extract(short)


def test_extract_deterministic():
    sig = _wavy_sig(seed=9)
    a = extract(sig)
    b = extract(sig)
    assert np.array_equal(a.data, b.data)
