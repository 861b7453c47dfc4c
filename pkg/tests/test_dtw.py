"""Elastic matching: alignment cost, models, scoring."""
import numpy as np
import pytest

from sigsplit.core import TEST1, WHOLE, FeatureMatrix
from sigsplit.dtw import DtwConfig, DtwModel, dtw, dtw_enroll, dtw_score

from conftest import full_matrix
from oracles import dtw_oracle, rel_err

RAW = DtwConfig(path_normalize=False)


def _seq(values, dim=1):
    v = np.asarray(values, dtype=np.float64).reshape(len(values), dim)
    return FeatureMatrix(v, tuple(f"c{j}" for j in range(dim)))


def test_identical_sequences_cost_exactly_zero():
    rng = np.random.default_rng(1)
    m = FeatureMatrix(rng.normal(scale=200, size=(30, 4)), ("a", "b", "c", "d"))
    assert dtw(m, m) == 0.0
    assert dtw(m, m, RAW) == 0.0


def test_constant_sequences_frozen_example():
    # Every cell costs (1-2)^2 = 1; the cheapest monotone path through a
    # 3x4 grid visits max(3, 4) cells.
    a = _seq([1.0, 1.0, 1.0])
    b = _seq([2.0, 2.0, 2.0, 2.0])
    assert dtw(a, b, RAW) == 4.0
    assert dtw(a, b) == 4.0 / 7.0


def test_single_row_sequences():
    # One cell only: the local distance itself.
    a = _seq([3.0])
    b = _seq([7.0])
    assert dtw(a, b, RAW) == 16.0
    assert dtw(a, b, DtwConfig("euclidean", False)) == 4.0
    assert dtw(a, b) == 8.0


def test_matches_path_enumeration_oracle():
    rng = np.random.default_rng(31)
    for _ in range(120):
        la, lb = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        a = rng.normal(size=(la, d))
        b = rng.normal(size=(lb, d))
        labels = tuple(f"c{j}" for j in range(d))
        fa, fb = FeatureMatrix(a, labels), FeatureMatrix(b, labels)
        for squared in (True, False):
            for normalize in (True, False):
                cfg = DtwConfig(
                    "squared_euclidean" if squared else "euclidean", normalize
                )
                want = dtw_oracle(a, b, squared=squared, normalize=normalize)
                assert rel_err(dtw(fa, fb, cfg), want) < 1e-12


def test_cost_is_symmetric():
    rng = np.random.default_rng(8)
    labels = ("c0", "c1", "c2")
    for _ in range(20):
        a = FeatureMatrix(rng.normal(size=(int(rng.integers(2, 40)), 3)), labels)
        b = FeatureMatrix(rng.normal(size=(int(rng.integers(2, 40)), 3)), labels)
        assert dtw(a, b) == dtw(b, a)


def test_normalization_divides_by_length_sum():
    rng = np.random.default_rng(9)
    labels = ("c0", "c1")
    a = FeatureMatrix(rng.normal(size=(17, 2)), labels)
    b = FeatureMatrix(rng.normal(size=(23, 2)), labels)
    assert dtw(a, b) == dtw(a, b, RAW) / 40


def test_euclidean_variant_uses_root_costs():
    a = _seq([0.0, 0.0])
    b = _seq([3.0])
    # two cells, each |0-3| = 3
    assert dtw(a, b, DtwConfig("euclidean", False)) == 6.0
    assert dtw(a, b, RAW) == 18.0


def test_config_rejects_unknown_distance():
    with pytest.raises(ValueError, match="local_distance"):
        DtwConfig(local_distance="manhattan")


def test_input_validation():
    a = _seq([1.0, 2.0])
    with pytest.raises(ValueError, match="channel mismatch"):
        dtw(a, FeatureMatrix(np.zeros((2, 2)), ("c0", "c1")))
    with pytest.raises(ValueError, match="empty"):
        dtw(a, FeatureMatrix(np.zeros((0, 1)), ("c0",)))
    z = FeatureMatrix(np.zeros((3, 0)), ())
    with pytest.raises(ValueError, match="zero-dimensional"):
        dtw(z, z)


# ---------------------------------------------------------- enroll / score


def test_enroll_keeps_references_verbatim():
    rng = np.random.default_rng(40)
    train = [full_matrix(rng, rows=25) for _ in range(3)]
    model = dtw_enroll(train, TEST1, user_id="u02")
    assert model.n_references == 3
    assert model.split_name == "TEST1"
    for ref, src in zip(model.refs1, train):
        proj = src.select(TEST1.set1)
        assert np.array_equal(ref.data, proj.data)
        assert ref.channels == proj.channels


def test_score_is_minimum_over_references():
    rng = np.random.default_rng(41)
    train = [full_matrix(rng, rows=20) for _ in range(4)]
    model = dtw_enroll(train, TEST1)
    probe = full_matrix(rng, rows=22)
    pair = dtw_score(model, probe, TEST1)
    s1, s2 = probe.select(TEST1.set1), probe.select(TEST1.set2)
    d1s = [dtw(r, s1) for r in model.refs1]
    d2s = [dtw(r, s2) for r in model.refs2]
    assert pair.d1 == min(d1s)
    assert pair.d2 == min(d2s)


def test_training_signature_scores_zero_against_itself():
    rng = np.random.default_rng(42)
    train = [full_matrix(rng, rows=30) for _ in range(2)]
    model = dtw_enroll(train, TEST1)
    pair = dtw_score(model, train[1], TEST1)
    assert pair.d1 == 0.0
    assert pair.d2 == 0.0


def test_more_references_never_raise_the_score():
    rng = np.random.default_rng(43)
    train = [full_matrix(rng, rows=18) for _ in range(5)]
    small = dtw_enroll(train[:2], TEST1)
    big = dtw_enroll(train, TEST1)
    for _ in range(10):
        probe = full_matrix(rng, rows=21)
        a = dtw_score(small, probe, TEST1)
        b = dtw_score(big, probe, TEST1)
        assert b.d1 <= a.d1
        assert b.d2 <= a.d2


def test_whole_split_has_no_second_set():
    rng = np.random.default_rng(44)
    model = dtw_enroll([full_matrix(rng, rows=15)], WHOLE)
    assert model.refs2 == ()
    pair = dtw_score(model, full_matrix(rng, rows=16), WHOLE)
    assert pair.d2 is None


def test_score_split_mismatch_raises():
    rng = np.random.default_rng(45)
    model = dtw_enroll([full_matrix(rng, rows=15)], WHOLE)
    with pytest.raises(ValueError, match="enrolled for split"):
        dtw_score(model, full_matrix(rng, rows=15), TEST1)


def test_model_validation():
    with pytest.raises(ValueError, match="at least one reference"):
        DtwModel(user_id="u", split_name="WHOLE", refs1=())
    rng = np.random.default_rng(46)
    a = FeatureMatrix(rng.normal(size=(4, 1)), ("c0",))
    with pytest.raises(ValueError, match="pair up"):
        DtwModel(user_id="u", split_name="TEST1", refs1=(a, a), refs2=(a,))


def test_enroll_requires_training_data():
    with pytest.raises(ValueError):
        dtw_enroll([], TEST1)


def test_model_serialization_round_trip():
    rng = np.random.default_rng(47)
    train = [full_matrix(rng, rows=12) for _ in range(2)]
    model = dtw_enroll(train, TEST1, user_id="u09")
    back = DtwModel.from_dict(model.to_dict())
    assert back.user_id == "u09"
    assert back.split_name == "TEST1"
    assert len(back.refs1) == 2 and len(back.refs2) == 2
    for got, want in zip(back.refs1 + back.refs2, model.refs1 + model.refs2):
        assert np.array_equal(got.data, want.data)
        assert got.channels == want.channels
    with pytest.raises(ValueError, match="engine"):
        DtwModel.from_dict({"engine": "vq"})
