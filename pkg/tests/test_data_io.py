"""File formats, manifests, dataset loading, protocol split."""
import numpy as np
import pytest

from sigsplit.core import TEST1, SignatureKind
from sigsplit.data_io import (
    DatasetValidationError,
    ManifestEntry,
    ManifestError,
    Protocol,
    SvcParseError,
    format_manifest,
    load_dataset,
    load_model,
    parse_csv_signature,
    parse_manifest,
    parse_svc,
    read_signature,
    save_model,
    split_protocol,
    write_csv_signature,
    write_svc,
)
from sigsplit.dtw import dtw_enroll
from sigsplit.synthetic import write_corpus
from sigsplit.vq import vq_enroll

from conftest import full_matrix, make_sig

SVC_SAMPLE = """3
2933 5420 31275775 1 1550 790 439
2941 5437 31275785 1 1560 787 502
2950 5450 31275795 0 1570 785 0
"""


# ---------------------------------------------------------------------- svc


def test_parse_svc_field_mapping():
    sig = parse_svc(SVC_SAMPLE, user_id="u01", session=3)
    assert len(sig) == 3
    s = sig.samples[0]
    assert (s.x, s.y, s.t) == (2933.0, 5420.0, 31275775.0)
    assert (s.az, s.al, s.p) == (1550.0, 790.0, 439.0)
    assert sig.samples[2].p == 0.0  # pen-up row kept
    assert sig.user_id == "u01"
    assert sig.session == 3


def test_parse_svc_accepts_bytes_and_trailing_blank_lines():
    sig = parse_svc(SVC_SAMPLE.encode() + b"\n\n")
    assert len(sig) == 3


def test_parse_svc_empty_file():
    with pytest.raises(SvcParseError) as ei:
        parse_svc("   \n\n")
    assert ei.value.reason == "empty_file"


def test_parse_svc_bad_count():
    with pytest.raises(SvcParseError) as ei:
        parse_svc("three\n1 2 3 1 4 5 6\n")
    assert ei.value.reason == "bad_count"
    assert ei.value.line_no == 1
    with pytest.raises(SvcParseError) as ei:
        parse_svc("0\n")
    assert ei.value.reason == "bad_count"


def test_parse_svc_count_mismatch():
    with pytest.raises(SvcParseError) as ei:
        parse_svc("5\n1 2 3 1 4 5 6\n")
    assert ei.value.reason == "count_mismatch"


def test_parse_svc_short_line():
    with pytest.raises(SvcParseError) as ei:
        parse_svc("2\n1 2 3 1 4 5 6\n1 2 3\n")
    assert ei.value.reason == "short_line"
    assert ei.value.line_no == 3


def test_parse_svc_bad_token():
    with pytest.raises(SvcParseError) as ei:
        parse_svc("1\n1 2 3 1 4 x 6\n")
    assert ei.value.reason == "bad_token"
    assert ei.value.line_no == 2


def test_parse_svc_error_mentions_path():
    with pytest.raises(SvcParseError, match="sig.svc"):
        parse_svc("", path="sig.svc")


def test_svc_round_trip_preserves_tokens():
    sig = parse_svc(SVC_SAMPLE)
    again = parse_svc(write_svc(sig))
    assert len(again) == len(sig)
    for a, b in zip(again.samples, sig.samples):
        assert (a.x, a.y, a.p, a.az, a.al, a.t) == (b.x, b.y, b.p, b.az, b.al, b.t)


def test_write_svc_button_follows_pressure():
    sig = make_sig([1, 2], [3, 4], [0, 250], [10, 11], [20, 21])
    lines = write_svc(sig).splitlines()
    assert lines[1].split()[3] == "0"
    assert lines[2].split()[3] == "1"


# ---------------------------------------------------------------------- csv


def test_csv_round_trip():
    rng = np.random.default_rng(81)
    sig = make_sig(
        rng.uniform(0, 5000, 20),
        rng.uniform(0, 4000, 20),
        rng.uniform(0, 1000, 20),
        rng.uniform(0, 3600, 20),
        rng.uniform(0, 900, 20),
    )
    again = parse_csv_signature(write_csv_signature(sig))
    assert len(again) == 20
    for a, b in zip(again.samples, sig.samples):
        # repr round trip is exact
        assert (a.x, a.y, a.p, a.az, a.al, a.t) == (b.x, b.y, b.p, b.az, b.al, b.t)


def test_csv_header_and_body_errors():
    with pytest.raises(SvcParseError) as ei:
        parse_csv_signature("a,b,c\n1,2,3\n")
    assert ei.value.reason == "bad_count"
    with pytest.raises(SvcParseError) as ei:
        parse_csv_signature("x,y,p,az,al\n1,2,3\n")
    assert ei.value.reason == "short_line"
    with pytest.raises(SvcParseError) as ei:
        parse_csv_signature("x,y,p,az,al\n1,2,oops,4,5\n")
    assert ei.value.reason == "bad_token"
    with pytest.raises(SvcParseError) as ei:
        parse_csv_signature("x,y,p,az,al\n")
    assert ei.value.reason == "count_mismatch"
    with pytest.raises(SvcParseError) as ei:
        parse_csv_signature("")
    assert ei.value.reason == "empty_file"


def test_read_signature_dispatches_on_extension(tmp_path):
    sig = make_sig([1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [9.0, 10.0])
    svc = tmp_path / "a.svc"
    svc.write_text(write_svc(sig))
    assert len(read_signature(str(svc))) == 2
    csvp = tmp_path / "b.csv"
    csvp.write_text(write_csv_signature(sig))
    got = read_signature(str(csvp), user_id="u", session=2)
    assert got.samples[1].p == 6.0
    assert got.session == 2


# ----------------------------------------------------------------- manifest


def test_parse_manifest_with_comments_and_aliases():
    text = (
        "# path,user_id,kind,session\n"
        "\n"
        "u01/a.svc, u01, genuine, 1\n"
        "u01/b.svc,u01,skilled,2\n"
        "u01/c.svc,u01,skilled_forgery,3\n"
    )
    entries = parse_manifest(text)
    assert len(entries) == 3
    assert entries[0] == ManifestEntry("u01/a.svc", "u01", SignatureKind.GENUINE, 1)
    assert entries[1].kind is SignatureKind.SKILLED_FORGERY
    assert entries[2].kind is SignatureKind.SKILLED_FORGERY


def test_parse_manifest_errors():
    with pytest.raises(ManifestError, match="line 1"):
        parse_manifest("a.svc,u01,genuine\n")
    with pytest.raises(ManifestError, match="unknown kind"):
        parse_manifest("a.svc,u01,traced,1\n")
    with pytest.raises(ManifestError, match="session"):
        parse_manifest("a.svc,u01,genuine,one\n")
    with pytest.raises(ManifestError, match="no records"):
        parse_manifest("# only a comment\n")


def test_format_manifest_round_trip():
    entries = (
        ManifestEntry("u01/a.svc", "u01", SignatureKind.GENUINE, 1),
        ManifestEntry("u02/f.svc", "u02", SignatureKind.SKILLED_FORGERY, 4),
    )
    assert parse_manifest(format_manifest(entries)) == entries


# ------------------------------------------------------------- load_dataset


def test_load_dataset_matches_in_memory_corpus(tiny_corpus, tmp_path):
    out = str(tmp_path / "corpus")
    write_corpus(tiny_corpus, out)
    ds = load_dataset(out)
    want = tiny_corpus.dataset
    assert [u.user_id for u in ds.users] == [u.user_id for u in want.users]
    for got_u, want_u in zip(ds.users, want.users):
        assert len(got_u.genuine) == len(want_u.genuine)
        assert len(got_u.skilled) == len(want_u.skilled)
        for got_s, want_s in zip(got_u.genuine, want_u.genuine):
            assert got_s.session == want_s.session
            assert got_s.kind is SignatureKind.GENUINE
            # synthetic samples are integer-valued, so the svc files are exact
            assert np.array_equal(got_s.channel_matrix(), want_s.channel_matrix())


def test_load_dataset_collects_all_errors(tiny_corpus, tmp_path):
    out = str(tmp_path / "corpus")
    write_corpus(tiny_corpus, out)
    # corrupt one file and drop another
    first = tiny_corpus.manifest[0].path
    second = tiny_corpus.manifest[1].path
    (tmp_path / "corpus" / first).write_text("not a count\n1 2 3 1 4 5 6\n")
    (tmp_path / "corpus" / second).unlink()
    with pytest.raises(DatasetValidationError) as ei:
        load_dataset(out)
    assert len(ei.value.errors) == 2
    joined = "\n".join(ei.value.errors)
    assert first in joined and second in joined


def test_load_dataset_enforces_min_length(tiny_corpus, tmp_path):
    out = str(tmp_path / "corpus")
    write_corpus(tiny_corpus, out)
    with pytest.raises(DatasetValidationError) as ei:
        load_dataset(out, min_length=10_000)
    # every file is too short now
    assert len(ei.value.errors) == len(tiny_corpus.manifest)


# ----------------------------------------------------------------- protocol


def test_split_protocol_partitions_by_session_order(tiny_corpus):
    split = split_protocol(tiny_corpus.dataset, Protocol(n_train=4))
    assert split.user_ids() == tuple(u.user_id for u in tiny_corpus.dataset.users)
    for u in tiny_corpus.dataset.users:
        tr = split.train[u.user_id]
        te = split.test_genuine[u.user_id]
        assert len(tr) == 4 and len(te) == len(u.genuine) - 4
        assert tr == u.genuine[:4] and te == u.genuine[4:]
        sessions = [s.session for s in tr] + [s.session for s in te]
        assert sessions == sorted(sessions)
        assert split.test_skilled[u.user_id] == u.skilled


def test_split_protocol_random_pool_excludes_target(tiny_corpus):
    split = split_protocol(tiny_corpus.dataset, Protocol(n_train=5))
    target = split.user_ids()[0]
    pool = split.random_pool(target)
    assert all(s.user_id != target for s in pool)
    expect = sum(
        len(split.test_genuine[u]) for u in split.user_ids() if u != target
    )
    assert len(pool) == expect


def test_split_protocol_names_short_users(tiny_corpus):
    with pytest.raises(ValueError) as ei:
        split_protocol(tiny_corpus.dataset, Protocol(n_train=6))
    msg = str(ei.value)
    for u in tiny_corpus.dataset.users:
        assert u.user_id in msg


def test_protocol_validation():
    with pytest.raises(ValueError):
        Protocol(n_train=0)


# -------------------------------------------------------------- model files


def test_save_load_vq_model(tmp_path):
    rng = np.random.default_rng(90)
    model = vq_enroll([full_matrix(rng, rows=60)], TEST1, bits=2, user_id="u03")
    path = str(tmp_path / "u03_vq.json")
    save_model(model, path)
    back = load_model(path)
    assert type(back).__name__ == "VqModel"
    assert back.user_id == "u03"
    assert np.array_equal(back.cb1.centroids, model.cb1.centroids)


def test_save_load_dtw_model(tmp_path):
    rng = np.random.default_rng(91)
    model = dtw_enroll([full_matrix(rng, rows=14)], TEST1, user_id="u04")
    path = str(tmp_path / "u04_dtw.json")
    save_model(model, path)
    back = load_model(path)
    assert type(back).__name__ == "DtwModel"
    assert np.array_equal(back.refs1[0].data, model.refs1[0].data)


def test_load_model_unknown_engine(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"engine": "svm"}\n')
    with pytest.raises(ValueError, match="svm"):
        load_model(str(path))
