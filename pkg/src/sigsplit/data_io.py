"""Dataset ingestion and persistence.

Reads the tablet capture format (one count line, then one line per pen
sample with seven integer fields: x, y, timestamp, button, azimuth,
altitude, pressure) plus a generic CSV fallback, resolves a manifest
into a dataset, splits it into the enrollment/test protocol, and
persists matcher models as JSON.
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .core import Dataset, RawSignature, Sample, SignatureKind, UserRecord
from .dtw import DtwModel
from .vq import VqModel

__all__ = [
    "SvcParseError",
    "ManifestError",
    "DatasetValidationError",
    "ManifestEntry",
    "Protocol",
    "ProtocolSplit",
    "parse_svc",
    "write_svc",
    "parse_csv_signature",
    "write_csv_signature",
    "read_signature",
    "parse_manifest",
    "format_manifest",
    "load_dataset",
    "split_protocol",
    "save_model",
    "load_model",
]


class SvcParseError(ValueError):
    """Structured parse failure.  ``reason`` is one of: empty_file,
    bad_count, count_mismatch, short_line, bad_token."""

    def __init__(self, message: str, reason: str, line_no: int | None = None,
                 path: str | None = None):
        prefix = f"{path}: " if path else ""
        at = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{prefix}{message}{at}")
        self.reason = reason
        self.line_no = line_no
        self.path = path


class ManifestError(ValueError):
    pass


class DatasetValidationError(ValueError):
    """Raised after a full load pass; carries every problem found."""

    def __init__(self, errors: list[str]):
        super().__init__(
            f"{len(errors)} dataset problem(s):\n" + "\n".join(errors)
        )
        self.errors = list(errors)


def _decode(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    return text


def parse_svc(
    text: str | bytes,
    user_id: str = "",
    kind: SignatureKind = SignatureKind.GENUINE,
    session: int | None = None,
    path: str | None = None,
) -> RawSignature:
    """Parse one tablet capture file.

    First line: declared sample count.  Each following line: seven
    whitespace-separated integers x, y, timestamp, button, azimuth,
    altitude, pressure.  The button column is validated and dropped;
    pressure 0 already marks pen-up samples.
    """
    lines = _decode(text).splitlines()
    stripped = [ln.strip() for ln in lines]
    while stripped and stripped[-1] == "":
        stripped.pop()
    if not stripped:
        raise SvcParseError("file is empty", "empty_file", path=path)
    try:
        declared = int(stripped[0])
    except ValueError:
        raise SvcParseError(
            f"first line must be the sample count, got {stripped[0]!r}",
            "bad_count",
            line_no=1,
            path=path,
        ) from None
    body = stripped[1:]
    if declared < 1:
        raise SvcParseError(
            f"declared sample count {declared} must be >= 1",
            "bad_count",
            line_no=1,
            path=path,
        )
    if len(body) != declared:
        raise SvcParseError(
            f"declared {declared} samples but file has {len(body)} data lines",
            "count_mismatch",
            path=path,
        )
    samples = []
    for i, line in enumerate(body):
        line_no = i + 2
        fields = line.split()
        if len(fields) < 7:
            raise SvcParseError(
                f"expected 7 fields, got {len(fields)}",
                "short_line",
                line_no=line_no,
                path=path,
            )
        try:
            x, y, t, _button, az, al, p = (int(f) for f in fields[:7])
        except ValueError:
            raise SvcParseError(
                f"non-numeric field in {line!r}",
                "bad_token",
                line_no=line_no,
                path=path,
            ) from None
        samples.append(Sample(x=x, y=y, p=p, az=az, al=al, t=t))
    return RawSignature(
        samples=tuple(samples),
        user_id=user_id,
        kind=kind,
        session=session,
        source_path=path,
    )


def write_svc(sig: RawSignature) -> str:
    """Render a signature back to the tablet format.  Values round to
    integers; the button column is re-derived from pressure (down when
    pressure > 0) and timestamps fall back to 10 ms steps."""
    out = [str(len(sig.samples))]
    for i, s in enumerate(sig.samples):
        t = s.t if s.t is not None else 10.0 * i
        button = 1 if s.p > 0 else 0
        out.append(
            f"{int(round(s.x))} {int(round(s.y))} {int(round(t))} {button} "
            f"{int(round(s.az))} {int(round(s.al))} {int(round(s.p))}"
        )
    return "\n".join(out) + "\n"


_CSV_BASE = ["x", "y", "p", "az", "al"]


def parse_csv_signature(
    text: str | bytes,
    user_id: str = "",
    kind: SignatureKind = SignatureKind.GENUINE,
    session: int | None = None,
    path: str | None = None,
) -> RawSignature:
    """Parse the generic CSV signature format: header x,y,p,az,al with
    an optional trailing t column, one sample per row."""
    rows = list(csv.reader(io.StringIO(_decode(text))))
    rows = [r for r in rows if r]
    if not rows:
        raise SvcParseError("file is empty", "empty_file", path=path)
    header = [h.strip() for h in rows[0]]
    if header != _CSV_BASE and header != _CSV_BASE + ["t"]:
        raise SvcParseError(
            f"csv header must be {','.join(_CSV_BASE)}[,t], got {','.join(header)}",
            "bad_count",
            line_no=1,
            path=path,
        )
    has_t = len(header) == 6
    samples = []
    for i, row in enumerate(rows[1:]):
        line_no = i + 2
        if len(row) != len(header):
            raise SvcParseError(
                f"expected {len(header)} fields, got {len(row)}",
                "short_line",
                line_no=line_no,
                path=path,
            )
        try:
            vals = [float(f) for f in row]
        except ValueError:
            raise SvcParseError(
                f"non-numeric field in {row!r}",
                "bad_token",
                line_no=line_no,
                path=path,
            ) from None
        samples.append(
            Sample(
                x=vals[0],
                y=vals[1],
                p=vals[2],
                az=vals[3],
                al=vals[4],
                t=vals[5] if has_t else None,
            )
        )
    if not samples:
        raise SvcParseError("csv has a header but no samples", "count_mismatch", path=path)
    return RawSignature(
        samples=tuple(samples), user_id=user_id, kind=kind, session=session,
        source_path=path,
    )


def write_csv_signature(sig: RawSignature) -> str:
    has_t = all(s.t is not None for s in sig.samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_BASE + (["t"] if has_t else []))
    for s in sig.samples:
        row = [repr(s.x), repr(s.y), repr(s.p), repr(s.az), repr(s.al)]
        if has_t:
            row.append(repr(s.t))
        w.writerow(row)
    return buf.getvalue()


def read_signature(
    path: str,
    user_id: str = "",
    kind: SignatureKind = SignatureKind.GENUINE,
    session: int | None = None,
) -> RawSignature:
    """Load one signature file, dispatching on the extension
    (.svc -> tablet format, .csv -> generic CSV)."""
    with open(path, "rb") as fh:
        text = fh.read()
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return parse_csv_signature(text, user_id, kind, session, path=path)
    return parse_svc(text, user_id, kind, session, path=path)


class ManifestEntry(NamedTuple):
    path: str
    user_id: str
    kind: SignatureKind
    session: int


_KIND_ALIASES = {
    "genuine": SignatureKind.GENUINE,
    "skilled": SignatureKind.SKILLED_FORGERY,
    "skilled_forgery": SignatureKind.SKILLED_FORGERY,
}


def parse_manifest(text: str | bytes) -> tuple[ManifestEntry, ...]:
    """Parse a manifest: one `path,user_id,kind,session` record per
    line; blank lines and `#` comments are skipped."""
    entries = []
    for line_no, raw in enumerate(_decode(text).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ManifestError(
                f"manifest line {line_no}: expected 4 comma-separated fields, "
                f"got {len(parts)}: {raw!r}"
            )
        path, user_id, kind_s, session_s = parts
        if kind_s not in _KIND_ALIASES:
            raise ManifestError(
                f"manifest line {line_no}: unknown kind {kind_s!r} "
                f"(expected one of {sorted(_KIND_ALIASES)})"
            )
        try:
            session = int(session_s)
        except ValueError:
            raise ManifestError(
                f"manifest line {line_no}: session must be an integer, got "
                f"{session_s!r}"
            ) from None
        entries.append(ManifestEntry(path, user_id, _KIND_ALIASES[kind_s], session))
    if not entries:
        raise ManifestError("manifest contains no records")
    return tuple(entries)


def format_manifest(entries: Iterable[ManifestEntry]) -> str:
    lines = ["# path,user_id,kind,session"]
    for e in entries:
        kind = "genuine" if e.kind is SignatureKind.GENUINE else "skilled"
        lines.append(f"{e.path},{e.user_id},{kind},{e.session}")
    return "\n".join(lines) + "\n"


def load_dataset(
    root: str,
    manifest_path: str | None = None,
    min_length: int = 1,
) -> Dataset:
    """Load every signature listed in the manifest under ``root``.

    Signatures shorter than ``min_length`` samples are rejected (they
    cannot carry the derivative window).  All problems across the whole
    manifest are collected and raised together.
    """
    if manifest_path is None:
        manifest_path = os.path.join(root, "manifest.txt")
    with open(manifest_path, "rb") as fh:
        entries = parse_manifest(fh.read())
    per_user: dict[str, dict[str, list[tuple[int, RawSignature]]]] = {}
    errors: list[str] = []
    for e in entries:
        full = os.path.join(root, e.path)
        try:
            sig = read_signature(full, e.user_id, e.kind, e.session)
        except (OSError, ValueError) as exc:
            errors.append(str(exc))
            continue
        if len(sig) < min_length:
            errors.append(
                f"{full}: signature has {len(sig)} samples, below the minimum "
                f"of {min_length}"
            )
            continue
        bucket = per_user.setdefault(e.user_id, {"genuine": [], "skilled": []})
        key = "genuine" if e.kind is SignatureKind.GENUINE else "skilled"
        bucket[key].append((e.session, sig))
    if errors:
        raise DatasetValidationError(errors)
    users = []
    for user_id in sorted(per_user):
        bucket = per_user[user_id]
        genuine = tuple(s for _, s in sorted(bucket["genuine"], key=lambda p: p[0]))
        skilled = tuple(s for _, s in sorted(bucket["skilled"], key=lambda p: p[0]))
        users.append(UserRecord(user_id=user_id, genuine=genuine, skilled=skilled))
    return Dataset(users=tuple(users))


@dataclass(frozen=True)
class Protocol:
    """Enrollment protocol: the first ``n_train`` genuine signatures of
    each user (in session order) enroll; the rest evaluate."""

    n_train: int = 5

    def __post_init__(self) -> None:
        if self.n_train < 1:
            raise ValueError(f"n_train must be >= 1, got {self.n_train}")


@dataclass(frozen=True)
class ProtocolSplit:
    """The dataset partition produced by :func:`split_protocol`.

    Random-forgery attempts against one user are, by construction, the
    test genuine signatures of every other user; see random_pool().
    """

    train: dict[str, tuple[RawSignature, ...]]
    test_genuine: dict[str, tuple[RawSignature, ...]]
    test_skilled: dict[str, tuple[RawSignature, ...]]

    def user_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.train))

    def random_pool(self, target: str) -> tuple[RawSignature, ...]:
        pool = []
        for user_id in self.user_ids():
            if user_id != target:
                pool.extend(self.test_genuine[user_id])
        return tuple(pool)


def split_protocol(ds: Dataset, proto: Protocol) -> ProtocolSplit:
    """Split a dataset into enrollment and evaluation parts.

    Every user must have at least ``n_train + 1`` genuine signatures so
    both sides are non-empty.  Train and test genuine sets are disjoint
    by construction.
    """
    short = [
        f"{u.user_id} ({len(u.genuine)} genuine)"
        for u in ds.users
        if len(u.genuine) < proto.n_train + 1
    ]
    if short:
        raise ValueError(
            f"users with fewer than {proto.n_train + 1} genuine signatures: "
            + ", ".join(short)
        )
    train = {}
    test_genuine = {}
    test_skilled = {}
    for u in ds.users:
        train[u.user_id] = u.genuine[: proto.n_train]
        test_genuine[u.user_id] = u.genuine[proto.n_train :]
        test_skilled[u.user_id] = u.skilled
    return ProtocolSplit(train=train, test_genuine=test_genuine, test_skilled=test_skilled)


def save_model(model: VqModel | DtwModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=None, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str) -> VqModel | DtwModel:
    with open(path, "r", encoding="utf-8") as fh:
        rec = json.load(fh)
    engine = rec.get("engine")
    if engine == "vq":
        return VqModel.from_dict(rec)
    if engine == "dtw":
        return DtwModel.from_dict(rec)
    raise ValueError(f"unknown model engine {engine!r} in {path}")
