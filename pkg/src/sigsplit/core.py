"""Domain model shared by every other module.

Pen samples, raw signatures, feature matrices with named channels, the
fixed channel-split layouts used by the two-matcher setup, and dataset
containers.  Everything here is a plain immutable value type; the heavy
lifting lives in the feature/matcher modules.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "Channel",
    "SignatureKind",
    "Sample",
    "RawSignature",
    "FeatureMatrix",
    "SplitSpec",
    "ScorePair",
    "UserRecord",
    "Dataset",
    "TEST1",
    "TEST2",
    "TEST3",
    "TEST4",
    "WHOLE",
    "SPLITS",
    "BASE_CHANNELS",
    "ALL_CHANNELS",
    "stack_frames",
    "apply_split",
    "split_by_name",
]


class Channel(str, enum.Enum):
    """The 15 feature channels: 5 pen channels, their first and second
    discrete derivatives.  Declaration order is the canonical column
    order of a full feature matrix."""

    X = "x"
    Y = "y"
    P = "p"
    AZ = "az"
    AL = "al"
    DX = "dx"
    DY = "dy"
    DP = "dp"
    DAZ = "daz"
    DAL = "dal"
    DDX = "ddx"
    DDY = "ddy"
    DDP = "ddp"
    DDAZ = "ddaz"
    DDAL = "ddal"

    def __str__(self) -> str:  # so f"{ch}" gives the bare label
        return self.value


BASE_CHANNELS: tuple[Channel, ...] = (
    Channel.X,
    Channel.Y,
    Channel.P,
    Channel.AZ,
    Channel.AL,
)

ALL_CHANNELS: tuple[Channel, ...] = tuple(Channel)


class SignatureKind(str, enum.Enum):
    GENUINE = "genuine"
    SKILLED_FORGERY = "skilled_forgery"


@dataclass(frozen=True)
class Sample:
    """One pen sample: position, pressure, pen azimuth/altitude and an
    optional timestamp.  Pressure 0 encodes pen-up."""

    x: float
    y: float
    p: float
    az: float
    al: float
    t: float | None = None

    def __post_init__(self) -> None:
        if self.p < 0:
            raise ValueError(f"pressure must be >= 0, got {self.p}")


@dataclass(frozen=True)
class RawSignature:
    """An ordered pen-sample sequence with its identity labels.

    ``user_id`` is an opaque identifier.  For a skilled forgery the
    ``user_id`` names the forged target, not the forger.
    """

    samples: tuple[Sample, ...]
    user_id: str
    kind: SignatureKind
    session: int | None = None
    source_path: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if len(self.samples) == 0:
            raise ValueError("signature must contain at least one sample")

    def __len__(self) -> int:
        return len(self.samples)

    def channel_matrix(self) -> np.ndarray:
        """Return the raw samples as an (L, 5) float array in the base
        channel order x, y, p, az, al."""
        out = np.empty((len(self.samples), 5), dtype=np.float64)
        for i, s in enumerate(self.samples):
            out[i, 0] = s.x
            out[i, 1] = s.y
            out[i, 2] = s.p
            out[i, 3] = s.az
            out[i, 4] = s.al
        return out

    def timestamps(self) -> np.ndarray | None:
        if any(s.t is None for s in self.samples):
            return None
        return np.array([s.t for s in self.samples], dtype=np.float64)


def _as_labels(channels: Iterable[str | Channel]) -> tuple[str, ...]:
    out = []
    for c in channels:
        out.append(c.value if isinstance(c, Channel) else str(c))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """An (L, D) float64 matrix with one label per column.

    Column labels are plain strings; the 15 canonical ones come from
    :class:`Channel`, and frame stacking appends an ``@offset`` suffix.
    The data array is made read-only so instances can be shared freely.
    """

    data: np.ndarray
    channels: tuple[str, ...]

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {data.shape}")
        labels = _as_labels(self.channels)
        if data.shape[1] != len(labels):
            raise ValueError(
                f"matrix has {data.shape[1]} columns but {len(labels)} channel labels"
            )
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate channel labels: {labels}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", labels)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def column(self, channel: str | Channel) -> np.ndarray:
        label = channel.value if isinstance(channel, Channel) else str(channel)
        try:
            j = self.channels.index(label)
        except ValueError:
            raise ValueError(
                f"channel '{label}' not present; matrix has {self.channels}"
            ) from None
        return self.data[:, j]

    def select(self, channels: Iterable[str | Channel]) -> "FeatureMatrix":
        """Project onto the given channels, in the given order."""
        labels = _as_labels(channels)
        idx = []
        for label in labels:
            try:
                idx.append(self.channels.index(label))
            except ValueError:
                raise ValueError(
                    f"channel '{label}' not present; matrix has {self.channels}"
                ) from None
        return FeatureMatrix(self.data[:, idx], labels)


@dataclass(frozen=True)
class SplitSpec:
    """A named partition of the 15 channels into two (possibly
    overlapping) feature sets, one per matcher."""

    name: str
    set1: tuple[Channel, ...]
    set2: tuple[Channel, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("split name must be non-empty")
        object.__setattr__(self, "set1", tuple(self.set1))
        object.__setattr__(self, "set2", tuple(self.set2))
        for group, label in ((self.set1, "set1"), (self.set2, "set2")):
            for c in group:
                if not isinstance(c, Channel):
                    raise ValueError(f"{label} entry {c!r} is not a Channel")
            if len(set(group)) != len(group):
                raise ValueError(f"{label} of split {self.name} has duplicates")
        if not self.set1:
            raise ValueError("set1 must not be empty")


TEST1 = SplitSpec(
    "TEST1",
    set1=(Channel.X, Channel.Y, Channel.DX, Channel.DY, Channel.DDX, Channel.DDY),
    set2=(Channel.P, Channel.DP),
)
TEST2 = SplitSpec(
    "TEST2",
    set1=(Channel.X, Channel.Y, Channel.DX, Channel.DY, Channel.DDX, Channel.DDY),
    set2=(Channel.P, Channel.AZ, Channel.AL, Channel.DP, Channel.DAZ, Channel.DAL),
)
TEST3 = SplitSpec(
    "TEST3",
    set1=(
        Channel.X,
        Channel.Y,
        Channel.P,
        Channel.DX,
        Channel.DY,
        Channel.DP,
        Channel.DDX,
        Channel.DDY,
    ),
    set2=(Channel.AZ, Channel.AL, Channel.DAZ, Channel.DAL),
)
TEST4 = SplitSpec(
    "TEST4",
    set1=(
        Channel.X,
        Channel.Y,
        Channel.P,
        Channel.DX,
        Channel.DY,
        Channel.DP,
        Channel.DDX,
        Channel.DDY,
    ),
    set2=(Channel.P, Channel.AZ, Channel.AL, Channel.DP, Channel.DAZ, Channel.DAL),
)
WHOLE = SplitSpec("WHOLE", set1=ALL_CHANNELS, set2=())

SPLITS: dict[str, SplitSpec] = {
    s.name: s for s in (TEST1, TEST2, TEST3, TEST4, WHOLE)
}


def split_by_name(name: str) -> SplitSpec:
    try:
        return SPLITS[name]
    except KeyError:
        raise ValueError(
            f"unknown split '{name}'; expected one of {sorted(SPLITS)}"
        ) from None


@dataclass(frozen=True)
class ScorePair:
    """Distances from the two matchers for one trial.  ``d2`` is None
    when the second feature set is empty (whole-vector runs)."""

    d1: float
    d2: float | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.d1) or self.d1 < 0:
            raise ValueError(f"d1 must be finite and >= 0, got {self.d1}")
        if self.d2 is not None and (not np.isfinite(self.d2) or self.d2 < 0):
            raise ValueError(f"d2 must be finite and >= 0, got {self.d2}")


@dataclass(frozen=True)
class UserRecord:
    """All signatures stored for one user: genuine ones plus skilled
    forgeries that target this user."""

    user_id: str
    genuine: tuple[RawSignature, ...]
    skilled: tuple[RawSignature, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "genuine", tuple(self.genuine))
        object.__setattr__(self, "skilled", tuple(self.skilled))
        for sig in self.genuine:
            if sig.kind is not SignatureKind.GENUINE or sig.user_id != self.user_id:
                raise ValueError(f"bad genuine entry for user {self.user_id}")
        for sig in self.skilled:
            if (
                sig.kind is not SignatureKind.SKILLED_FORGERY
                or sig.user_id != self.user_id
            ):
                raise ValueError(f"bad skilled-forgery entry for user {self.user_id}")


@dataclass(frozen=True)
class Dataset:
    users: tuple[UserRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        ids = [u.user_id for u in self.users]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate user ids in dataset")

    def user_ids(self) -> tuple[str, ...]:
        return tuple(u.user_id for u in self.users)

    def user(self, user_id: str) -> UserRecord:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise KeyError(user_id)

    def n_signatures(self) -> int:
        return sum(len(u.genuine) + len(u.skilled) for u in self.users)


def stack_frames(m: FeatureMatrix, frames: int) -> FeatureMatrix:
    """Concatenate ``frames`` consecutive rows into one row.

    The output has floor(L / frames) rows and D * frames columns; the
    tail that does not fill a whole group is dropped.  Column labels
    gain an ``@k`` suffix (frame offset k) except in the identity case
    frames = 1, which returns the matrix unchanged.
    """
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if frames == 1:
        return m
    n = m.rows // frames
    if n == 0:
        raise ValueError(
            f"matrix with {m.rows} rows cannot be stacked {frames}-fold"
        )
    trimmed = m.data[: n * frames, :]
    stacked = trimmed.reshape(n, frames * m.dim)
    labels = tuple(
        f"{c}@{k}" for k in range(frames) for c in m.channels
    )
    return FeatureMatrix(stacked, labels)


def apply_split(m: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Project a full feature matrix onto a split's two channel sets.

    Returns (set1 matrix, set2 matrix); the second has zero columns when
    the split routes everything through the first matcher.  Channels may
    appear in both sets; each output repeats them independently.
    """
    first = m.select(spec.set1)
    if spec.set2:
        second = m.select(spec.set2)
    else:
        second = FeatureMatrix(np.empty((m.rows, 0), dtype=np.float64), ())
    return first, second
