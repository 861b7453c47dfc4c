"""Elastic-matching engine.

Classic dynamic time warping over multivariate feature sequences with
steps (1,0), (0,1), (1,1) and no band constraint.  A user model is just
the enrolled reference sequences; the matching score of a trial is the
minimum alignment cost over the references (one or several).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .core import FeatureMatrix, ScorePair, SplitSpec, apply_split

__all__ = [
    "DtwConfig",
    "DtwModel",
    "dtw",
    "dtw_enroll",
    "dtw_score",
]

LOCAL_DISTANCES = ("squared_euclidean", "euclidean")


@dataclass(frozen=True)
class DtwConfig:
    """Local distance and path normalization of the alignment cost.

    With path_normalize on, the accumulated cost is divided by the sum
    of the two sequence lengths so scores of different-length trials
    stay comparable.
    """

    local_distance: str = "squared_euclidean"
    path_normalize: bool = True

    def __post_init__(self) -> None:
        if self.local_distance not in LOCAL_DISTANCES:
            raise ValueError(
                f"local_distance must be one of {LOCAL_DISTANCES}, "
                f"got {self.local_distance!r}"
            )


DEFAULT_DTW = DtwConfig()


@njit(cache=True, nogil=True)
def _dp_cost(a: np.ndarray, b: np.ndarray, squared: bool) -> float:
    """Accumulated alignment cost between two (L, D) sequences.

    Rolling two-row dynamic program; local cost is the (squared)
    Euclidean distance computed from explicit differences, so identical
    inputs align at exactly zero.
    """
    la, dim = a.shape
    lb = b.shape[0]
    prev = np.empty(lb, dtype=np.float64)
    cur = np.empty(lb, dtype=np.float64)
    acc = 0.0
    for j in range(lb):
        d = 0.0
        for k in range(dim):
            t = a[0, k] - b[j, k]
            d += t * t
        if not squared:
            d = np.sqrt(d)
        acc = d if j == 0 else acc + d
        prev[j] = acc
    for i in range(1, la):
        for j in range(lb):
            d = 0.0
            for k in range(dim):
                t = a[i, k] - b[j, k]
                d += t * t
            if not squared:
                d = np.sqrt(d)
            if j == 0:
                best = prev[0]
            else:
                best = prev[j]
                if prev[j - 1] < best:
                    best = prev[j - 1]
                if cur[j - 1] < best:
                    best = cur[j - 1]
            cur[j] = d + best
        tmp = prev
        prev = cur
        cur = tmp
    return prev[lb - 1]


def dtw(a: FeatureMatrix, b: FeatureMatrix, cfg: DtwConfig = DEFAULT_DTW) -> float:
    """Alignment cost between two feature matrices.

    Input
    -----
    a, b: feature matrices with identical channel lists, at least one
        row each.
    cfg: local distance ("squared_euclidean" or "euclidean") and the
        path-normalization switch.

    Output
    ------
    Non-negative float; divided by (len(a) + len(b)) when normalizing.
    """
    if a.channels != b.channels:
        raise ValueError(
            f"channel mismatch: {a.channels} vs {b.channels}"
        )
    if a.rows == 0 or b.rows == 0:
        raise ValueError("cannot align an empty sequence")
    if a.dim == 0:
        raise ValueError("cannot align zero-dimensional features")
    cost = _dp_cost(
        np.ascontiguousarray(a.data),
        np.ascontiguousarray(b.data),
        cfg.local_distance == "squared_euclidean",
    )
    if cfg.path_normalize:
        cost /= a.rows + b.rows
    return float(cost)


@dataclass(frozen=True)
class DtwModel:
    """Per-user elastic-matching state: the enrolled reference
    sequences, projected per feature set.  refs2 is empty when the
    split leaves the second set empty."""

    user_id: str
    split_name: str
    refs1: tuple[FeatureMatrix, ...]
    refs2: tuple[FeatureMatrix, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "refs1", tuple(self.refs1))
        object.__setattr__(self, "refs2", tuple(self.refs2))
        if len(self.refs1) == 0:
            raise ValueError("a dtw model needs at least one reference")
        if self.refs2 and len(self.refs2) != len(self.refs1):
            raise ValueError("refs1 and refs2 must pair up one-to-one")

    @property
    def n_references(self) -> int:
        return len(self.refs1)

    def to_dict(self) -> dict:
        def mat(m: FeatureMatrix) -> dict:
            return {
                "channels": list(m.channels),
                "rows": m.rows,
                "data": [float(v) for v in m.data.ravel()],
            }

        return {
            "engine": "dtw",
            "user_id": self.user_id,
            "split": self.split_name,
            "refs1": [mat(m) for m in self.refs1],
            "refs2": [mat(m) for m in self.refs2],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "DtwModel":
        if rec.get("engine") != "dtw":
            raise ValueError(f"not a dtw model record: engine={rec.get('engine')!r}")

        def mat(r: dict) -> FeatureMatrix:
            channels = tuple(r["channels"])
            data = np.asarray(r["data"], dtype=np.float64).reshape(
                int(r["rows"]), len(channels)
            )
            return FeatureMatrix(data, channels)

        return cls(
            user_id=str(rec["user_id"]),
            split_name=str(rec["split"]),
            refs1=tuple(mat(r) for r in rec["refs1"]),
            refs2=tuple(mat(r) for r in rec["refs2"]),
        )


def dtw_enroll(
    train: Sequence[FeatureMatrix],
    spec: SplitSpec,
    user_id: str = "",
) -> DtwModel:
    """Store the projected training signatures verbatim as references."""
    if len(train) == 0:
        raise ValueError("cannot enroll from zero training signatures")
    parts = [apply_split(m, spec) for m in train]
    refs1 = tuple(p[0] for p in parts)
    refs2 = tuple(p[1] for p in parts) if spec.set2 else ()
    return DtwModel(user_id=user_id, split_name=spec.name, refs1=refs1, refs2=refs2)


def dtw_score(
    model: DtwModel,
    test: FeatureMatrix,
    spec: SplitSpec,
    cfg: DtwConfig = DEFAULT_DTW,
) -> ScorePair:
    """Minimum alignment cost over the model's references, per set."""
    if spec.name != model.split_name:
        raise ValueError(
            f"model was enrolled for split {model.split_name}, scored with {spec.name}"
        )
    s1, s2 = apply_split(test, spec)
    d1 = min(dtw(ref, s1, cfg) for ref in model.refs1)
    if not spec.set2:
        return ScorePair(d1=d1, d2=None)
    if not model.refs2:
        raise ValueError("split has a second set but model lacks refs2")
    d2 = min(dtw(ref, s2, cfg) for ref in model.refs2)
    return ScorePair(d1=d1, d2=d2)
