"""Vector-quantization matcher.

Per-user codebooks are grown by binary splitting: start from the global
mean of the pooled training rows, double the codebook by perturbing
every centroid into a +/- pair, then refine with k-means until the
relative distortion improvement stalls.  Matching score is the mean
quantization distortion of a test matrix against the claimed user's
codebook.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FeatureMatrix, ScorePair, SplitSpec, apply_split

__all__ = [
    "LbgConfig",
    "Codebook",
    "VqModel",
    "lbg_train",
    "distortion",
    "vq_enroll",
    "vq_score",
]

# Centroid components smaller than this are split additively; a relative
# perturbation of zero would produce two identical children.
ZERO_COMPONENT = 1e-12


@dataclass(frozen=True)
class LbgConfig:
    """Codebook training knobs.

    perturbation is the relative +/- nudge used when splitting a
    centroid.  rng_seed is carried in run provenance; the training loop
    itself resolves every tie deterministically (lowest index wins), so
    results are bit-identical for identical inputs regardless of it.
    """

    perturbation: float = 0.01
    max_kmeans_iters: int = 100
    rel_improvement_threshold: float = 1e-5
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.perturbation <= 0:
            raise ValueError("perturbation must be > 0")
        if self.max_kmeans_iters < 1:
            raise ValueError("max_kmeans_iters must be >= 1")
        if self.rel_improvement_threshold < 0:
            raise ValueError("rel_improvement_threshold must be >= 0")


DEFAULT_LBG = LbgConfig()


@dataclass(frozen=True, eq=False)
class Codebook:
    """A trained codebook: 2**bits centroids over a fixed channel list.

    training_distortions keeps the per-iteration mean distortion of each
    doubling level, purely as a training trace; it is not serialized.
    """

    centroids: np.ndarray
    bits: int
    channels: tuple[str, ...]
    training_distortions: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        c = np.array(self.centroids, dtype=np.float64, copy=True)
        if c.ndim != 2:
            raise ValueError(f"centroids must be 2-D, got shape {c.shape}")
        if self.bits < 0:
            raise ValueError(f"bits must be >= 0, got {self.bits}")
        if c.shape[0] != 2**self.bits:
            raise ValueError(
                f"codebook with bits={self.bits} must hold {2**self.bits} "
                f"centroids, got {c.shape[0]}"
            )
        labels = tuple(str(ch) for ch in self.channels)
        if c.shape[1] != len(labels):
            raise ValueError(
                f"centroids have {c.shape[1]} dims but {len(labels)} channels"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "channels", labels)

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "dim": self.dim,
            "channels": list(self.channels),
            "centroids": [float(v) for v in self.centroids.ravel()],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "Codebook":
        dim = int(rec["dim"])
        flat = np.asarray(rec["centroids"], dtype=np.float64)
        if dim <= 0 or flat.size % dim != 0:
            raise ValueError("codebook record has inconsistent dimensions")
        return cls(
            centroids=flat.reshape(-1, dim),
            bits=int(rec["bits"]),
            channels=tuple(rec["channels"]),
        )


def _pairwise_sq(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (N, K).  Fast inner-product form
    with a clamp against tiny negative round-off."""
    d = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(c * c, axis=1)[None, :]
        - 2.0 * (x @ c.T)
    )
    np.maximum(d, 0.0, out=d)
    return d


def _split(centroids: np.ndarray, eps: float) -> np.ndarray:
    """Double the codebook: each centroid becomes a (1+eps), (1-eps)
    pair, interleaved so children stay adjacent to their parent.
    Components at (numerical) zero are nudged additively instead."""
    k, dim = centroids.shape
    out = np.empty((2 * k, dim), dtype=np.float64)
    for i in range(k):
        c = centroids[i]
        up = c * (1.0 + eps)
        dn = c * (1.0 - eps)
        near0 = np.abs(c) < ZERO_COMPONENT
        up[near0] = c[near0] + eps
        dn[near0] = c[near0] - eps
        out[2 * i] = up
        out[2 * i + 1] = dn
    return out


def _refine(
    vectors: np.ndarray, centroids: np.ndarray, cfg: LbgConfig
) -> tuple[np.ndarray, tuple[float, ...]]:
    """k-means at fixed codebook size.

    Assignment ties go to the lowest centroid index.  A centroid that
    owns no vectors is re-seeded at the vector farthest from its own
    nearest centroid; repair passes do not count as iterations and are
    capped so degenerate inputs (fewer distinct vectors than centroids)
    still terminate.
    """
    n = vectors.shape[0]
    k = centroids.shape[0]
    history: list[float] = []
    prev: float | None = None
    iters = 0
    repairs = 0
    max_repairs = 2 * k
    while True:
        dist = _pairwise_sq(vectors, centroids)
        assign = dist.argmin(axis=1)
        own = dist[np.arange(n), assign]
        cur = float(own.mean())
        history.append(cur)
        counts = np.bincount(assign, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size > 0 and repairs < max_repairs:
            far = int(np.argmax(own))
            centroids = centroids.copy()
            centroids[int(empty[0])] = vectors[far]
            repairs += 1
            continue
        if cur == 0.0:
            break
        if prev is not None and (prev - cur) < cfg.rel_improvement_threshold * prev:
            break
        iters += 1
        if iters > cfg.max_kmeans_iters:
            break
        new = np.empty_like(centroids)
        for d in range(vectors.shape[1]):
            new[:, d] = np.bincount(assign, weights=vectors[:, d], minlength=k)
        # Cells can only be empty here when the repair budget ran out on
        # degenerate input; those keep their old centroid.
        new /= np.maximum(counts, 1)[:, None]
        still_empty = counts == 0
        if still_empty.any():
            new[still_empty] = centroids[still_empty]
        centroids = new
        prev = cur
    return centroids, tuple(history)


def lbg_train(
    vectors: np.ndarray,
    bits: int,
    cfg: LbgConfig = DEFAULT_LBG,
    channels: Sequence[str] | None = None,
) -> Codebook:
    """Train a 2**bits codebook on pooled feature rows.

    Input
    -----
    vectors: (N, D) training rows, N >= 2**bits.
    bits: number of doubling rounds, so the final size is 2**bits.
    channels: column labels recorded on the codebook; positional names
        are generated when omitted.

    Output
    ------
    Codebook with exactly 2**bits finite centroids and the per-level
    training distortion trace attached.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] == 0 or v.shape[1] == 0:
        raise ValueError(f"training vectors must be a non-empty 2-D array, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("training vectors must be finite")
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    if v.shape[0] < 2**bits:
        raise ValueError(
            f"{v.shape[0]} training rows cannot support a {2**bits}-entry "
            f"codebook (bits={bits})"
        )
    if channels is None:
        labels = tuple(f"dim{j}" for j in range(v.shape[1]))
    else:
        labels = tuple(str(ch) for ch in channels)
    centroids = v.mean(axis=0, keepdims=True)
    histories: list[tuple[float, ...]] = []
    centroids, hist = _refine(v, centroids, cfg)
    histories.append(hist)
    for _ in range(bits):
        centroids = _split(centroids, cfg.perturbation)
        centroids, hist = _refine(v, centroids, cfg)
        histories.append(hist)
    return Codebook(
        centroids=centroids,
        bits=bits,
        channels=labels,
        training_distortions=tuple(histories),
    )


def distortion(cb: Codebook, m: FeatureMatrix) -> float:
    """Mean quantization distortion of a matrix against a codebook.

    Mean over rows of the squared Euclidean distance to the nearest
    centroid.  Computed from explicit differences so a matrix of exact
    centroid copies scores exactly 0.
    """
    if m.channels != cb.channels:
        raise ValueError(
            f"channel mismatch: codebook has {cb.channels}, matrix has {m.channels}"
        )
    if m.rows == 0:
        raise ValueError("cannot score an empty matrix")
    diff = m.data[:, None, :] - cb.centroids[None, :, :]
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    return float(sq.min(axis=1).mean())


@dataclass(frozen=True)
class VqModel:
    """Per-user VQ matcher state: one codebook per feature set.  cb2 is
    None when the split leaves the second set empty."""

    user_id: str
    split_name: str
    cb1: Codebook
    cb2: Codebook | None = None

    def to_dict(self) -> dict:
        return {
            "engine": "vq",
            "user_id": self.user_id,
            "split": self.split_name,
            "cb1": self.cb1.to_dict(),
            "cb2": None if self.cb2 is None else self.cb2.to_dict(),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "VqModel":
        if rec.get("engine") != "vq":
            raise ValueError(f"not a vq model record: engine={rec.get('engine')!r}")
        return cls(
            user_id=str(rec["user_id"]),
            split_name=str(rec["split"]),
            cb1=Codebook.from_dict(rec["cb1"]),
            cb2=None if rec["cb2"] is None else Codebook.from_dict(rec["cb2"]),
        )


def _pool(mats: Sequence[FeatureMatrix], label: str, bits: int) -> np.ndarray:
    rows = int(sum(m.rows for m in mats))
    if rows < 2**bits:
        raise ValueError(
            f"{label} pool has {rows} rows; a {bits}-bit codebook needs at "
            f"least {2**bits}"
        )
    return np.vstack([m.data for m in mats])


def vq_enroll(
    train: Sequence[FeatureMatrix],
    spec: SplitSpec,
    bits: int,
    cfg: LbgConfig = DEFAULT_LBG,
    user_id: str = "",
) -> VqModel:
    """Train the per-user codebook pair from full 15-channel training
    matrices.  Rows of all training signatures are pooled per set."""
    if len(train) == 0:
        raise ValueError("cannot enroll from zero training signatures")
    parts = [apply_split(m, spec) for m in train]
    set1 = [p[0] for p in parts]
    cb1 = lbg_train(_pool(set1, "set1", bits), bits, cfg, channels=set1[0].channels)
    cb2 = None
    if spec.set2:
        set2 = [p[1] for p in parts]
        cb2 = lbg_train(_pool(set2, "set2", bits), bits, cfg, channels=set2[0].channels)
    return VqModel(user_id=user_id, split_name=spec.name, cb1=cb1, cb2=cb2)


def vq_score(model: VqModel, test: FeatureMatrix, spec: SplitSpec) -> ScorePair:
    """Distortion of a test signature against one user's codebooks."""
    if spec.name != model.split_name:
        raise ValueError(
            f"model was enrolled for split {model.split_name}, scored with {spec.name}"
        )
    s1, s2 = apply_split(test, spec)
    d1 = distortion(model.cb1, s1)
    if model.cb2 is None:
        if spec.set2:
            raise ValueError("split has a second set but model lacks cb2")
        return ScorePair(d1=d1, d2=None)
    return ScorePair(d1=d1, d2=distortion(model.cb2, s2))
