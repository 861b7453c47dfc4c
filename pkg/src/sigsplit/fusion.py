"""Score fusion and evaluation metrics.

The two matchers produce a distance pair per trial; fusion is a convex
combination alpha * d1 + (1 - alpha) * d2.  Verification quality is
summarized by the detection cost function swept over every candidate
threshold, identification by the rank-1 rate over enrolled users.
Scores are distances: a trial is accepted when its score is <= the
threshold.  All rates are fractions in [0, 1].
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import FeatureMatrix, ScorePair, SplitSpec

__all__ = [
    "TrialKind",
    "Trial",
    "ScoreTable",
    "CostConfig",
    "MinDcfResult",
    "AlphaSweepResult",
    "fuse",
    "dcf",
    "min_dcf",
    "alpha_grid",
    "sweep_alpha",
    "identify",
    "idr",
    "det_points",
]


class TrialKind(str, enum.Enum):
    GENUINE = "genuine"
    RANDOM_FORGERY = "random_forgery"
    SKILLED_FORGERY = "skilled_forgery"


@dataclass(frozen=True)
class Trial:
    """One verification attempt: a signature claimed to be
    ``claimed_user``, actually produced by / targeting ``true_user``.

    For a skilled forgery both ids name the forged target; for a random
    forgery the true user is the actual writer and differs from the
    claim.
    """

    claimed_user: str
    true_user: str
    kind: TrialKind
    pair: ScorePair

    def __post_init__(self) -> None:
        if self.kind is TrialKind.GENUINE and self.claimed_user != self.true_user:
            raise ValueError("genuine trial must have claimed == true user")
        if self.kind is TrialKind.RANDOM_FORGERY and self.claimed_user == self.true_user:
            raise ValueError("random-forgery trial must have claimed != true user")
        if self.kind is TrialKind.SKILLED_FORGERY and self.claimed_user != self.true_user:
            raise ValueError(
                "skilled-forgery trial labels both ids with the forged target"
            )


_CSV_HEADER = ["claimed", "true", "kind", "d1", "d2"]


@dataclass(frozen=True)
class ScoreTable:
    """An ordered collection of scored trials."""

    trials: tuple[Trial, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))

    def __len__(self) -> int:
        return len(self.trials)

    def of_kind(self, kind: TrialKind) -> tuple[Trial, ...]:
        return tuple(t for t in self.trials if t.kind is kind)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_CSV_HEADER)
        for t in self.trials:
            d2 = "" if t.pair.d2 is None else repr(t.pair.d2)
            w.writerow([t.claimed_user, t.true_user, t.kind.value, repr(t.pair.d1), d2])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScoreTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != _CSV_HEADER:
            raise ValueError(
                f"score table must start with header {','.join(_CSV_HEADER)}"
            )
        trials = []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"line {i}: expected 5 fields, got {len(row)}")
            claimed, true, kind, d1, d2 = row
            pair = ScorePair(d1=float(d1), d2=None if d2 == "" else float(d2))
            trials.append(Trial(claimed, true, TrialKind(kind), pair))
        return cls(tuple(trials))


@dataclass(frozen=True)
class CostConfig:
    """Detection cost weights: miss cost, false-accept cost, and the
    prior probability of a genuine trial."""

    c_miss: float = 1.0
    c_fa: float = 1.0
    p_true: float = 0.5

    def __post_init__(self) -> None:
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be > 0")
        if not 0.0 < self.p_true < 1.0:
            raise ValueError(f"p_true must be in (0, 1), got {self.p_true}")


DEFAULT_COST = CostConfig()


def fuse(pair: ScorePair, alpha: float) -> float:
    """Convex combination alpha * d1 + (1 - alpha) * d2.

    A pair without a second distance only supports alpha = 1.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if pair.d2 is None:
        if alpha != 1.0:
            raise ValueError("pair has no d2; only alpha = 1 is defined")
        return pair.d1
    return alpha * pair.d1 + (1.0 - alpha) * pair.d2


def dcf(p_miss: float, p_fa: float, cost: CostConfig = DEFAULT_COST) -> float:
    """Detection cost at one operating point (all quantities fractions)."""
    for name, v in (("p_miss", p_miss), ("p_fa", p_fa)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    return cost.c_miss * p_miss * cost.p_true + cost.c_fa * p_fa * (1.0 - cost.p_true)


class MinDcfResult(NamedTuple):
    min_dcf: float
    threshold: float


def _candidate_thresholds(genuine: np.ndarray, impostor: np.ndarray) -> np.ndarray:
    scores = np.concatenate([genuine, impostor])
    return np.concatenate([[-np.inf], np.sort(scores), [np.inf]])


def _rates(
    genuine: np.ndarray, impostor: np.ndarray, thresholds: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """P_miss and P_fa at each threshold for accept-iff-score<=threshold."""
    g = np.sort(genuine)
    i = np.sort(impostor)
    p_miss = 1.0 - np.searchsorted(g, thresholds, side="right") / g.size
    p_fa = np.searchsorted(i, thresholds, side="right") / i.size
    return p_miss, p_fa


def _check_scores(name: str, scores: Sequence[float]) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} scores must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} scores must be finite")
    return arr


def min_dcf(
    genuine: Sequence[float],
    impostor: Sequence[float],
    cost: CostConfig = DEFAULT_COST,
) -> MinDcfResult:
    """Minimum detection cost over every candidate threshold.

    Candidates are the pooled scores themselves plus -inf and +inf
    sentinels (reject-all and accept-all).  Ties resolve to the
    smallest threshold.

    Input
    -----
    genuine, impostor: non-empty sequences of finite distance scores.

    Output
    ------
    MinDcfResult(min_dcf, threshold).
    """
    g = _check_scores("genuine", genuine)
    i = _check_scores("impostor", impostor)
    thresholds = _candidate_thresholds(g, i)
    p_miss, p_fa = _rates(g, i, thresholds)
    costs = cost.c_miss * p_miss * cost.p_true + cost.c_fa * p_fa * (1.0 - cost.p_true)
    best = int(np.argmin(costs))  # first minimum = smallest threshold
    return MinDcfResult(float(costs[best]), float(thresholds[best]))


def det_points(
    genuine: Sequence[float], impostor: Sequence[float]
) -> np.ndarray:
    """Detection-tradeoff curve: one (p_fa, p_miss) row per candidate
    threshold, ordered by threshold.  Suitable for external plotting."""
    g = _check_scores("genuine", genuine)
    i = _check_scores("impostor", impostor)
    thresholds = _candidate_thresholds(g, i)
    p_miss, p_fa = _rates(g, i, thresholds)
    return np.column_stack([p_fa, p_miss])


def alpha_grid(step: float) -> np.ndarray:
    """The fusion-weight grid {0, step, 2*step, ..., 1}; both endpoints
    are always present even when step does not divide 1."""
    if not 0.0 < step <= 1.0:
        raise ValueError(f"grid step must be in (0, 1], got {step}")
    n = int(np.floor(1.0 / step + 1e-9))
    grid = np.round(np.arange(n + 1) * step, 12)
    grid = grid[grid <= 1.0]
    if grid[-1] != 1.0:
        grid = np.append(grid, 1.0)
    return grid


@dataclass(frozen=True)
class AlphaSweepResult:
    """Outcome of a fusion-weight sweep against one impostor kind."""

    impostor_kind: TrialKind
    alpha_opt: float
    min_dcf_at_opt: float
    threshold_at_opt: float
    per_alpha: tuple[tuple[float, float, float], ...]  # (alpha, min_dcf, threshold)


def sweep_alpha(
    table: ScoreTable,
    cost: CostConfig = DEFAULT_COST,
    grid_step: float = 0.01,
    impostor_kind: TrialKind = TrialKind.RANDOM_FORGERY,
) -> AlphaSweepResult:
    """Sweep the fusion weight over the grid and pick the minimum-cost
    point; ties go to the smaller alpha.  Run once per impostor kind."""
    if impostor_kind is TrialKind.GENUINE:
        raise ValueError("impostor kind must be a forgery kind")
    gen = table.of_kind(TrialKind.GENUINE)
    imp = table.of_kind(impostor_kind)
    if not gen or not imp:
        raise ValueError(
            f"sweep needs genuine and {impostor_kind.value} trials; "
            f"got {len(gen)} and {len(imp)}"
        )
    grid = alpha_grid(grid_step)
    curve = []
    for a in grid:
        g_scores = [fuse(t.pair, float(a)) for t in gen]
        i_scores = [fuse(t.pair, float(a)) for t in imp]
        r = min_dcf(g_scores, i_scores, cost)
        curve.append((float(a), r.min_dcf, r.threshold))
    best = min(range(len(curve)), key=lambda j: curve[j][1])  # first min: smaller alpha
    return AlphaSweepResult(
        impostor_kind=impostor_kind,
        alpha_opt=curve[best][0],
        min_dcf_at_opt=curve[best][1],
        threshold_at_opt=curve[best][2],
        per_alpha=tuple(curve),
    )


Scorer = Callable[[object, FeatureMatrix, SplitSpec], ScorePair]


def identify(
    models: Sequence,
    test: FeatureMatrix,
    spec: SplitSpec,
    alpha: float,
    score_fn: Scorer,
) -> str:
    """Closed-set identification: the enrolled user whose model fuses to
    the smallest distance.  Ties go to the lexicographically smallest
    user id."""
    if len(models) == 0:
        raise ValueError("cannot identify against zero models")
    best_user: str | None = None
    best_score = np.inf
    for model in sorted(models, key=lambda m: m.user_id):
        score = fuse(score_fn(model, test, spec), alpha)
        if score < best_score:
            best_score = score
            best_user = model.user_id
    assert best_user is not None
    return best_user


def idr(
    models: Sequence,
    labeled_tests: Sequence[tuple[str, FeatureMatrix]],
    spec: SplitSpec,
    alpha: float,
    score_fn: Scorer,
) -> float:
    """Identification rate: fraction of test signatures whose
    identification comes back as their true user."""
    if len(labeled_tests) == 0:
        raise ValueError("cannot compute a rate over zero tests")
    hits = sum(
        1
        for true_user, fm in labeled_tests
        if identify(models, fm, spec, alpha, score_fn) == true_user
    )
    return hits / len(labeled_tests)
