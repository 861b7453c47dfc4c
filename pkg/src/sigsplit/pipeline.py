"""End-to-end experiment runner.

Wires the pieces together for one (engine, split, n_train[, bits])
configuration: feature extraction, per-user enrollment, exhaustive
trial scoring, fusion-weight sweeps and the report record.  The CLI is
a thin shell around this module; tests drive it directly.

Trial construction: each user's post-enrollment genuine signatures are
genuine trials; every other user's test genuine signatures are that
user's random-forgery trials (cross-user exhaustive); skilled forgeries
target their stored user.  Reports are written append-only with a
content hash in the filename, so re-running a configuration never
clobbers earlier results.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Dataset, FeatureMatrix, ScorePair, split_by_name
from .data_io import Protocol, split_protocol
from .dtw import DEFAULT_DTW, DtwConfig, dtw_enroll, dtw_score
from .features import DeltaConfig, extract
from .fusion import (
    DEFAULT_COST,
    AlphaSweepResult,
    CostConfig,
    ScoreTable,
    Trial,
    TrialKind,
    alpha_grid,
    det_points,
    fuse,
    min_dcf,
    sweep_alpha,
)
from .vq import DEFAULT_LBG, LbgConfig, vq_enroll, vq_score

__all__ = ["RunConfig", "RunResult", "run_experiment", "write_run_artifacts"]

ENGINES = ("vq", "dtw")
ALPHA_MODES = ("oracle", "heldout")
PROTOCOL_BITS = (4, 5, 6, 7, 8)


@dataclass(frozen=True)
class RunConfig:
    """One experiment cell.  ``bits`` is required for the vq engine and
    must stay off for dtw."""

    engine: str
    split: str
    n_train: int = 5
    bits: int | None = None
    delta_halfwidth: int = 2
    alpha_step: float = 0.01
    alpha_mode: str = "oracle"
    cost: CostConfig = DEFAULT_COST
    dtw_cfg: DtwConfig = DEFAULT_DTW
    lbg_cfg: LbgConfig = DEFAULT_LBG
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.engine == "vq":
            if self.bits is None:
                raise ValueError("vq engine requires bits")
            if self.bits not in PROTOCOL_BITS:
                raise ValueError(
                    f"bits must be in {PROTOCOL_BITS}, got {self.bits}"
                )
        elif self.bits is not None:
            raise ValueError("bits only applies to the vq engine")
        if self.n_train < 1:
            raise ValueError("n_train must be >= 1")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(
                f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}"
            )
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        # split, delta_halfwidth and alpha_step are validated by their owners
        split_by_name(self.split)
        DeltaConfig(self.delta_halfwidth)
        alpha_grid(self.alpha_step)


@dataclass(frozen=True)
class RunResult:
    report: dict
    table: ScoreTable
    det: dict[str, np.ndarray] = field(default_factory=dict)


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _halves(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic tune/eval split: even indices tune, odd evaluate."""
    idx = np.arange(n)
    return idx[::2], idx[1::2]


def _fused_matrix(
    d1: np.ndarray, d2: np.ndarray | None, alpha: float
) -> np.ndarray:
    if d2 is None:
        return d1
    return alpha * d1 + (1.0 - alpha) * d2


def run_experiment(ds: Dataset, cfg: RunConfig) -> RunResult:
    """Run one configuration over a dataset and summarize it.

    Returns the report record plus the raw score table and the DET
    curves at the chosen operating weights.
    """
    spec = split_by_name(cfg.split)
    delta_cfg = DeltaConfig(cfg.delta_halfwidth)
    split = split_protocol(ds, Protocol(n_train=cfg.n_train))
    users = split.user_ids()

    def features_of(sigs):
        return _pmap(lambda s: extract(s, delta_cfg), sigs, cfg.workers)

    train_f = {u: features_of(split.train[u]) for u in users}
    test_f = {u: features_of(split.test_genuine[u]) for u in users}
    skilled_f = {u: features_of(split.test_skilled[u]) for u in users}

    if cfg.engine == "vq":
        def enroll(u: str):
            return vq_enroll(train_f[u], spec, cfg.bits, cfg.lbg_cfg, user_id=u)

        def score(model, fm: FeatureMatrix) -> ScorePair:
            return vq_score(model, fm, spec)
    else:
        def enroll(u: str):
            return dtw_enroll(train_f[u], spec, user_id=u)

        def score(model, fm: FeatureMatrix) -> ScorePair:
            return dtw_score(model, fm, spec, cfg.dtw_cfg)

    models = _pmap(enroll, users, cfg.workers)

    tests: list[tuple[str, FeatureMatrix]] = []
    for u in users:
        tests.extend((u, fm) for fm in test_f[u])
    n_tests = len(tests)
    true_idx = np.array([users.index(u) for u, _ in tests])

    def score_row(model) -> list[ScorePair]:
        return [score(model, fm) for _, fm in tests]

    rows = _pmap(score_row, models, cfg.workers)
    has_d2 = bool(spec.set2)
    d1 = np.array([[p.d1 for p in row] for row in rows])
    d2 = np.array([[p.d2 for p in row] for row in rows]) if has_d2 else None

    skilled_pairs: list[tuple[int, ScorePair]] = []  # (model index, pair)
    for mi, u in enumerate(users):
        for p in _pmap(lambda fm: score(models[mi], fm), skilled_f[u], cfg.workers):
            skilled_pairs.append((mi, p))
    s1 = np.array([p.d1 for _, p in skilled_pairs])
    s2 = np.array([p.d2 for _, p in skilled_pairs]) if has_d2 else None

    trials: list[Trial] = []
    for t, (u, _) in enumerate(tests):
        trials.append(Trial(u, u, TrialKind.GENUINE, rows[true_idx[t]][t]))
    for mi, claimed in enumerate(users):
        for t, (true_user, _) in enumerate(tests):
            if true_user != claimed:
                trials.append(
                    Trial(claimed, true_user, TrialKind.RANDOM_FORGERY, rows[mi][t])
                )
    for mi, p in skilled_pairs:
        trials.append(Trial(users[mi], users[mi], TrialKind.SKILLED_FORGERY, p))
    table = ScoreTable(tuple(trials))

    grid = alpha_grid(cfg.alpha_step) if has_d2 else np.array([1.0])

    # Identification over the grid: argmin over models of the fused
    # distance; first minimum = lexicographically smallest user.
    if cfg.alpha_mode == "heldout":
        idr_tune_idx, idr_eval_idx = _halves(n_tests)
    else:
        idr_tune_idx = idr_eval_idx = np.arange(n_tests)

    def idr_at(alpha: float, idx: np.ndarray) -> float:
        fused = _fused_matrix(d1, d2, alpha)[:, idx]
        pred = fused.argmin(axis=0)
        return float(np.mean(pred == true_idx[idx]))

    idr_curve = [(float(a), idr_at(float(a), idr_eval_idx)) for a in grid]
    tune_curve = [idr_at(float(a), idr_tune_idx) for a in grid]
    alpha_opt_idr = float(grid[int(np.argmax(tune_curve))])
    idr_opt = idr_curve[int(np.argmax(tune_curve))][1]

    def verification(kind: TrialKind) -> dict | None:
        if kind is TrialKind.SKILLED_FORGERY and len(skilled_pairs) == 0:
            return None
        if cfg.alpha_mode == "heldout":
            tune_t, eval_t = _split_table(table, kind)
        else:
            tune_t = eval_t = table
        tune_sweep = sweep_alpha(tune_t, cfg.cost, cfg.alpha_step, kind) if has_d2 \
            else _single_alpha_sweep(tune_t, cfg.cost, kind)
        eval_sweep = sweep_alpha(eval_t, cfg.cost, cfg.alpha_step, kind) if has_d2 \
            else _single_alpha_sweep(eval_t, cfg.cost, kind)
        a_opt = tune_sweep.alpha_opt
        j = int(np.argmin(np.abs(np.array([c[0] for c in eval_sweep.per_alpha]) - a_opt)))
        return {
            "alpha_opt": a_opt,
            "dcf_at_opt": eval_sweep.per_alpha[j][1],
            "threshold_at_opt": eval_sweep.per_alpha[j][2],
            "curve": eval_sweep.per_alpha,
            "eval_table": eval_t,
        }

    ver_random = verification(TrialKind.RANDOM_FORGERY)
    ver_skilled = verification(TrialKind.SKILLED_FORGERY)

    def cell(alpha: float | None) -> dict | None:
        if alpha is None:
            return None

        def curve_value(ver):
            if ver is None:
                return None
            alphas = np.array([c[0] for c in ver["curve"]])
            return ver["curve"][int(np.argmin(np.abs(alphas - alpha)))][1]

        return {
            "idr": idr_at(alpha, idr_eval_idx),
            "dcf_random": curve_value(ver_random),
            "dcf_skilled": curve_value(ver_skilled),
        }

    cells = {
        "alpha_opt": {
            "idr": idr_opt,
            "dcf_random": None if ver_random is None else ver_random["dcf_at_opt"],
            "dcf_skilled": None if ver_skilled is None else ver_skilled["dcf_at_opt"],
        },
        "alpha_0": cell(0.0) if has_d2 else None,
        "alpha_1": cell(1.0),
    }

    report = {
        "schema": "sigsplit-report-v1",
        "test_name": spec.name,
        "engine": cfg.engine,
        "n_train": cfg.n_train,
        "delta_halfwidth": cfg.delta_halfwidth,
        "alpha_mode": cfg.alpha_mode,
        "grid_step": cfg.alpha_step,
        "p_true": cfg.cost.p_true,
        "c_miss": cfg.cost.c_miss,
        "c_fa": cfg.cost.c_fa,
        "seed": cfg.seed,
        "n_users": len(users),
        "n_trials": {
            "genuine": len(table.of_kind(TrialKind.GENUINE)),
            "random_forgery": len(table.of_kind(TrialKind.RANDOM_FORGERY)),
            "skilled_forgery": len(table.of_kind(TrialKind.SKILLED_FORGERY)),
        },
        "alpha_opt": {
            "idr": alpha_opt_idr,
            "random": None if ver_random is None else ver_random["alpha_opt"],
            "skilled": None if ver_skilled is None else ver_skilled["alpha_opt"],
        },
        "idr": idr_opt,
        "dcf_random": None if ver_random is None else ver_random["dcf_at_opt"],
        "dcf_skilled": None if ver_skilled is None else ver_skilled["dcf_at_opt"],
        "cells": cells,
        "curves": {
            "idr": [[a, v] for a, v in idr_curve],
            "random": None
            if ver_random is None
            else [list(c) for c in ver_random["curve"]],
            "skilled": None
            if ver_skilled is None
            else [list(c) for c in ver_skilled["curve"]],
        },
    }
    if cfg.engine == "vq":
        report["bits"] = cfg.bits
        report["lbg"] = {
            "perturbation": cfg.lbg_cfg.perturbation,
            "max_kmeans_iters": cfg.lbg_cfg.max_kmeans_iters,
            "rel_improvement_threshold": cfg.lbg_cfg.rel_improvement_threshold,
            "rng_seed": cfg.lbg_cfg.rng_seed,
        }
    else:
        report["dtw"] = {
            "local_distance": cfg.dtw_cfg.local_distance,
            "path_normalize": cfg.dtw_cfg.path_normalize,
        }

    det = {}
    for label, ver in (("random", ver_random), ("skilled", ver_skilled)):
        if ver is None:
            continue
        kind = TrialKind.RANDOM_FORGERY if label == "random" else TrialKind.SKILLED_FORGERY
        et: ScoreTable = ver["eval_table"]
        a = ver["alpha_opt"]
        g = [fuse(t.pair, a) for t in et.of_kind(TrialKind.GENUINE)]
        i = [fuse(t.pair, a) for t in et.of_kind(kind)]
        det[label] = det_points(g, i)

    return RunResult(report=report, table=table, det=det)


def _split_table(table: ScoreTable, kind: TrialKind) -> tuple[ScoreTable, ScoreTable]:
    """Per-kind even/odd halves for held-out weight tuning.  Genuine
    trials split alongside the impostor kind under study."""
    tune, ev = [], []
    for k in (TrialKind.GENUINE, kind):
        group = table.of_kind(k)
        if len(group) < 2:
            raise ValueError(
                f"held-out tuning needs at least 2 {k.value} trials, got {len(group)}"
            )
        tune.extend(group[::2])
        ev.extend(group[1::2])
    return ScoreTable(tuple(tune)), ScoreTable(tuple(ev))


def _single_alpha_sweep(
    table: ScoreTable, cost: CostConfig, kind: TrialKind
) -> AlphaSweepResult:
    """Degenerate sweep for splits without a second feature set: the
    only defined weight is 1."""
    gen = [fuse(t.pair, 1.0) for t in table.of_kind(TrialKind.GENUINE)]
    imp = [fuse(t.pair, 1.0) for t in table.of_kind(kind)]
    r = min_dcf(gen, imp, cost)
    return AlphaSweepResult(
        impostor_kind=kind,
        alpha_opt=1.0,
        min_dcf_at_opt=r.min_dcf,
        threshold_at_opt=r.threshold,
        per_alpha=((1.0, r.min_dcf, r.threshold),),
    )


def _report_stem(report: dict) -> str:
    bits = f"_b{report['bits']}" if "bits" in report else ""
    return f"{report['engine']}{report['n_train']}_{report['test_name']}{bits}"


def report_hash(report: dict) -> str:
    body = json.dumps(report, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(body).hexdigest()[:12]


def write_run_artifacts(result: RunResult, out_dir: str) -> dict[str, str]:
    """Write the report JSON, the score table CSV and the DET curves.

    Filenames embed a hash of the report body; an existing identical
    file is left in place, a conflicting one is an error (reports are
    append-only).
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = _report_stem(result.report)
    h = report_hash(result.report)
    paths = {}

    report_path = os.path.join(out_dir, f"report_{stem}_{h}.json")
    body = json.dumps(result.report, sort_keys=True, indent=2) + "\n"
    _write_once(report_path, body)
    paths["report"] = report_path

    table_path = os.path.join(out_dir, f"scores_{stem}_{h}.csv")
    _write_once(table_path, result.table.to_csv())
    paths["scores"] = table_path

    for label, pts in result.det.items():
        det_path = os.path.join(out_dir, f"det_{stem}_{label}_{h}.csv")
        lines = ["p_fa,p_miss"]
        lines += [f"{repr(float(r[0]))},{repr(float(r[1]))}" for r in pts]
        _write_once(det_path, "\n".join(lines) + "\n")
        paths[f"det_{label}"] = det_path
    return paths


def _write_once(path: str, content: str) -> None:
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            if fh.read() == content:
                return
        raise FileExistsError(
            f"{path} exists with different content; refusing to overwrite"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
