"""Per-signature feature extraction.

Turns a raw 5-channel pen signature into the 15-channel matrix used by
both matchers: the base channels, their delta-regression derivatives
and the delta of the delta, each column z-scored over the signature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ALL_CHANNELS, FeatureMatrix, RawSignature

__all__ = [
    "DeltaConfig",
    "DEFAULT_DELTA",
    "delta",
    "delta_delta",
    "zscore",
    "extract",
]

# Columns whose population std falls below this are emitted as zeros
# instead of dividing by almost-nothing.
CONSTANT_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class DeltaConfig:
    """Half-window of the delta regression; the window spans
    2 * halfwidth + 1 samples."""

    halfwidth: int = 2

    def __post_init__(self) -> None:
        if self.halfwidth < 1:
            raise ValueError(f"halfwidth must be >= 1, got {self.halfwidth}")

    @property
    def window(self) -> int:
        return 2 * self.halfwidth + 1


DEFAULT_DELTA = DeltaConfig()


def delta(series: np.ndarray, cfg: DeltaConfig = DEFAULT_DELTA) -> np.ndarray:
    """Delta regression of a 1-D series.

    out[n] = sum_{k=-M..M} k * series[n+k] / sum_{k=-M..M} k^2 with the
    endpoints replicated, so the output has the same length as the
    input.  Series shorter than the regression window are rejected.

    Input
    -----
    series: 1-D float array, length >= 2 * halfwidth + 1.

    Output
    ------
    1-D float64 array of the same length.
    """
    s = np.asarray(series, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"series must be 1-D, got shape {s.shape}")
    m = cfg.halfwidth
    if s.size < cfg.window:
        raise ValueError(
            f"series of length {s.size} is shorter than the delta window "
            f"{cfg.window}"
        )
    den = float(sum(k * k for k in range(-m, m + 1)))
    padded = np.pad(s, m, mode="edge")
    # Pair the +k and -k taps so a constant series cancels exactly.
    out = np.zeros(s.size, dtype=np.float64)
    for k in range(1, m + 1):
        out += k * (padded[m + k : m + k + s.size] - padded[m - k : m - k + s.size])
    return out / den


def delta_delta(series: np.ndarray, cfg: DeltaConfig = DEFAULT_DELTA) -> np.ndarray:
    """Second-order delta: the delta regression applied twice."""
    return delta(delta(series, cfg), cfg)


def zscore(column: np.ndarray) -> np.ndarray:
    """Z-score a 1-D column with the population standard deviation.

    Constant columns (population std below ``CONSTANT_STD_FLOOR``) come
    back as all zeros rather than dividing by noise.
    """
    c = np.asarray(column, dtype=np.float64)
    if c.ndim != 1:
        raise ValueError(f"column must be 1-D, got shape {c.shape}")
    if c.size == 0:
        raise ValueError("cannot z-score an empty column")
    mean = c.mean()
    std = c.std()  # ddof=0: population std
    if std < CONSTANT_STD_FLOOR:
        return np.zeros_like(c)
    return (c - mean) / std


def extract(sig: RawSignature, cfg: DeltaConfig = DEFAULT_DELTA) -> FeatureMatrix:
    """Build the full 15-channel feature matrix of one signature.

    Derivatives are taken on the raw channels first; z-scoring happens
    afterwards, per column, over this signature only.  Column order is
    the canonical one: the 5 base channels, their deltas, then their
    delta-deltas.
    """
    base = sig.channel_matrix()
    if base.shape[0] < cfg.window:
        raise ValueError(
            f"signature with {base.shape[0]} samples is shorter than the "
            f"delta window {cfg.window}"
        )
    cols = [base[:, j] for j in range(5)]
    cols += [delta(base[:, j], cfg) for j in range(5)]
    cols += [delta_delta(base[:, j], cfg) for j in range(5)]
    data = np.column_stack([zscore(c) for c in cols])
    return FeatureMatrix(data, tuple(c.value for c in ALL_CHANNELS))
