"""Synthetic signature corpus generator.

Each user gets a latent prototype: x/y pen trajectories built from a
small random mix of sinusoids, a smooth positive pressure envelope and
slowly drifting pen angles.  Genuine samples re-render the prototype
through a mild monotone time warp plus jitter; a skilled forgery reuses
the *target's* trajectory but a stronger warp, more jitter and the
*forger's own* pressure/angle habits.  Output is quantized to
tablet-like integer units so files round-trip exactly.

Generation is deterministic for a given seed.  A corpus-level
separability check (genuine sit closer to their own prototype than
forgeries do) runs before the corpus is accepted; on failure the next
seed is tried and the outcome is recorded in the provenance record.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .core import Dataset, RawSignature, Sample, SignatureKind, UserRecord
from .data_io import ManifestEntry, format_manifest, write_svc
from .dtw import DEFAULT_DTW, dtw
from .features import DEFAULT_DELTA, extract

__all__ = ["SynthConfig", "SynthCorpus", "generate", "write_corpus"]

# Warp strengths (exponent scale of the local sampling-rate wobble).
GENUINE_WARP = 0.18
FORGERY_WARP = 0.45

# Per-channel jitter scale in device units; multiplied by the config
# noise levels.
JITTER_SCALE = {"x": 28.0, "y": 28.0, "p": 22.0, "az": 30.0, "al": 14.0}

MAX_GENERATION_ATTEMPTS = 5


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 20
    genuine_per_user: int = 10
    skilled_per_user: int = 5
    length_range: tuple[int, int] = (150, 250)
    intra_user_noise: float = 1.0
    forgery_distortion: float = 2.5
    rng_seed: int = 7

    def __post_init__(self) -> None:
        object.__setattr__(self, "length_range", tuple(self.length_range))
        if self.n_users < 2:
            raise ValueError("need at least 2 users")
        if self.genuine_per_user < 1:
            raise ValueError("need at least 1 genuine signature per user")
        if self.skilled_per_user < 0:
            raise ValueError("skilled_per_user must be >= 0")
        lo, hi = self.length_range
        if lo < DEFAULT_DELTA.window:
            raise ValueError(
                f"minimum length {lo} cannot carry the derivative window "
                f"({DEFAULT_DELTA.window})"
            )
        if hi < lo:
            raise ValueError(f"bad length range {self.length_range}")
        if self.intra_user_noise <= 0:
            raise ValueError("intra_user_noise must be > 0")
        if self.forgery_distortion <= self.intra_user_noise:
            raise ValueError(
                "forgery_distortion must exceed intra_user_noise, got "
                f"{self.forgery_distortion} <= {self.intra_user_noise}"
            )


@dataclass(frozen=True)
class SynthCorpus:
    dataset: Dataset
    manifest: tuple[ManifestEntry, ...]
    provenance: dict


_FREQ_BAND = (0.6, 2.8)


class _Prototype:
    """Analytic per-user signature template, evaluated at arbitrary
    normalized positions tau in [0, 1].

    ``slot = (index, count)`` reserves a user-specific band for the
    dominant trajectory frequency, so no two users of one corpus can
    draw near-identical pen loops; the remaining components stay fully
    random.  The y-axis walks the bands in a decorrelated order so
    users adjacent in x differ in y.
    """

    def __init__(self, rng: np.random.Generator, slot: tuple[int, int] | None = None):
        self.xy = []
        for axis, (center, spread) in enumerate(((3500.0, 700.0), (2500.0, 500.0))):
            n = int(rng.integers(3, 6))
            amp0 = rng.uniform(300.0, spread)
            amps = amp0 / (1.0 + np.arange(n))
            freqs = rng.uniform(*_FREQ_BAND, size=n)
            if slot is not None:
                idx, count = slot
                pos = idx if axis == 0 else _decorrelate(idx, count)
                width = (_FREQ_BAND[1] - _FREQ_BAND[0]) / count
                freqs[0] = _FREQ_BAND[0] + (pos + rng.uniform(0.25, 0.75)) * width
            phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
            self.xy.append((center, amps, freqs, phases))
        self.p_base = rng.uniform(450.0, 700.0)
        self.p_amp = rng.uniform(120.0, 260.0)
        self.p_freq = rng.uniform(0.8, 2.0)
        self.p_phase = rng.uniform(0.0, 2.0 * np.pi)
        self.az_center = rng.uniform(1200.0, 2400.0)
        self.az_amp = rng.uniform(150.0, 400.0)
        self.az_freq = rng.uniform(0.3, 1.0)
        self.az_phase = rng.uniform(0.0, 2.0 * np.pi)
        self.al_center = rng.uniform(500.0, 750.0)
        self.al_amp = rng.uniform(60.0, 150.0)
        self.al_freq = rng.uniform(0.3, 1.0)
        self.al_phase = rng.uniform(0.0, 2.0 * np.pi)

    def trajectory(self, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for center, amps, freqs, phases in self.xy:
            v = np.full_like(tau, center)
            for a, f, ph in zip(amps, freqs, phases):
                v = v + a * np.sin(2.0 * np.pi * f * tau + ph)
            out.append(v)
        return out[0], out[1]

    def dynamics(self, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        envelope = np.sqrt(np.clip(np.sin(np.pi * tau), 0.0, None))
        p = envelope * (
            self.p_base + self.p_amp * np.sin(2.0 * np.pi * self.p_freq * tau + self.p_phase)
        )
        az = self.az_center + self.az_amp * np.sin(
            2.0 * np.pi * self.az_freq * tau + self.az_phase
        )
        al = self.al_center + self.al_amp * np.sin(
            2.0 * np.pi * self.al_freq * tau + self.al_phase
        )
        return p, az, al


def _decorrelate(idx: int, count: int) -> int:
    """Map band index i to (i * step) mod count with step coprime to
    count and near the golden ratio, spreading neighbors apart."""
    step = max(1, round(0.618 * count))
    while np.gcd(step, count) != 1:
        step += 1
    return (idx * step) % count


def _warp(rng: np.random.Generator, length: int, strength: float) -> np.ndarray:
    """Smooth strictly monotone positions in [0, 1]."""
    control = rng.standard_normal(8)
    u = np.interp(np.linspace(0.0, 1.0, length - 1), np.linspace(0.0, 1.0, 8), control)
    inc = np.exp(strength * u)
    tau = np.concatenate([[0.0], np.cumsum(inc)])
    return tau / tau[-1]


def _quantize(x, y, p, az, al) -> tuple[np.ndarray, ...]:
    x = np.clip(np.rint(x), 0, None)
    y = np.clip(np.rint(y), 0, None)
    p = np.clip(np.rint(p), 0, 1023)
    az = np.clip(np.rint(az), 0, 3600)
    al = np.clip(np.rint(al), 0, 900)
    return x, y, p, az, al


def _to_signature(
    x, y, p, az, al, user_id: str, kind: SignatureKind, session: int
) -> RawSignature:
    samples = tuple(
        Sample(x=float(xi), y=float(yi), p=float(pi), az=float(azi), al=float(ali),
               t=10.0 * i)
        for i, (xi, yi, pi, azi, ali) in enumerate(zip(x, y, p, az, al))
    )
    return RawSignature(samples=samples, user_id=user_id, kind=kind, session=session)


def _render(
    traj_proto: _Prototype,
    dyn_proto: _Prototype,
    rng: np.random.Generator,
    length: int,
    warp_strength: float,
    noise: float,
) -> tuple[np.ndarray, ...]:
    tau = _warp(rng, length, warp_strength)
    x, y = traj_proto.trajectory(tau)
    p, az, al = dyn_proto.dynamics(tau)
    x = x + rng.normal(0.0, noise * JITTER_SCALE["x"], size=length)
    y = y + rng.normal(0.0, noise * JITTER_SCALE["y"], size=length)
    p = p + rng.normal(0.0, noise * JITTER_SCALE["p"], size=length)
    az = az + rng.normal(0.0, noise * JITTER_SCALE["az"], size=length)
    al = al + rng.normal(0.0, noise * JITTER_SCALE["al"], size=length)
    return _quantize(x, y, p, az, al)


def _user_label(i: int, n_users: int) -> str:
    width = max(2, len(str(n_users)))
    return f"u{i + 1:0{width}d}"


def _generate_once(cfg: SynthConfig, seed: int) -> tuple[Dataset, list[_Prototype]]:
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(2 * cfg.n_users)
    proto_rngs = [np.random.default_rng(c) for c in children[: cfg.n_users]]
    forgery_rngs = [np.random.default_rng(c) for c in children[cfg.n_users :]]
    protos = [_Prototype(r, slot=(i, cfg.n_users)) for i, r in enumerate(proto_rngs)]
    lo, hi = cfg.length_range
    users = []
    for i in range(cfg.n_users):
        user_id = _user_label(i, cfg.n_users)
        rng = proto_rngs[i]
        genuine = []
        for s in range(cfg.genuine_per_user):
            length = int(rng.integers(lo, hi + 1))
            cols = _render(protos[i], protos[i], rng, length, GENUINE_WARP,
                           cfg.intra_user_noise)
            genuine.append(
                _to_signature(*cols, user_id, SignatureKind.GENUINE, s + 1)
            )
        skilled = []
        frng = forgery_rngs[i]
        for s in range(cfg.skilled_per_user):
            forger = (i + 1 + s) % cfg.n_users
            if forger == i:
                forger = (i + 1) % cfg.n_users
            length = int(frng.integers(lo, hi + 1))
            cols = _render(protos[i], protos[forger], frng, length, FORGERY_WARP,
                           cfg.forgery_distortion)
            skilled.append(
                _to_signature(*cols, user_id, SignatureKind.SKILLED_FORGERY, s + 1)
            )
        users.append(UserRecord(user_id=user_id, genuine=tuple(genuine),
                                skilled=tuple(skilled)))
    return Dataset(users=tuple(users)), protos


def _separability(cfg: SynthConfig, ds: Dataset, protos: list[_Prototype]) -> dict:
    """Mean feature-space alignment cost of genuine vs forged signatures
    against their user's clean prototype rendering."""
    lo, hi = cfg.length_range
    mid = (lo + hi) // 2
    tau = np.linspace(0.0, 1.0, mid)
    g_dists = []
    f_dists = []
    for i, u in enumerate(ds.users):
        x, y = protos[i].trajectory(tau)
        p, az, al = protos[i].dynamics(tau)
        ref_sig = _to_signature(
            *_quantize(x, y, p, az, al), u.user_id, SignatureKind.GENUINE, 0
        )
        ref = extract(ref_sig)
        for sig in u.genuine:
            g_dists.append(dtw(extract(sig), ref, DEFAULT_DTW))
        for sig in u.skilled:
            f_dists.append(dtw(extract(sig), ref, DEFAULT_DTW))
    genuine_mean = float(np.mean(g_dists))
    skilled_mean = float(np.mean(f_dists)) if f_dists else float("inf")
    return {
        "genuine_mean": genuine_mean,
        "skilled_mean": skilled_mean,
        "passed": bool(genuine_mean < skilled_mean),
    }


def _manifest_entries(ds: Dataset) -> tuple[ManifestEntry, ...]:
    entries = []
    for u in ds.users:
        for sig in u.genuine:
            entries.append(
                ManifestEntry(
                    path=f"{u.user_id}/{u.user_id}_g{sig.session:02d}.svc",
                    user_id=u.user_id,
                    kind=SignatureKind.GENUINE,
                    session=sig.session,
                )
            )
        for sig in u.skilled:
            entries.append(
                ManifestEntry(
                    path=f"{u.user_id}/{u.user_id}_f{sig.session:02d}.svc",
                    user_id=u.user_id,
                    kind=SignatureKind.SKILLED_FORGERY,
                    session=sig.session,
                )
            )
    return tuple(entries)


def generate(cfg: SynthConfig) -> SynthCorpus:
    """Generate a corpus, retrying with consecutive seeds until the
    separability check passes (it does on the first attempt for any
    sane noise settings)."""
    last_check: dict = {}
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        seed = cfg.rng_seed + attempt
        ds, protos = _generate_once(cfg, seed)
        check = _separability(cfg, ds, protos) if cfg.skilled_per_user else {
            "genuine_mean": None, "skilled_mean": None, "passed": True,
        }
        if check["passed"]:
            provenance = {
                "config": {**asdict(cfg), "length_range": list(cfg.length_range)},
                "seed_requested": cfg.rng_seed,
                "seed_used": seed,
                "attempts": attempt + 1,
                "separability": check,
            }
            return SynthCorpus(
                dataset=ds, manifest=_manifest_entries(ds), provenance=provenance
            )
        last_check = check
    raise RuntimeError(
        f"could not generate a separable corpus in {MAX_GENERATION_ATTEMPTS} "
        f"attempts; last check: {last_check}"
    )


def write_corpus(corpus: SynthCorpus, out_dir: str) -> None:
    """Write the corpus as one .svc file per signature plus the manifest
    and a provenance record.  Rewriting with the same config produces a
    byte-identical tree."""
    os.makedirs(out_dir, exist_ok=True)
    by_path = {}
    for u in corpus.dataset.users:
        for sig in u.genuine:
            by_path[f"{u.user_id}/{u.user_id}_g{sig.session:02d}.svc"] = sig
        for sig in u.skilled:
            by_path[f"{u.user_id}/{u.user_id}_f{sig.session:02d}.svc"] = sig
    for entry in corpus.manifest:
        sig = by_path[entry.path]
        full = os.path.join(out_dir, entry.path)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "w", encoding="utf-8") as fh:
            fh.write(write_svc(sig))
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_manifest(corpus.manifest))
    with open(os.path.join(out_dir, "synth_config.json"), "w", encoding="utf-8") as fh:
        json.dump(corpus.provenance, fh, indent=2, sort_keys=True)
        fh.write("\n")
