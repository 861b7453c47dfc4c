import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles module

from sigsplit import (
    FeatureMatrix,
    RawSignature,
    Sample,
    SignatureKind,
    SynthConfig,
    generate,
)


def make_sig(x, y, p, az, al, user_id="u", kind=SignatureKind.GENUINE, session=1):
    """Build a RawSignature from parallel channel arrays."""
    samples = tuple(
        Sample(x=float(a), y=float(b), p=float(c), az=float(d), al=float(e),
               t=10.0 * i)
        for i, (a, b, c, d, e) in enumerate(zip(x, y, p, az, al))
    )
    return RawSignature(samples=samples, user_id=user_id, kind=kind, session=session)


def random_sig(rng, length=40, user_id="u", kind=SignatureKind.GENUINE, session=1):
    return make_sig(
        rng.uniform(0, 5000, length),
        rng.uniform(0, 4000, length),
        rng.uniform(1, 1000, length),
        rng.uniform(0, 3600, length),
        rng.uniform(100, 900, length),
        user_id=user_id,
        kind=kind,
        session=session,
    )


def full_matrix(rng, rows=30):
    """A random canonical 15-channel feature matrix."""
    from sigsplit import ALL_CHANNELS

    labels = tuple(c.value for c in ALL_CHANNELS)
    return FeatureMatrix(rng.standard_normal((rows, 15)), labels)


@pytest.fixture(scope="session")
def tiny_corpus():
    """A small deterministic corpus shared by I/O and pipeline tests:
    4 users, 6 genuine + 2 skilled each, short signatures."""
    cfg = SynthConfig(
        n_users=4,
        genuine_per_user=6,
        skilled_per_user=2,
        length_range=(60, 90),
        rng_seed=123,
    )
    return generate(cfg)
