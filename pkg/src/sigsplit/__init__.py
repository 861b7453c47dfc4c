"""Online signature verification with split-feature matchers.

Signatures are 5-channel pen recordings (position, pressure, azimuth,
altitude).  Features are the channels plus first and second delta
regressions, z-scored per signature.  The channel set is split into two
groups, each matched by its own engine (vector quantization or elastic
matching), and the two distances are fused by a swept convex weight.
"""
from .core import (
    ALL_CHANNELS,
    BASE_CHANNELS,
    SPLITS,
    TEST1,
    TEST2,
    TEST3,
    TEST4,
    WHOLE,
    Channel,
    Dataset,
    FeatureMatrix,
    RawSignature,
    Sample,
    ScorePair,
    SignatureKind,
    SplitSpec,
    UserRecord,
    apply_split,
    split_by_name,
    stack_frames,
)
from .data_io import (
    DatasetValidationError,
    ManifestEntry,
    ManifestError,
    Protocol,
    ProtocolSplit,
    SvcParseError,
    load_dataset,
    load_model,
    parse_manifest,
    parse_svc,
    save_model,
    split_protocol,
    write_svc,
)
from .dtw import DtwConfig, DtwModel, dtw, dtw_enroll, dtw_score
from .features import DeltaConfig, delta, delta_delta, extract, zscore
from .fusion import (
    AlphaSweepResult,
    CostConfig,
    MinDcfResult,
    ScoreTable,
    Trial,
    TrialKind,
    alpha_grid,
    dcf,
    det_points,
    fuse,
    identify,
    idr,
    min_dcf,
    sweep_alpha,
)
from .pipeline import RunConfig, RunResult, run_experiment, write_run_artifacts
from .synthetic import SynthConfig, SynthCorpus, generate, write_corpus
from .vq import Codebook, LbgConfig, VqModel, distortion, lbg_train, vq_enroll, vq_score

__version__ = "0.1.0"
