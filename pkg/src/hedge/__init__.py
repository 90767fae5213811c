"""Encrypted-vs-compressed payload classification from randomness features.

The package measures byte- and bit-level randomness (chi-square uniformity,
a compact SP 800-22 subset, FIPS 140-2 block tests), trains a chi-square
threshold window on encrypted samples only, and classifies unknown payloads
with three short-circuit checks. Corpus generation, the evaluation protocol,
capture-file ingestion, and a CLI sit on top of that core.
"""

from .bitstream import ByteStream, bits, byte_histogram, from_bytes, pack_bits, split_blocks
from .classifier import (
    CHECK_CHI_ABS,
    CHECK_CHI_CONF,
    CHECK_NIST_FAILS,
    COMPRESSED,
    ENCRYPTED,
    FeatureVector,
    ThresholdModel,
    Verdict,
    classify,
    classify_stream,
    extract_features,
    load_model,
    save_model,
    train,
)
from .randtests import (
    DEFAULT_CONFIG,
    RandomnessReport,
    TestConfig,
    approximate_entropy,
    block_frequency,
    chi_square,
    cumulative_sums,
    fips_140_2,
    interpret_confidence,
    monobit,
    run_all,
    shannon_entropy,
)
from .seeding import derive_seed

__version__ = "0.1.0"

__all__ = [
    "ByteStream",
    "bits",
    "byte_histogram",
    "from_bytes",
    "pack_bits",
    "split_blocks",
    "CHECK_CHI_ABS",
    "CHECK_CHI_CONF",
    "CHECK_NIST_FAILS",
    "COMPRESSED",
    "ENCRYPTED",
    "FeatureVector",
    "ThresholdModel",
    "Verdict",
    "classify",
    "classify_stream",
    "extract_features",
    "load_model",
    "save_model",
    "train",
    "DEFAULT_CONFIG",
    "RandomnessReport",
    "TestConfig",
    "approximate_entropy",
    "block_frequency",
    "chi_square",
    "cumulative_sums",
    "fips_140_2",
    "interpret_confidence",
    "monobit",
    "run_all",
    "shannon_entropy",
    "derive_seed",
    "__version__",
]
