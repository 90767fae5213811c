"""Threshold classifier: feature extraction, training, and the short-circuit verdict.

Training fits only the chi-square statistic's location and scale, on
encrypted samples alone. Classification runs three ordered checks and
stops at the first failure:

1. chi_abs at or below chi_mean + gamma * chi_sigma. The window widens
   with gamma; values far above the trained mean mark structured data.
   Suspiciously uniform streams (chi far below the mean) are caught by
   check 2 instead, so no lower bound is applied here.
2. chi confidence inside [conf_low_pct, conf_high_pct]; outside that band
   the stream is non-random (too uneven or too perfect a fit).
3. nist_fails at or below max_nist_fails (0 by default).

A payload is Encrypted if and only if all three checks pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import randtests
from .bitstream import ByteStream, from_bytes
from .randtests import DEFAULT_CONFIG, RandomnessReport, TestConfig

ENCRYPTED = "encrypted"
COMPRESSED = "compressed"

CHECK_CHI_ABS = "chi_abs"
CHECK_CHI_CONF = "chi_conf"
CHECK_NIST_FAILS = "nist_fails"

_MODEL_FIELDS = (
    "chi_mean",
    "chi_sigma",
    "gamma",
    "conf_low_pct",
    "conf_high_pct",
    "max_nist_fails",
    "trained_on",
)


@dataclass(frozen=True)
class FeatureVector:
    """The classifier's three inputs, projected from a RandomnessReport."""

    chi_abs: float
    chi_conf_pct: float
    nist_fails: int


@dataclass(frozen=True)
class ThresholdModel:
    chi_mean: float
    chi_sigma: float
    gamma: float
    conf_low_pct: float = 1.0
    conf_high_pct: float = 99.0
    max_nist_fails: int = 0
    trained_on: int = 0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.chi_sigma < 0:
            raise ValueError("chi_sigma must be non-negative")
        if not self.conf_low_pct < self.conf_high_pct:
            raise ValueError("confidence band must satisfy conf_low_pct < conf_high_pct")

    @property
    def chi_upper(self) -> float:
        return self.chi_mean + self.gamma * self.chi_sigma

    def with_gamma(self, gamma: float) -> "ThresholdModel":
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class Verdict:
    label: str
    failed_check: str | None
    checks_evaluated: int

    @property
    def is_encrypted(self) -> bool:
        return self.label == ENCRYPTED


def extract_features(report: RandomnessReport) -> FeatureVector:
    """Project (chi statistic, chi confidence, nist fail count) from a report."""
    return FeatureVector(report.chi.statistic, report.chi.confidence_pct, report.nist_fail_count)


def _chi_abs_of(sample) -> float:
    if isinstance(sample, FeatureVector):
        return sample.chi_abs
    return sample.chi.statistic


def train(encrypted_reports, gamma: float) -> ThresholdModel:
    """Fit chi_mean and chi_sigma (population form) over encrypted samples.

    Accepts RandomnessReports or FeatureVectors. The confidence band and
    the NIST fail allowance are fixed, not fitted.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    values = [_chi_abs_of(r) for r in encrypted_reports]
    n = len(values)
    if n < 2:
        raise ValueError(f"training needs at least 2 encrypted samples, got {n}")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return ThresholdModel(
        chi_mean=mean,
        chi_sigma=var ** 0.5,
        gamma=gamma,
        trained_on=n,
    )


def classify(fv: FeatureVector, model: ThresholdModel) -> Verdict:
    """Ordered threshold checks, short-circuiting on the first failure."""
    if fv.chi_abs > model.chi_upper:
        return Verdict(COMPRESSED, CHECK_CHI_ABS, 1)
    if not model.conf_low_pct <= fv.chi_conf_pct <= model.conf_high_pct:
        return Verdict(COMPRESSED, CHECK_CHI_CONF, 2)
    if fv.nist_fails > model.max_nist_fails:
        return Verdict(COMPRESSED, CHECK_NIST_FAILS, 3)
    return Verdict(ENCRYPTED, None, 3)


def classify_stream(
    s: ByteStream,
    model: ThresholdModel,
    cfg: TestConfig = DEFAULT_CONFIG,
    enforce_floor: bool = True,
) -> Verdict:
    """Lazy classification: chi-square first, SP 800-22 only if checks 1-2 pass.

    Produces the same verdict as run_all + extract_features + classify.
    """
    s = from_bytes(s)
    if enforce_floor and len(s) < 1024:
        raise ValueError(f"classify_stream needs at least 1024 bytes, got {len(s)}")
    chi = randtests.chi_square(s)
    if chi.statistic > model.chi_upper:
        return Verdict(COMPRESSED, CHECK_CHI_ABS, 1)
    if not model.conf_low_pct <= chi.confidence_pct <= model.conf_high_pct:
        return Verdict(COMPRESSED, CHECK_CHI_CONF, 2)
    fails = 0
    for test in randtests.NIST_TESTS:
        if not test(s, cfg).passed:
            fails += 1
            if fails > model.max_nist_fails:
                return Verdict(COMPRESSED, CHECK_NIST_FAILS, 3)
    return Verdict(ENCRYPTED, None, 3)


def save_model(model: ThresholdModel, path) -> None:
    """Write the model as flat key=value text, one field per line.

    Floats are serialized with 17 significant digits, which round-trips
    IEEE doubles bit-exactly.
    """
    lines = []
    for name in _MODEL_FIELDS:
        value = getattr(model, name)
        if isinstance(value, int):
            lines.append(f"{name}={value}")
        else:
            lines.append(f"{name}={value:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ThresholdModel:
    values = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            name, sep, raw = line.partition("=")
            if not sep or name not in _MODEL_FIELDS:
                raise ValueError(f"{path}: unrecognized model line {lineno}: {line!r}")
            values[name] = raw
    missing = [f for f in _MODEL_FIELDS if f not in values]
    if missing:
        raise ValueError(f"{path}: missing model fields: {', '.join(missing)}")
    return ThresholdModel(
        chi_mean=float(values["chi_mean"]),
        chi_sigma=float(values["chi_sigma"]),
        gamma=float(values["gamma"]),
        conf_low_pct=float(values["conf_low_pct"]),
        conf_high_pct=float(values["conf_high_pct"]),
        max_nist_fails=int(values["max_nist_fails"]),
        trained_on=int(values["trained_on"]),
    )
