"""Randomness tests over byte payloads.

Three groups:

* ent-style byte diagnostics: shannon_entropy, chi_square, autocorrelation,
  mean_byte, monte_carlo_pi.
* Bit-level battery applied per 20,000-bit block: monobit count, poker,
  runs, long_runs (fips_140_2 runs all four on every block).
* Whole-stream p-value tests: monobit, block_frequency, cumulative_sums,
  approximate_entropy. These run on the full payload as a single sample,
  with no block-size cap.

All functions are pure; ``run_all`` bundles the classifier's inputs into a
RandomnessReport.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import special
from .bitstream import ByteStream, byte_histogram, from_bytes, split_blocks

FIPS_BLOCK_BITS = 20000

# FIPS 140-2 acceptance intervals for maximal-run counts, per run length.
# The length-6 bucket aggregates all runs of 6 or more bits.
RUNS_INTERVALS = {
    1: (2315, 2685),
    2: (1114, 1386),
    3: (527, 723),
    4: (240, 384),
    5: (103, 209),
    6: (103, 209),
}

MONOBIT_COUNT_INTERVAL = (9725, 10275)
POKER_BOUNDS = (2.16, 46.17)
LONG_RUN_LIMIT = 25


@dataclass(frozen=True)
class TestConfig:
    """Parameters shared by the SP 800-22 style tests."""

    alpha: float = 0.01
    block_frequency_m: int = 128
    apen_m: int = 2

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.block_frequency_m < 8:
            raise ValueError("block_frequency_m must be at least 8")
        if self.apen_m < 1:
            raise ValueError("apen_m must be at least 1")


DEFAULT_CONFIG = TestConfig()


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    confidence_pct: float
    degrees_of_freedom: int = 255


@dataclass(frozen=True)
class PValueResult:
    p_value: float
    passed: bool


@dataclass(frozen=True)
class MonteCarloPi:
    estimate: float
    points_used: int


@dataclass(frozen=True)
class PokerResult:
    statistic: float
    passed: bool


@dataclass(frozen=True)
class RunsResult:
    passed: bool
    zeros: dict
    ones: dict


@dataclass(frozen=True)
class LongRunsResult:
    passed: bool
    max_run: int


@dataclass(frozen=True)
class FipsResult:
    monobit_pass: bool
    poker_pass: bool
    runs_pass: bool
    long_runs_pass: bool
    blocks_tested: int
    blocks_failed: int

    @property
    def passed(self) -> bool:
        return self.monobit_pass and self.poker_pass and self.runs_pass and self.long_runs_pass


@dataclass(frozen=True)
class RandomnessReport:
    n_bytes: int
    chi: ChiSquareResult
    block_frequency: PValueResult
    cumulative_sums: PValueResult
    approximate_entropy: PValueResult
    nist_fail_count: int
    entropy_bits_per_byte: float | None = None
    mean_byte: float | None = None
    autocorrelation_lag1: float | None = None
    monte_carlo_pi: float | None = None
    fips: FipsResult | None = None


def shannon_entropy(s: ByteStream) -> float:
    """Entropy of the byte histogram in bits per byte, in [0, 8]."""
    s = from_bytes(s)
    if len(s) == 0:
        raise ValueError("entropy is undefined for an empty stream")
    counts = byte_histogram(s)
    p = counts[counts > 0] / len(s)
    return float(-(p * np.log2(p)).sum()) + 0.0


def chi_square(s: ByteStream) -> ChiSquareResult:
    """Goodness of fit of the byte histogram against uniform, df = 255.

    confidence_pct is the probability (as a percentage) that a truly random
    sequence exceeds the observed statistic.
    """
    s = from_bytes(s)
    n = len(s)
    if n < 256:
        raise ValueError(f"chi_square needs at least 256 bytes, got {n}")
    counts = byte_histogram(s)
    expected = n / 256.0
    statistic = float(((counts - expected) ** 2 / expected).sum())
    confidence = 100.0 * special.regularized_gamma_upper(255 / 2.0, statistic / 2.0)
    return ChiSquareResult(statistic, confidence, 255)


def autocorrelation(s: ByteStream, lag: int = 1) -> float:
    """Pearson correlation of the byte sequence with itself shifted by lag.

    Returns 0.0 when either slice has zero variance (constant stream).
    """
    s = from_bytes(s)
    if lag < 1:
        raise ValueError("lag must be a positive integer")
    if lag >= len(s) - 1:
        raise ValueError(f"lag {lag} too large for a {len(s)}-byte stream")
    a = s.byte_array[:-lag].astype(np.float64)
    b = s.byte_array[lag:].astype(np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float((da * da).sum()) * float((db * db).sum()))
    if denom == 0.0:
        return 0.0
    return float((da * db).sum() / denom)


def mean_byte(s: ByteStream) -> float:
    """Arithmetic mean of the byte values; near 127.5 for random data."""
    s = from_bytes(s)
    if len(s) == 0:
        raise ValueError("mean is undefined for an empty stream")
    return float(s.byte_array.mean())


def monte_carlo_pi(s: ByteStream) -> MonteCarloPi:
    """Monte Carlo estimate of pi from consecutive 6-byte points.

    Each point is two 24-bit coordinates scaled to [0, 1); a point counts as
    inside when x^2 + y^2 < 1. Trailing bytes short of 6 are discarded.
    """
    s = from_bytes(s)
    if len(s) < 12:
        raise ValueError(f"monte_carlo_pi needs at least 12 bytes, got {len(s)}")
    points = len(s) // 6
    trip = s.byte_array[: points * 6].reshape(points, 2, 3).astype(np.float64)
    coords = (trip[:, :, 0] * 65536.0 + trip[:, :, 1] * 256.0 + trip[:, :, 2]) / 16777216.0
    inside = int(((coords ** 2).sum(axis=1) < 1.0).sum())
    return MonteCarloPi(4.0 * inside / points, points)


def monobit(s: ByteStream, cfg: TestConfig = DEFAULT_CONFIG) -> PValueResult:
    """Whole-stream ones/zeros balance: p = erfc(|#ones - #zeros| / sqrt(2n))."""
    s = from_bytes(s)
    n = s.n_bits
    if n < 100:
        raise ValueError(f"monobit needs at least 100 bits, got {n}")
    ones = int(s.bit_array.sum())
    diff = abs(2 * ones - n)
    p = special.erfc(diff / math.sqrt(2.0 * n))
    return PValueResult(p, p >= cfg.alpha)


def _check_block(block) -> np.ndarray:
    block = np.asarray(block, dtype=np.uint8)
    if block.size != FIPS_BLOCK_BITS:
        raise ValueError(f"block must be exactly {FIPS_BLOCK_BITS} bits, got {block.size}")
    return block


def poker(block) -> PokerResult:
    """FIPS 140-2 poker test over 5000 non-overlapping 4-bit segments."""
    block = _check_block(block)
    nibbles = (
        block[0::4].astype(np.int64) * 8
        + block[1::4] * 4
        + block[2::4] * 2
        + block[3::4]
    )
    f = np.bincount(nibbles, minlength=16)
    x = 16.0 / 5000.0 * float((f.astype(np.float64) ** 2).sum()) - 5000.0
    lo, hi = POKER_BOUNDS
    return PokerResult(x, lo < x < hi)


def _run_lengths(block: np.ndarray):
    # lengths and bit values of each maximal run, in order
    changes = np.nonzero(np.diff(block))[0]
    starts = np.concatenate(([0], changes + 1))
    ends = np.concatenate((changes, [block.size - 1]))
    return ends - starts + 1, block[starts]


def runs(block) -> RunsResult:
    """FIPS 140-2 runs test: bucketed maximal-run counts for each bit value."""
    block = _check_block(block)
    lengths, values = _run_lengths(block)
    counts = {}
    for v in (0, 1):
        ls = lengths[values == v]
        buckets = {k: int((ls == k).sum()) for k in range(1, 6)}
        buckets[6] = int((ls >= 6).sum())
        counts[v] = buckets
    ok = all(
        RUNS_INTERVALS[k][0] <= counts[v][k] <= RUNS_INTERVALS[k][1]
        for v in (0, 1)
        for k in range(1, 7)
    )
    return RunsResult(ok, counts[0], counts[1])


def long_runs(block) -> LongRunsResult:
    """FIPS 140-2 long-run test: fails when any run exceeds 25 bits."""
    block = _check_block(block)
    lengths, _ = _run_lengths(block)
    longest = int(lengths.max())
    return LongRunsResult(longest <= LONG_RUN_LIMIT, longest)


def fips_140_2(s: ByteStream) -> FipsResult:
    """Run the four FIPS 140-2 tests independently on each 20,000-bit block."""
    s = from_bytes(s)
    blocks = split_blocks(s, FIPS_BLOCK_BITS)
    if not blocks:
        raise ValueError(
            f"fips_140_2 needs at least {FIPS_BLOCK_BITS} bits ({FIPS_BLOCK_BITS // 8} bytes), got {s.n_bits}"
        )
    mono_ok = poker_ok = runs_ok = long_ok = True
    failed = 0
    lo, hi = MONOBIT_COUNT_INTERVAL
    for block in blocks:
        ones = int(block.sum())
        m = lo <= ones <= hi
        p = poker(block).passed
        r = runs(block).passed
        lr = long_runs(block).passed
        mono_ok &= m
        poker_ok &= p
        runs_ok &= r
        long_ok &= lr
        if not (m and p and r and lr):
            failed += 1
    return FipsResult(mono_ok, poker_ok, runs_ok, long_ok, len(blocks), failed)


def block_frequency(s: ByteStream, cfg: TestConfig = DEFAULT_CONFIG) -> PValueResult:
    """Frequency within block: chi^2 = 4M * sum((pi_i - 1/2)^2), p = Q(N/2, chi^2/2)."""
    s = from_bytes(s)
    m = cfg.block_frequency_m
    n_blocks = s.n_bits // m
    if n_blocks < 1:
        raise ValueError(f"block_frequency needs at least {m} bits, got {s.n_bits}")
    pi = s.bit_array[: n_blocks * m].reshape(n_blocks, m).mean(axis=1)
    chi = 4.0 * m * float(((pi - 0.5) ** 2).sum())
    p = special.regularized_gamma_upper(n_blocks / 2.0, chi / 2.0)
    return PValueResult(p, p >= cfg.alpha)


def cumulative_sums(s: ByteStream, cfg: TestConfig = DEFAULT_CONFIG) -> PValueResult:
    """Forward cumulative sums: z = max |S_k| of the +/-1 walk."""
    s = from_bytes(s)
    n = s.n_bits
    if n < 100:
        raise ValueError(f"cumulative_sums needs at least 100 bits, got {n}")
    walk = np.cumsum(2 * s.bit_array.astype(np.int64) - 1)
    z = int(np.abs(walk).max())
    if z == 0:
        # impossible for a +/-1 walk (S_1 is odd), guarded for completeness
        return PValueResult(0.0, False)
    sqrt_n = math.sqrt(n)
    phi = special.normal_cdf
    total = 1.0
    for k in range(math.ceil((-n / z + 1) / 4), math.floor((n / z - 1) / 4) + 1):
        total -= phi((4 * k + 1) * z / sqrt_n) - phi((4 * k - 1) * z / sqrt_n)
    for k in range(math.ceil((-n / z - 3) / 4), math.floor((n / z - 1) / 4) + 1):
        total += phi((4 * k + 3) * z / sqrt_n) - phi((4 * k + 1) * z / sqrt_n)
    p = min(max(total, 0.0), 1.0)
    return PValueResult(p, p >= cfg.alpha)


def _apen_phi(bits: np.ndarray, m: int, n: int) -> float:
    # overlapping m-bit patterns with wraparound; exactly n patterns
    ext = np.concatenate((bits, bits[: m - 1])) if m > 1 else bits
    vals = np.zeros(n, dtype=np.int64)
    for j in range(m):
        vals = (vals << 1) | ext[j : j + n]
    counts = np.bincount(vals, minlength=1 << m)
    c = counts[counts > 0] / n
    return float((c * np.log(c)).sum())


def approximate_entropy(s: ByteStream, cfg: TestConfig = DEFAULT_CONFIG) -> PValueResult:
    """Approximate entropy: chi^2 = 2n(ln 2 - ApEn(m)), p = Q(2^(m-1), chi^2/2)."""
    s = from_bytes(s)
    n = s.n_bits
    m = cfg.apen_m
    if n < 100:
        raise ValueError(f"approximate_entropy needs at least 100 bits, got {n}")
    if m >= math.log2(n) - 5:
        raise ValueError(f"apen_m={m} too large for {n} bits (need m < log2(n) - 5)")
    bits = s.bit_array
    apen = _apen_phi(bits, m, n) - _apen_phi(bits, m + 1, n)
    chi = 2.0 * n * (math.log(2.0) - apen)
    p = special.regularized_gamma_upper(float(1 << (m - 1)), chi / 2.0)
    return PValueResult(p, p >= cfg.alpha)


NIST_TESTS = (block_frequency, cumulative_sums, approximate_entropy)


def run_all(
    s: ByteStream,
    cfg: TestConfig = DEFAULT_CONFIG,
    include_diagnostics: bool = False,
) -> RandomnessReport:
    """Chi-square plus the three SP 800-22 tests; optional byte diagnostics.

    nist_fail_count is the number of failed tests among block_frequency,
    cumulative_sums, and approximate_entropy (0..3).
    """
    s = from_bytes(s)
    if len(s) < 1024:
        raise ValueError(f"run_all needs at least 1024 bytes, got {len(s)}")
    chi = chi_square(s)
    bf = block_frequency(s, cfg)
    cs = cumulative_sums(s, cfg)
    ae = approximate_entropy(s, cfg)
    fails = sum(1 for r in (bf, cs, ae) if not r.passed)
    extras = {}
    if include_diagnostics:
        extras = {
            "entropy_bits_per_byte": shannon_entropy(s),
            "mean_byte": mean_byte(s),
            "autocorrelation_lag1": autocorrelation(s, 1),
            "monte_carlo_pi": monte_carlo_pi(s).estimate,
            "fips": fips_140_2(s) if s.n_bits >= FIPS_BLOCK_BITS else None,
        }
    return RandomnessReport(
        n_bytes=len(s),
        chi=chi,
        block_frequency=bf,
        cumulative_sums=cs,
        approximate_entropy=ae,
        nist_fail_count=fails,
        **extras,
    )


def interpret_confidence(confidence_pct: float) -> str:
    """Three-tier reading of the chi-square confidence percentage."""
    if confidence_pct > 99.0 or confidence_pct < 1.0:
        return "not random"
    if confidence_pct > 95.0 or confidence_pct < 5.0:
        return "suspect"
    if confidence_pct > 90.0 or confidence_pct < 10.0:
        return "almost suspect"
    return "random"
