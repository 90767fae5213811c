"""Experimental protocol: inverse 10-fold splits, gamma sweeps, confusion
accounting, per-filetype breakdowns, and deterministic report emission.

Each repetition draws an independent random 5% of encrypted chunks for
training, discards a paired 5% of compressed chunks, and tests on the
remaining 90%. Split seeds are derived from (seed, size, repetition) only,
so every gamma in a sweep sees identical splits and features are computed
once per chunk.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from random import Random
from statistics import fmean, pstdev

from . import classifier as core
from .bitstream import from_bytes
from .corpus import DatasetManifest, GeneratorConfig, PayloadReader, balance_sample
from .classifier import COMPRESSED, ENCRYPTED, FeatureVector
from .randtests import DEFAULT_CONFIG, TestConfig, run_all
from .seeding import derive_seed


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def _pct(self, x: int) -> float:
        return 100.0 * x / self.total if self.total else 0.0

    @property
    def accuracy_pct(self) -> float:
        return self._pct(self.tp + self.tn)

    @property
    def tp_pct(self) -> float:
        return self._pct(self.tp)

    @property
    def fn_pct(self) -> float:
        return self._pct(self.fn)

    @property
    def fp_pct(self) -> float:
        return self._pct(self.fp)

    @property
    def tn_pct(self) -> float:
        return self._pct(self.tn)


@dataclass(frozen=True)
class CellAggregate:
    counts: tuple

    @property
    def mean_accuracy_pct(self) -> float:
        return fmean(c.accuracy_pct for c in self.counts)

    @property
    def std_accuracy_pct(self) -> float:
        return pstdev(c.accuracy_pct for c in self.counts)

    @property
    def mean_tp_pct(self) -> float:
        return fmean(c.tp_pct for c in self.counts)

    @property
    def mean_fn_pct(self) -> float:
        return fmean(c.fn_pct for c in self.counts)

    @property
    def mean_fp_pct(self) -> float:
        return fmean(c.fp_pct for c in self.counts)

    @property
    def mean_tn_pct(self) -> float:
        return fmean(c.tn_pct for c in self.counts)


@dataclass(frozen=True)
class EvalReport:
    cells: dict
    per_filetype: dict
    repetitions: int
    seed: int

    @property
    def size_classes(self) -> tuple:
        return tuple(sorted({k[0] for k in self.cells}))

    @property
    def gammas(self) -> tuple:
        return tuple(sorted({k[1] for k in self.cells}))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _feature_of(payload: bytes, cfg: TestConfig) -> FeatureVector:
    return core.extract_features(run_all(from_bytes(payload), cfg))


def _feature_batch(root, storage, items, cfg_fields):
    cfg = TestConfig(*cfg_fields)
    manifest = DatasetManifest(
        records=(), seed=0, generator_config=GeneratorConfig(storage=storage), root=Path(root)
    )
    out = []
    with PayloadReader(manifest) as reader:
        for record in items:
            fv = _feature_of(reader.load(record), cfg)
            out.append((record.chunk_id, fv.chi_abs, fv.chi_conf_pct, fv.nist_fails))
    return out


def compute_features(manifest: DatasetManifest, cfg: TestConfig = DEFAULT_CONFIG, workers=None) -> dict:
    """Map chunk_id -> FeatureVector for every record, loading payloads once.

    Results are independent of worker count; batches are merged by chunk_id.
    """
    records = sorted(manifest.records, key=lambda r: r.chunk_id)
    if not records:
        return {}
    if workers is not None and workers > 1:
        cfg_fields = (cfg.alpha, cfg.block_frequency_m, cfg.apen_m)
        n = len(records)
        batch = max(1, math.ceil(n / workers))
        batches = [records[i : i + batch] for i in range(0, n, batch)]
        storage = manifest.generator_config.storage
        features = {}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_feature_batch, str(manifest.root), storage, b, cfg_fields)
                for b in batches
            ]
            for fut in futures:
                for chunk_id, chi_abs, conf, fails in fut.result():
                    features[chunk_id] = FeatureVector(chi_abs, conf, fails)
        return features
    features = {}
    with PayloadReader(manifest) as reader:
        for record in records:
            features[record.chunk_id] = _feature_of(reader.load(record), cfg)
    return features


def _split_records(manifest: DatasetManifest, size_class: int, seed: int):
    enc = sorted(manifest.filter(size_class=size_class, label=ENCRYPTED), key=lambda r: r.chunk_id)
    comp = sorted(manifest.filter(size_class=size_class, label=COMPRESSED), key=lambda r: r.chunk_id)
    if len(enc) < 20 or len(comp) < 20:
        raise ValueError(
            f"size {size_class}: need at least 20 chunks per label to form 5% splits, "
            f"have encrypted={len(enc)} compressed={len(comp)}"
        )
    n_train = _round_half_up(0.05 * len(enc))
    rng = Random(seed)
    train = rng.sample(enc, n_train)
    discarded = rng.sample(comp, n_train)
    train_ids = {r.chunk_id for r in train}
    discard_ids = {r.chunk_id for r in discarded}
    test = [r for r in enc if r.chunk_id not in train_ids]
    test += [r for r in comp if r.chunk_id not in discard_ids]
    return train, test


def _tally(test, features, model) -> ConfusionCounts:
    tp = fn = fp = tn = 0
    for r in test:
        verdict = core.classify(features[r.chunk_id], model)
        if r.label == ENCRYPTED:
            if verdict.label == ENCRYPTED:
                tp += 1
            else:
                fn += 1
        else:
            if verdict.label == ENCRYPTED:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fn, fp, tn)


def inverse_tenfold_once(
    manifest: DatasetManifest,
    size_class: int,
    gamma: float,
    cfg: TestConfig = DEFAULT_CONFIG,
    seed: int = 0,
    features: dict | None = None,
) -> ConfusionCounts:
    """One protocol round: train thresholds on a random 5% of encrypted
    chunks, drop a paired 5% of compressed chunks, classify the rest."""
    train, test = _split_records(manifest, size_class, seed)
    if features is None:
        subset = DatasetManifest(
            records=tuple(manifest.filter(size_class=size_class)),
            seed=manifest.seed,
            generator_config=manifest.generator_config,
            root=manifest.root,
        )
        features = compute_features(subset, cfg)
    model = core.train([features[r.chunk_id] for r in train], gamma)
    return _tally(test, features, model)


def per_filetype_breakdown(
    manifest: DatasetManifest,
    size_class: int,
    gamma: float,
    cfg: TestConfig = DEFAULT_CONFIG,
    seed: int = 0,
    features: dict | None = None,
) -> dict:
    """Map (filetype, label) -> percent correctly classified in one round."""
    train, test = _split_records(manifest, size_class, seed)
    if features is None:
        subset = DatasetManifest(
            records=tuple(manifest.filter(size_class=size_class)),
            seed=manifest.seed,
            generator_config=manifest.generator_config,
            root=manifest.root,
        )
        features = compute_features(subset, cfg)
    model = core.train([features[r.chunk_id] for r in train], gamma)
    hits = {}
    totals = {}
    for r in test:
        key = (r.filetype, r.label)
        verdict = core.classify(features[r.chunk_id], model)
        correct = verdict.label == r.label
        hits[key] = hits.get(key, 0) + int(correct)
        totals[key] = totals.get(key, 0) + 1
    return {k: 100.0 * hits[k] / totals[k] for k in sorted(totals)}


def run_experiment(
    manifest: DatasetManifest,
    size_classes,
    gammas,
    repetitions: int,
    cfg: TestConfig = DEFAULT_CONFIG,
    seed: int = 0,
    per_label_count: int | None = None,
    workers: int | None = None,
    breakdown_gamma: float = 2.0,
) -> EvalReport:
    """Full grid: per size class, balance the manifest, compute features once,
    then run every (repetition, gamma) fold on shared splits."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    cells = {(s, g): [] for s in size_classes for g in gammas}
    per_filetype = {}
    for size in size_classes:
        if per_label_count is not None:
            count = per_label_count
        else:
            enc, comp = manifest.label_counts(size)
            count = min(enc, comp)
        balanced = balance_sample(manifest, count, size, derive_seed(seed, "balance", size))
        features = compute_features(balanced, cfg, workers=workers)
        for rep in range(repetitions):
            fold_seed = derive_seed(seed, "fold", size, rep)
            train, test = _split_records(balanced, size, fold_seed)
            train_features = [features[r.chunk_id] for r in train]
            for gamma in gammas:
                model = core.train(train_features, gamma)
                cells[(size, gamma)].append(_tally(test, features, model))
        breakdown = per_filetype_breakdown(
            balanced, size, breakdown_gamma, cfg, derive_seed(seed, "breakdown", size), features
        )
        for (ft, label), pct in breakdown.items():
            per_filetype[(size, ft, label)] = pct
    aggregated = {key: CellAggregate(counts=tuple(v)) for key, v in cells.items()}
    return EvalReport(cells=aggregated, per_filetype=per_filetype, repetitions=repetitions, seed=seed)


def _fmt_gamma(gamma: float) -> str:
    return f"{gamma:g}"


def emit_report(report: EvalReport, destination) -> list:
    """Write cells.csv, summary.csv, and per_filetype.csv; byte-identical for
    equal reports. Percentages carry 2 decimals."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)

    cell_lines = ["size_class,gamma,rep,tp,fn,fp,tn,accuracy_pct"]
    for (size, gamma) in sorted(report.cells):
        agg = report.cells[(size, gamma)]
        for rep, c in enumerate(agg.counts):
            cell_lines.append(
                f"{size},{_fmt_gamma(gamma)},{rep},{c.tp},{c.fn},{c.fp},{c.tn},{c.accuracy_pct:.2f}"
            )

    summary_lines = ["size_class,gamma,tp_pct,fn_pct,fp_pct,tn_pct,accuracy_pct,accuracy_std"]
    for (size, gamma) in sorted(report.cells):
        if gamma not in (0.1, 2, 2.0):
            continue
        agg = report.cells[(size, gamma)]
        summary_lines.append(
            f"{size},{_fmt_gamma(gamma)},{agg.mean_tp_pct:.2f},{agg.mean_fn_pct:.2f},"
            f"{agg.mean_fp_pct:.2f},{agg.mean_tn_pct:.2f},"
            f"{agg.mean_accuracy_pct:.2f},{agg.std_accuracy_pct:.2f}"
        )

    filetype_lines = ["size_class,filetype,label,accuracy_pct"]
    for (size, ft, label) in sorted(report.per_filetype):
        filetype_lines.append(f"{size},{ft},{label},{report.per_filetype[(size, ft, label)]:.2f}")

    written = []
    for name, lines in (
        ("cells.csv", cell_lines),
        ("summary.csv", summary_lines),
        ("per_filetype.csv", filetype_lines),
    ):
        path = dest / name
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        written.append(path)
    return written
