"""Command-line entry point.

Subcommands: gen (build a labeled chunk dataset), train (fit thresholds on a
manifest's encrypted chunks), classify (file or chunk to verdict), pcap
(capture-file analysis), eval (experiment grid plus report files), rand
(randomness diagnostics for one input).

Exit codes: 0 success, 1 usage error, 2 runtime error. The effective
configuration is echoed to standard error so every run is reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from random import Random

from . import capture as capmod
from . import classifier as core
from . import corpus, evaluate
from .bitstream import from_bytes
from .randtests import TestConfig, interpret_confidence, run_all
from .seeding import derive_seed


def _int_list(text: str) -> tuple:
    try:
        values = tuple(int(x) for x in text.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _float_list(text: str) -> tuple:
    try:
        values = tuple(float(x) for x in text.split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _add_test_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.01, help="significance level for the SP 800-22 tests")
    p.add_argument("--block-m", type=int, default=128, help="block length for the frequency-within-block test")
    p.add_argument("--apen-m", type=int, default=2, help="pattern length for the approximate entropy test")


def _test_config(args) -> TestConfig:
    return TestConfig(alpha=args.alpha, block_frequency_m=args.block_m, apen_m=args.apen_m)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hedge",
        description="Distinguish encrypted from compressed payloads with randomness thresholds.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen", help="generate a labeled chunk dataset from a raw file tree")
    p.add_argument("--raw", required=True, help="directory with img/ pdf/ txt/ mp3/ video/ bin/ subdirectories")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=_int_list, default=corpus.SIZE_CLASSES)
    p.add_argument("--methods", default=",".join(corpus.ALL_METHODS))
    p.add_argument("--storage", choices=("packed", "files"), default="packed")
    p.add_argument("--drop-first-chunk", action="store_true")

    p = sub.add_parser("train", help="fit thresholds on a manifest's encrypted chunks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--size", type=int, required=True, help="size class in bytes")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None, help="train on this many encrypted chunks (default: all)")
    p.add_argument("--out", required=True, help="model file to write")
    _add_test_config_flags(p)

    p = sub.add_parser("classify", help="classify files or a manifest chunk")
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=None, help="override the model's gamma")
    p.add_argument("--manifest", default=None)
    p.add_argument("--chunk-id", default=None)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("inputs", nargs="*", help="payload files")
    _add_test_config_flags(p)

    p = sub.add_parser("pcap", help="classify sampled payloads from a capture file")
    p.add_argument("--model", required=True)
    p.add_argument("--probability", type=float, default=1.0)
    p.add_argument("--min-bytes", type=int, default=capmod.CLASSIFIER_FLOOR_BYTES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("capture_file")
    _add_test_config_flags(p)

    p = sub.add_parser("eval", help="run the experiment grid and emit report files")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--sizes", type=_int_list, default=None, help="default: sizes present in the manifest")
    p.add_argument("--gammas", type=_float_list, default=(0.1, 2.0))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None, help="chunks per label per size (default: all available)")
    p.add_argument("--workers", type=int, default=None, help="default: available parallelism")
    _add_test_config_flags(p)

    p = sub.add_parser("rand", help="print randomness statistics for one input file")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("input")
    _add_test_config_flags(p)

    return parser


def _echo_config(args) -> None:
    items = sorted((k, v) for k, v in vars(args).items() if k != "command")
    rendered = " ".join(f"{k.replace('_', '-')}={v}" for k, v in items)
    print(f"hedge {args.command}: {rendered}", file=sys.stderr)


def _emit_rows(rows, header, fmt) -> None:
    if fmt == "csv":
        print(",".join(header))
        for row in rows:
            print(",".join(str(x) for x in row))
        return
    widths = [len(h) for h in header]
    rendered = [[str(x) for x in row] for row in rows]
    for row in rendered:
        widths = [max(w, len(x)) for w, x in zip(widths, row)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rendered:
        print("  ".join(x.ljust(w) for x, w in zip(row, widths)))


def _cmd_gen(args) -> None:
    methods = tuple(m for m in args.methods.split(",") if m)
    config = corpus.GeneratorConfig(
        methods=methods,
        sizes=args.sizes,
        storage=args.storage,
        drop_first_chunk=args.drop_first_chunk,
        out_dir=args.out,
    )
    manifest = corpus.generate_dataset(args.raw, config, args.seed)
    for size in manifest.size_classes:
        enc, comp = manifest.label_counts(size)
        print(f"size={size} encrypted={enc} compressed={comp}")
    if manifest.generator_config.skipped:
        print(f"skipped methods: {','.join(manifest.generator_config.skipped)}")
    print(f"manifest: {Path(args.out) / 'manifest.tsv'}")


def _cmd_train(args) -> None:
    manifest = corpus.load_manifest(args.manifest)
    enc = sorted(manifest.filter(size_class=args.size, label=core.ENCRYPTED), key=lambda r: r.chunk_id)
    if args.count is not None:
        if args.count > len(enc):
            raise ValueError(f"requested {args.count} training chunks, only {len(enc)} encrypted available")
        enc = Random(derive_seed(args.seed, "train", args.size)).sample(enc, args.count)
        enc.sort(key=lambda r: r.chunk_id)
    subset = corpus.DatasetManifest(
        records=tuple(enc), seed=manifest.seed, generator_config=manifest.generator_config, root=manifest.root
    )
    features = evaluate.compute_features(subset, _test_config(args))
    model = core.train([features[r.chunk_id] for r in enc], args.gamma)
    core.save_model(model, args.out)
    print(f"model: {args.out}")
    print(
        f"chi_mean={model.chi_mean:.6f} chi_sigma={model.chi_sigma:.6f} "
        f"gamma={model.gamma:g} trained_on={model.trained_on}"
    )


def _classify_one(payload: bytes, name: str, model, cfg) -> tuple:
    verdict = core.classify_stream(from_bytes(payload), model, cfg)
    return (name, len(payload), verdict.label, verdict.failed_check or "-", verdict.checks_evaluated)


def _cmd_classify(args) -> None:
    model = core.load_model(args.model)
    if args.gamma is not None:
        model = model.with_gamma(args.gamma)
    cfg = _test_config(args)
    rows = []
    if args.chunk_id is not None or args.manifest is not None:
        if not (args.chunk_id and args.manifest):
            raise ValueError("--manifest and --chunk-id must be given together")
        manifest = corpus.load_manifest(args.manifest)
        matches = [r for r in manifest.records if r.chunk_id == args.chunk_id]
        if not matches:
            raise ValueError(f"chunk {args.chunk_id!r} not found in {args.manifest}")
        payload = corpus.load_payload(manifest, matches[0])
        rows.append(_classify_one(payload, args.chunk_id, model, cfg))
    for name in args.inputs:
        rows.append(_classify_one(Path(name).read_bytes(), name, model, cfg))
    if not rows:
        raise ValueError("nothing to classify: pass payload files or --manifest with --chunk-id")
    _emit_rows(rows, ("input", "payload_bytes", "label", "failed_check", "checks_evaluated"), args.format)


def _cmd_pcap(args) -> None:
    model = core.load_model(args.model)
    result = capmod.classify_capture(
        args.capture_file,
        model,
        _test_config(args),
        probability=args.probability,
        min_bytes=args.min_bytes,
        seed=args.seed,
    )
    rows = [
        (
            v.packet_index,
            f"{v.timestamp:.6f}",
            v.transport,
            v.src,
            v.sport,
            v.dst,
            v.dport,
            v.payload_bytes,
            v.label,
            v.failed_check or "-",
            v.checks_evaluated,
        )
        for v in result.verdicts
    ]
    header = (
        "packet_index",
        "timestamp",
        "transport",
        "src",
        "sport",
        "dst",
        "dport",
        "payload_bytes",
        "label",
        "failed_check",
        "checks_evaluated",
    )
    _emit_rows(rows, header, args.format)
    skips = result.skips
    print(
        f"encrypted={result.encrypted} compressed={result.compressed} sampled={result.sampled} "
        f"skipped_short={result.skipped_short} skipped_parse={skips.total} "
        f"(non_ip={skips.non_ip} non_transport={skips.non_transport} fragmented={skips.fragmented} "
        f"truncated={skips.truncated} empty={skips.empty})",
        file=sys.stderr,
    )


def _cmd_eval(args) -> None:
    manifest = corpus.load_manifest(args.manifest)
    sizes = args.sizes if args.sizes is not None else manifest.size_classes
    workers = args.workers if args.workers is not None else os.cpu_count()
    report = evaluate.run_experiment(
        manifest,
        sizes,
        args.gammas,
        repetitions=args.reps,
        cfg=_test_config(args),
        seed=args.seed,
        per_label_count=args.count,
        workers=workers,
    )
    written = evaluate.emit_report(report, args.out)
    rows = []
    for (size, gamma) in sorted(report.cells):
        agg = report.cells[(size, gamma)]
        rows.append((size, f"{gamma:g}", f"{agg.mean_accuracy_pct:.2f}", f"{agg.std_accuracy_pct:.2f}"))
    _emit_rows(rows, ("size_class", "gamma", "accuracy_pct", "std"), "table")
    for path in written:
        print(f"wrote {path}", file=sys.stderr)


def _cmd_rand(args) -> None:
    data = Path(args.input).read_bytes()
    report = run_all(from_bytes(data), _test_config(args), include_diagnostics=True)
    rows = [
        ("n_bytes", report.n_bytes),
        ("entropy_bits_per_byte", f"{report.entropy_bits_per_byte:.6f}"),
        ("mean_byte", f"{report.mean_byte:.4f}"),
        ("chi_statistic", f"{report.chi.statistic:.4f}"),
        ("chi_confidence_pct", f"{report.chi.confidence_pct:.4f}"),
        ("chi_interpretation", interpret_confidence(report.chi.confidence_pct)),
        ("autocorrelation_lag1", f"{report.autocorrelation_lag1:.6f}"),
        ("block_frequency_p", f"{report.block_frequency.p_value:.6f}"),
        ("block_frequency_pass", report.block_frequency.passed),
        ("cumulative_sums_p", f"{report.cumulative_sums.p_value:.6f}"),
        ("cumulative_sums_pass", report.cumulative_sums.passed),
        ("approximate_entropy_p", f"{report.approximate_entropy.p_value:.6f}"),
        ("approximate_entropy_pass", report.approximate_entropy.passed),
        ("nist_fail_count", report.nist_fail_count),
    ]
    if report.monte_carlo_pi is not None:
        rows.append(("monte_carlo_pi", f"{report.monte_carlo_pi:.6f}"))
    if report.fips is not None:
        rows.extend(
            [
                ("fips_monobit_pass", report.fips.monobit_pass),
                ("fips_poker_pass", report.fips.poker_pass),
                ("fips_runs_pass", report.fips.runs_pass),
                ("fips_long_runs_pass", report.fips.long_runs_pass),
                ("fips_blocks_tested", report.fips.blocks_tested),
                ("fips_blocks_failed", report.fips.blocks_failed),
            ]
        )
    _emit_rows(rows, ("statistic", "value"), args.format)


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "pcap": _cmd_pcap,
    "eval": _cmd_eval,
    "rand": _cmd_rand,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    _echo_config(args)
    try:
        _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
