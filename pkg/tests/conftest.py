"""Shared fixtures: synthetic corpora generated once per test session."""

import warnings

import pytest

from hedge.corpus import SIZE_CLASSES, GeneratorConfig, generate_dataset
from hedge.synth import generate_raw_tree

CORPUS_SEED = 42


def build_dataset(root, files_per_type, bytes_per_file, seed, sizes=SIZE_CLASSES, **cfg_kwargs):
    """Raw tree plus derived chunk dataset under one directory."""
    raw = generate_raw_tree(root / "raw", files_per_type, bytes_per_file, seed)
    cfg = GeneratorConfig(sizes=sizes, out_dir=str(root / "data"), **cfg_kwargs)
    with warnings.catch_warnings():
        # CAMELLIA and RAR availability depend on the environment
        warnings.simplefilter("ignore", UserWarning)
        return generate_dataset(raw, cfg, seed)


@pytest.fixture(scope="session")
def acceptance_manifest(tmp_path_factory):
    """Full-size corpus backing the acceptance gate: three raw files per
    filetype, every size class, every available transform."""
    root = tmp_path_factory.mktemp("acceptance_corpus")
    return build_dataset(root, files_per_type=3, bytes_per_file=2_500_000, seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    """Small corpus for protocol-level tests: one raw file per filetype,
    two size classes."""
    root = tmp_path_factory.mktemp("small_corpus")
    return build_dataset(root, files_per_type=1, bytes_per_file=400_000, seed=7, sizes=(1024, 4096))
