"""Shared fixtures: a small prepared benchmark and an exported run directory.

The small benchmark (60 trouble reports, 1024-dim hashed embeddings) prepares
in about a second and is reused session-wide by integration-style tests; unit
tests build their own miniature inputs instead.
"""
from __future__ import annotations

import pytest

from crest import (
    BenchmarkConfig,
    SynthParams,
    export_benchmark,
    prepare_benchmark,
    synth_corpus,
)


@pytest.fixture(scope="session")
def small_config() -> BenchmarkConfig:
    return BenchmarkConfig(n_trs=60, val_size=15, test_size=15, dim=1024)


@pytest.fixture(scope="session")
def small_art(small_config):
    return prepare_benchmark(small_config)


@pytest.fixture(scope="session")
def run_dir(small_art, tmp_path_factory):
    target = tmp_path_factory.mktemp("artifacts") / "bench"
    export_benchmark(small_art, target)
    return target


@pytest.fixture(scope="session")
def tiny_corpus():
    """30 fully-populated TRs plus their qrels, for parser/corpus tests."""
    params = SynthParams(n_trs=30, missing_criterion_rate=0.0)
    return synth_corpus(params, seed=5)
