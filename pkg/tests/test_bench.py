"""Benchmark harness: protocol mechanics on the fast toy model."""
import numpy as np
import pytest

from rnlw.archspec import ArchSpec
from rnlw.bench import BenchResult, benchmark, host_descriptor
from rnlw.blocks import assemble_refinenet
from rnlw.errors import EngineError
from rnlw.graph import random_weights


@pytest.fixture(scope="module")
def toy_model():
    spec = ArchSpec("toy", "lw", 3, channel_plan=(16, 8, 8, 8))
    g = assemble_refinenet(spec)
    return g, random_weights(g, 0)


def test_single_iteration_std_is_zero(toy_model):
    g, w = toy_model
    res = benchmark(g, w, (1, 3, 32, 32), iters=1, warmup=0, seed=0)
    assert res.std_ms == 0.0
    assert res.iterations == 1
    assert res.mean_ms > 0

def test_result_records_protocol(toy_model):
    g, w = toy_model
    res = benchmark(g, w, (1, 3, 32, 32), iters=3, warmup=1, seed=7)
    assert res.warmup == 1
    assert res.seed == 7
    assert res.input_shape == (1, 3, 32, 32)
    assert res.workers == 1
    assert res.host == host_descriptor()
    assert res.std_ms >= 0


def test_mean_reproducible_on_idle_host(toy_model):
    g, w = toy_model
    a = benchmark(g, w, (1, 3, 32, 32), iters=20, warmup=5, seed=0)
    b = benchmark(g, w, (1, 3, 32, 32), iters=20, warmup=5, seed=0)
    assert abs(a.mean_ms - b.mean_ms) / max(a.mean_ms, b.mean_ms) <= 0.20


def test_kv_output_fields(toy_model):
    g, w = toy_model
    kv = benchmark(g, w, (1, 3, 32, 32), iters=2, warmup=0, seed=0).kv()
    for key in ("input=", "iterations=2", "warmup=0", "mean_ms=", "std_ms=", "host="):
        assert key in kv


def test_execution_failure_names_iteration(toy_model):
    g, _ = toy_model
    with pytest.raises(EngineError, match="iteration 0"):
        benchmark(g, {}, (1, 3, 32, 32), iters=1, warmup=0, seed=0)


def test_zero_iters_rejected(toy_model):
    g, w = toy_model
    with pytest.raises(EngineError):
        benchmark(g, w, (1, 3, 32, 32), iters=0, warmup=0, seed=0)
