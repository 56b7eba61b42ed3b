"""Wall-clock benchmarking: warmed-up repeated forward passes, random inputs
regenerated per iteration from the seed, timed with a monotonic clock around
graph execution only. Runs are strictly serial."""
from __future__ import annotations

import platform
import time
from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import EngineError
from .graph import Graph, execute


def host_descriptor() -> str:
    return (f"{platform.platform()} | {platform.processor() or 'unknown-cpu'} | "
            f"python {platform.python_version()} | numpy {np.__version__}")


@dataclass
class BenchResult:
    mean_ms: float
    std_ms: float
    iterations: int
    warmup: int
    input_shape: tuple
    workers: int
    host: str
    seed: int

    def kv(self) -> str:
        lines = [
            "input=" + "x".join(str(v) for v in self.input_shape),
            f"iterations={self.iterations}",
            f"warmup={self.warmup}",
            f"seed={self.seed}",
            f"workers={self.workers}",
            f"mean_ms={self.mean_ms:.3f}",
            f"std_ms={self.std_ms:.3f}",
            f"host={self.host}",
        ]
        return "\n".join(lines) + "\n"


def benchmark(graph: Graph, weights: dict, input_shape, iters: int = 100,
              warmup: int = 10, seed: int = 0) -> BenchResult:
    if iters < 1:
        raise EngineError(f"need at least one iteration, got {iters}")
    rng = np.random.default_rng(seed)
    times = []
    for i in range(warmup + iters):
        x = rng.standard_normal(input_shape).astype(np.float32)  # outside the clock
        t0 = time.perf_counter()
        try:
            execute(graph, weights, x)
        except EngineError as e:
            raise EngineError(f"iteration {i}: {e}") from e
        t1 = time.perf_counter()
        if i >= warmup:
            times.append((t1 - t0) * 1e3)
    arr = np.asarray(times)
    std = float(arr.std(ddof=0)) if len(arr) > 1 else 0.0
    return BenchResult(float(arr.mean()), std, iters, warmup, tuple(input_shape),
                       ops.get_workers(), host_descriptor(), seed)
