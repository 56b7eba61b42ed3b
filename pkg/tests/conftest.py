import os

# Keep BLAS single-threaded before numpy loads; kernel tiling provides the
# parallelism and per-cell accumulation order must not depend on thread count.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def single_worker():
    """Each test starts from the default worker count."""
    from rnlw import ops

    ops.set_workers(1)
    yield
    ops.set_workers(1)
