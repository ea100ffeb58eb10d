import os

# Pin BLAS parallelism before numpy loads so recorded expectations are
# bit-stable across machines.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from support import build_random_bundle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_bundle(rng):
    return build_random_bundle(rng)
