import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def z_score(x, expected):
    """Standardized difference of a sample mean from its expectation."""
    x = np.asarray(x, dtype=float)
    return (x.mean(axis=0) - expected) / (x.std(axis=0, ddof=1) / np.sqrt(x.shape[0]))


def batch_se(x, n_batches=50):
    """Batch-means standard error of the mean for a correlated series (axis 0)."""
    x = np.asarray(x, dtype=float)
    m = x.shape[0] // n_batches * n_batches
    b = x[:m].reshape(n_batches, -1, *x.shape[1:]).mean(axis=1)
    return b.std(axis=0, ddof=1) / np.sqrt(n_batches)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
