import numpy as np
import pytest

from dpglm.data import Dataset
from dpglm.rng import RngHandle


@pytest.fixture
def rng():
    return RngHandle(12345)


def random_dataset(r: RngHandle, n: int, d: int, x_bound: float, y_bound: float) -> Dataset:
    """Random points with certified bounds: norms <= x_bound, |y| <= y_bound."""
    x = r.standard_normal((n, d))
    x = x / np.linalg.norm(x, axis=1, keepdims=True) * (x_bound * r.uniform(size=(n, 1)))
    y = r.uniform(-y_bound, y_bound, size=n)
    return Dataset(x, y, x_bound, y_bound)
