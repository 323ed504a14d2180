import numpy as np
import pytest

from dtour.dataio import Dataset, LabelColumn
from dtour.geometry import random_basis


@pytest.fixture
def rng():
    return np.random.default_rng(20240)


def make_dataset(rng, n=500, p=5, with_labels=False, scale=None):
    cols = [rng.standard_normal(n).astype(np.float32) for _ in range(p)]
    if scale is not None:
        cols = [(c * s).astype(np.float32) for c, s in zip(cols, scale)]
    labels = []
    if with_labels:
        labels = [
            LabelColumn(
                "cls",
                "categorical",
                codes=rng.integers(0, 3, n).astype(np.uint16),
                categories=["a", "b", "c"],
            ),
            LabelColumn("score", "continuous", values=rng.standard_normal(n).astype(np.float32)),
        ]
    return Dataset(cols, [f"d{i}" for i in range(p)], labels)


def rotation_family_basis(alpha, p=4):
    """Plane spanned by (cos a * e1 + sin a * e3, e2): one angle of motion."""
    e = np.eye(p)
    return np.column_stack([np.cos(alpha) * e[:, 0] + np.sin(alpha) * e[:, 2], e[:, 1]])


def basis_pair(rng, p):
    return random_basis(p, rng), random_basis(p, rng)
