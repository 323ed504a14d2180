"""Input validation helpers shared by the public entry points."""

import numpy as np

from .errors import DegenerateBasis, DimensionMismatch

# Double-precision noise floor with margin; used for all degeneracy checks.
EPS_DEGENERATE = 1e-12

# Orthonormality tolerance a basis must satisfy to be considered valid.
BASIS_ATOL = 1e-10


def as_float_matrix(x, name="array", n_cols=None):
    """Coerce to a C-contiguous float64 2-D array, validating shape."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if n_cols is not None and m.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {m.shape[1]}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(m)


def basis_drift(f):
    """Max deviation of a p-by-2 matrix from column orthonormality."""
    f = np.asarray(f, dtype=np.float64)
    n0 = np.linalg.norm(f[:, 0])
    n1 = np.linalg.norm(f[:, 1])
    dot = float(f[:, 0] @ f[:, 1])
    return max(abs(n0 - 1.0), abs(n1 - 1.0), abs(dot))


def check_basis(f, name="basis", atol=BASIS_ATOL):
    """Validate a p-by-2 column-orthonormal basis; returns it as float64."""
    f = as_float_matrix(f, name=name, n_cols=2)
    if f.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 data dimensions, got {f.shape[0]}")
    drift = basis_drift(f)
    if drift > atol:
        raise DegenerateBasis(f"{name} is not orthonormal (drift {drift:.3e})")
    return f


def check_same_dims(a, b):
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(
            f"bases live in different spaces: {a.shape[0]} vs {b.shape[0]} dims"
        )
