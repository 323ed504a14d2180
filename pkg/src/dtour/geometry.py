"""Core linear algebra on 2D projection bases.

A *basis* throughout this package is a p-by-2 matrix with orthonormal
columns: it maps p-dimensional data to the 2D view plane. Distances
between bases are measured between the *subspaces* they span (principal
angles), so any in-plane rotation of a basis is distance zero from the
original.

All functions here are pure and operate on plain numpy arrays; they are
safe to call concurrently.
"""

import math
from typing import NamedTuple

import numpy as np

from ._validation import EPS_DEGENERATE, as_float_matrix, check_basis, check_same_dims
from .errors import DegenerateBasis, DegeneratePointSet

__all__ = [
    "gram_schmidt",
    "svd_2x2",
    "principal_angles",
    "geodesic_distance",
    "nearest_orthonormal",
    "procrustes_align",
    "geodesic_interpolate",
    "random_basis",
    "rotation2",
    "Svd2",
    "ProcrustesResult",
]

# Singular values this close to 1 are treated as exactly cos(0); suppresses
# NaN/noise from arccos just above 1 after rounding.
_COS_SNAP = 1e-12


class Svd2(NamedTuple):
    """Factorization m = u @ diag(s) @ vt with s[0] >= s[1] >= 0.

    ``u`` always has determinant +1; a reflection in ``m`` shows up as
    det(vt) == -1.
    """

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


class ProcrustesResult(NamedTuple):
    """Orthogonal alignment of one centered point set onto another.

    ``determinant`` is +1 for a pure rotation and -1 when the optimal
    transform includes a reflection; callers that need orientation
    continuity can reject the latter.
    """

    rotation: np.ndarray
    determinant: float
    aligned: np.ndarray


def rotation2(angle):
    """2x2 counterclockwise rotation matrix."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def gram_schmidt(m):
    """Orthonormalize the two columns of ``m``, first column first.

    The first output column is the normalized first input column; the
    second is the normalized residual of the second column. A second
    projection pass keeps the result orthonormal to ~1e-15 even for
    nearly parallel inputs.

    Raises DegenerateBasis when either column norm or the residual norm
    falls below the degeneracy floor (rank < 2).
    """
    m = as_float_matrix(m, "matrix", n_cols=2)
    c0 = m[:, 0]
    n0 = np.linalg.norm(c0)
    if n0 < EPS_DEGENERATE:
        raise DegenerateBasis("first column has (near-)zero norm")
    q0 = c0 / n0

    r = m[:, 1] - (q0 @ m[:, 1]) * q0
    n1 = np.linalg.norm(r)
    if n1 < EPS_DEGENERATE * max(1.0, np.linalg.norm(m[:, 1])):
        raise DegenerateBasis("columns are parallel within the degeneracy floor")
    r -= (q0 @ r) * q0
    n1 = np.linalg.norm(r)
    if n1 < EPS_DEGENERATE:
        raise DegenerateBasis("columns are parallel within the degeneracy floor")

    out = np.empty_like(m)
    out[:, 0] = q0
    out[:, 1] = r / n1
    return out


def svd_2x2(m):
    """Closed-form singular value decomposition of a real 2x2 matrix.

    Uses the rotation-angle parameterization: with E=(a+d)/2, F=(a-d)/2,
    G=(c+b)/2, H=(c-b)/2 the factors follow from atan2 of those sums, so
    no iteration is needed and the reconstruction is exact to ~1e-15 for
    entries of order one.
    """
    m = np.asarray(m, dtype=np.float64)
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]

    e = (a + d) / 2.0
    f = (a - d) / 2.0
    g = (c + b) / 2.0
    h = (c - b) / 2.0

    q = math.hypot(e, h)
    r = math.hypot(f, g)
    s0 = q + r
    s1 = q - r  # negative iff det(m) < 0

    a_sum = math.atan2(g, f)  # phi + theta
    a_diff = math.atan2(h, e)  # phi - theta
    phi = (a_sum + a_diff) / 2.0
    theta = (a_sum - a_diff) / 2.0

    u = rotation2(phi)
    v = rotation2(theta)
    if s1 < 0.0:
        s1 = -s1
        v[:, 1] = -v[:, 1]
    return Svd2(u, np.array([s0, s1]), v.T)


def principal_angles(a, b):
    """Canonical angles between the planes spanned by two bases.

    Returns the two angles in radians, sorted ascending, each in
    [0, pi/2]. Singular values of ``a.T @ b`` are clamped to [-1, 1]
    before arccos, and values within 1e-12 of 1 map to an exact zero
    angle so that equal spans compare as exactly zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_same_dims(a, b)
    s = svd_2x2(a.T @ b).s
    s = np.clip(s, -1.0, 1.0)
    tau = np.arccos(s)
    tau[s > 1.0 - _COS_SNAP] = 0.0
    # s is descending, so tau comes out ascending already.
    return tau


def geodesic_distance(a, b):
    """Geodesic distance between the view planes of two bases.

    sqrt(tau0^2 + tau1^2) over the principal angles: zero exactly when
    the spans coincide, at most pi/sqrt(2) for fully orthogonal planes,
    symmetric, and invariant to in-plane rotation of either argument.
    """
    tau = principal_angles(a, b)
    return float(math.hypot(tau[0], tau[1]))


def _sym_eig_2x2(g):
    """Eigendecomposition of a symmetric 2x2 matrix.

    Returns (eigenvalues descending, rotation matrix of eigenvectors).
    """
    alpha = g[0, 0]
    beta = g[1, 1]
    gamma = (g[0, 1] + g[1, 0]) / 2.0
    mid = (alpha + beta) / 2.0
    rad = math.hypot((alpha - beta) / 2.0, gamma)
    lam = np.array([mid + rad, mid - rad])
    psi = 0.5 * math.atan2(2.0 * gamma, alpha - beta)
    return lam, rotation2(psi)


def nearest_orthonormal(m):
    """Closest column-orthonormal matrix to ``m`` in Frobenius norm.

    The polar factor of m: m @ (m.T m)^(-1/2), computed from the analytic
    eigendecomposition of the 2x2 Gram matrix. Spans the same plane as
    ``m``; raises DegenerateBasis for rank < 2.
    """
    m = as_float_matrix(m, "matrix", n_cols=2)
    lam, v = _sym_eig_2x2(m.T @ m)
    if lam[1] < EPS_DEGENERATE**2 * max(1.0, lam[0]):
        raise DegenerateBasis("matrix has rank < 2; no orthonormal projection")
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(lam)) @ v.T
    return m @ inv_sqrt


def procrustes_align(source, target):
    """Best orthogonal map of ``source`` points onto ``target`` points.

    Both N-by-2 sets are centered; the returned rotation (reflections
    permitted) minimizes ||target_c - source_c @ R||_F, and ``aligned``
    is the transformed source translated onto the target centroid.
    """
    src = as_float_matrix(source, "source", n_cols=2)
    tgt = as_float_matrix(target, "target", n_cols=2)
    if src.shape[0] != tgt.shape[0]:
        raise ValueError("point sets must have the same number of rows")
    if src.shape[0] < 2:
        raise ValueError("need at least 2 points to align")

    src_c = src - src.mean(axis=0)
    tgt_c = tgt - tgt.mean(axis=0)
    if float(np.sum(src_c**2)) < EPS_DEGENERATE:
        raise DegeneratePointSet("source has zero total variance")

    u, _, vt = svd_2x2(src_c.T @ tgt_c)
    rot = u @ vt
    det = float(np.sign(np.linalg.det(rot)))
    aligned = src_c @ rot + tgt.mean(axis=0)
    return ProcrustesResult(rot, det, aligned)


def _wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return x - 2.0 * math.pi * math.floor((x + math.pi) / (2.0 * math.pi))


def geodesic_interpolate(a, b, frac):
    """Constant-speed frame path from basis ``a`` to basis ``b``.

    Unlike the subspace distance, this interpolates *frames*: the result
    equals ``a`` at frac=0 and ``b`` at frac=1 (no in-plane jump), moving
    each principal direction along a circular arc while the in-plane
    alignment turns linearly. Used for smooth mode transitions, not for
    keyframe paths.
    """
    a = check_basis(a, "a")
    b = check_basis(b, "b")
    check_same_dims(a, b)
    frac = float(frac)

    u, s, vt = svd_2x2(a.T @ b)
    cosines = np.clip(s, -1.0, 1.0)
    vrot = vt.T
    if np.linalg.det(vrot) < 0.0:
        # Absorb the reflection into the second principal pair so both
        # in-plane factors are rotations and can be blended continuously.
        vrot = vrot @ np.diag([1.0, -1.0])
        cosines = cosines * np.array([1.0, -1.0])

    a2 = a @ u
    b2 = b @ vrot
    taus = np.empty(2)
    dirs = [None, None]
    for i in range(2):
        ci = cosines[i]
        taus[i] = math.acos(ci) if ci > -1.0 else math.pi
        if ci > 1.0 - _COS_SNAP:
            taus[i] = 0.0
            continue
        w = b2[:, i] - ci * a2[:, i]
        wn = np.linalg.norm(w)
        if wn >= 1e-9:
            dirs[i] = w / wn
    for i in range(2):
        # Antipodal column: the rotation plane is underdetermined, so pick
        # any direction orthogonal to everything already in play (needs
        # p >= 3; in p = 2 a reflection cannot be reached continuously and
        # the column is held instead).
        if taus[i] > 0.0 and dirs[i] is None:
            others = [a2[:, 0], a2[:, 1]] + [d for d in dirs if d is not None]
            for k in range(a.shape[0]):
                cand = np.zeros(a.shape[0])
                cand[k] = 1.0
                for o in others:
                    cand -= (o @ cand) * o
                n = np.linalg.norm(cand)
                if n > 1e-6:
                    dirs[i] = cand / n
                    break
            if dirs[i] is None:
                taus[i] = 0.0
    cols = np.empty_like(a)
    for i in range(2):
        if taus[i] == 0.0 or dirs[i] is None:
            cols[:, i] = a2[:, i]
        else:
            cols[:, i] = (
                math.cos(frac * taus[i]) * a2[:, i]
                + math.sin(frac * taus[i]) * dirs[i]
            )

    # In-plane factor must cancel u at frac=0 and vrot at frac=1.
    phi = math.atan2(u[1, 0], u[0, 0])
    psi = math.atan2(vrot[1, 0], vrot[0, 0])
    angle = -phi + frac * _wrap_angle(phi - psi)
    return gram_schmidt(cols @ rotation2(angle))


def random_basis(p, rng):
    """Uniformly random view plane in p dimensions (Haar on subspaces)."""
    if p < 2:
        raise ValueError("need p >= 2")
    return gram_schmidt(rng.standard_normal((p, 2)))
