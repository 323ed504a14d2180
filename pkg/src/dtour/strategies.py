"""Tour strategies: turning data into keyframe sequences.

Two estimator front-ends (principal components, Laplacian eigenmaps)
produce the models the spectral tours are built from; the remaining
functions generate keyframe sequences directly or edit a basis in
response to manual interaction.
"""

import math
import warnings

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import EPS_DEGENERATE, as_float_matrix, check_basis
from .errors import (
    AxisNotOrthogonal,
    DegeneratePointSet,
    DisconnectedGraphWarning,
    LengthMismatch,
    RankDeficientWarning,
    SingleKeyframeWarning,
    TooFewKeyframes,
    TooManyPoints,
)
from .geometry import gram_schmidt, procrustes_align, random_basis, _sym_eig_2x2
from .path import Keyframe, KeyframeSequence

__all__ = [
    "PrincipalComponents",
    "LaplacianEigenmaps",
    "little_tour",
    "le_tour",
    "grand_tour_extend",
    "sequential_tour",
    "manual_drag",
    "residual_axis",
    "rotate_about_residual",
]

# Above this eigensolve size the sparse shift-invert solver takes over
# from the dense one.
_DENSE_EIG_LIMIT = 2048


def _fix_signs(columns):
    """Deterministic sign convention: largest-|entry| positive per column.

    Makes eigenvector-derived tours reproducible across runs/platforms.
    """
    out = np.array(columns, dtype=np.float64, copy=True)
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


class PrincipalComponents(BaseEstimator, TransformerMixin):
    """Principal component model with a reproducible sign convention.

    Parameters
    ----------
    n_components : int
        Number of directions to keep (>= 2).

    Attributes after fit
    --------------------
    mean_ : (p,) column means of the training data.
    components_ : (p, m) orthonormal principal directions as columns,
        descending explained variance.
    explained_variance_ : (m,) sample variances along each direction.
    """

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_float_matrix(X, "data")
        n, p = X.shape
        m = int(self.n_components)
        if m < 2:
            raise ValueError("n_components must be >= 2")
        if m > p:
            raise ValueError(f"n_components={m} exceeds {p} data dimensions")
        if n <= m:
            raise ValueError(f"need more than {m} rows, got {n}")

        self.mean_ = X.mean(axis=0)
        xc = X - self.mean_
        cov = (xc.T @ xc) / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        evals = evals[::-1]
        evecs = evecs[:, ::-1]

        floor = max(evals[0], 0.0) * 1e-10
        rank = int(np.sum(evals > floor))
        if rank < m:
            warnings.warn(
                f"only {rank} informative directions for {m} requested; reducing",
                RankDeficientWarning,
                stacklevel=2,
            )
            m = max(rank, 2)

        self.components_ = _fix_signs(evecs[:, :m])
        self.explained_variance_ = np.maximum(evals[:m], 0.0)
        return self

    def transform(self, X):
        X = as_float_matrix(X, "data")
        return (X - self.mean_) @ self.components_


class LaplacianEigenmaps(BaseEstimator):
    """Spectral embedding from a symmetrized exact-kNN graph.

    Builds the unit-weight union of directed k-nearest-neighbor edges,
    forms the normalized graph Laplacian, and keeps the eigenvectors of
    smallest nonzero eigenvalue. Disconnected graphs are patched by
    linking nearest inter-component point pairs (with a warning) so the
    zero eigenvalue stays simple.

    There is no out-of-sample transform; use ``fit_transform``. Datasets
    beyond ``max_points`` rows are rejected (exact neighbor search at
    desk scale only) — subsample first.
    """

    def __init__(self, n_components=2, knn_k=10, max_points=50000):
        self.n_components = n_components
        self.knn_k = knn_k
        self.max_points = max_points

    def _knn_graph(self, X):
        n = X.shape[0]
        k = int(self.knn_k)
        sq = np.einsum("ij,ij->i", X, X)
        cols = np.empty((n, k), dtype=np.int64)
        chunk = max(1, (4 << 20) // max(n, 1))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
            d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
            cols[start:stop] = np.argpartition(d2, k - 1, axis=1)[:, :k]
        rows = np.repeat(np.arange(n), k)
        a = csr_matrix(
            (np.ones(n * k), (rows, cols.ravel())), shape=(n, n)
        )
        a = a.maximum(a.T)
        a.data[:] = 1.0
        return a

    def _ensure_connected(self, a, X):
        extra_i, extra_j = [], []
        patches = 0
        while True:
            if extra_i:
                aa = a + csr_matrix(
                    (np.ones(len(extra_i)), (extra_i, extra_j)), shape=a.shape
                )
            else:
                aa = a
            n_comp, labels = connected_components(aa, directed=False)
            if n_comp == 1:
                if patches:
                    warnings.warn(
                        f"neighbor graph was disconnected; added {patches} link(s)",
                        DisconnectedGraphWarning,
                        stacklevel=3,
                    )
                    aa = aa.copy()
                    aa.data[:] = 1.0
                return aa
            sizes = np.bincount(labels)
            c = int(np.argmin(sizes))
            inside = np.flatnonzero(labels == c)
            outside = np.flatnonzero(labels != c)
            d2 = (
                np.einsum("ij,ij->i", X[inside], X[inside])[:, None]
                + np.einsum("ij,ij->i", X[outside], X[outside])[None, :]
                - 2.0 * (X[inside] @ X[outside].T)
            )
            i, j = np.unravel_index(int(np.argmin(d2)), d2.shape)
            extra_i += [inside[i], outside[j]]
            extra_j += [outside[j], inside[i]]
            patches += 1

    def fit(self, X, y=None):
        X = as_float_matrix(X, "data")
        n = X.shape[0]
        if n > int(self.max_points):
            raise TooManyPoints(
                f"{n} rows exceed the exact-solver limit {self.max_points}; subsample first"
            )
        m = int(self.n_components)
        if m < 2:
            raise ValueError("n_components must be >= 2")
        if int(self.knn_k) < 2:
            raise ValueError("knn_k must be >= 2")
        if n < m + 2:
            raise ValueError(f"need at least {m + 2} rows for {m} eigenvectors")

        a = self._ensure_connected(self._knn_graph(X), X)
        deg = np.asarray(a.sum(axis=1)).ravel()
        dm12 = 1.0 / np.sqrt(deg)
        sym = a.multiply(dm12[:, None]).multiply(dm12[None, :]).tocsr()

        if n <= _DENSE_EIG_LIMIT:
            lap = np.eye(n) - sym.toarray()
            evals, evecs = np.linalg.eigh(lap)
            evals = evals[: m + 1]
            evecs = evecs[:, : m + 1]
        else:
            from scipy.sparse import identity

            lap = (identity(n, format="csr") - sym).tocsc()
            evals, evecs = eigsh(lap, k=m + 1, sigma=-1e-2, which="LM", mode="normal")
            order = np.argsort(evals)
            evals = evals[order]
            evecs = evecs[:, order]

        # Drop the trivial eigenvector (eigenvalue ~ 0 after patching).
        self.eigenvalues_ = np.asarray(evals[1 : m + 1], dtype=np.float64)
        self.eigenvectors_ = _fix_signs(evecs[:, 1 : m + 1])
        self.embedding_ = self.eigenvectors_
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


def little_tour(pca: PrincipalComponents, n_components: int) -> KeyframeSequence:
    """Cyclic tour through successive principal-component pairs.

    Keyframes are (PC1, PC2), (PC2, PC3), ..., closed by the wrap pair
    (PCk, PC1) so consecutive keyframes always share one component. With
    n_components == 2 both keyframes span the same plane and the tour
    degenerates to a single view (warned).
    """
    comps = pca.components_
    m = comps.shape[1]
    n = int(n_components)
    if n < 2 or n > m:
        raise ValueError(f"n_components must be in [2, {m}], got {n}")
    if n == 2:
        warnings.warn(
            "a 2-component tour spans a single plane; nothing to traverse",
            SingleKeyframeWarning,
            stacklevel=2,
        )
    frames = []
    for i in range(n):
        j = (i + 1) % n
        basis = np.column_stack([comps[:, i], comps[:, j]])
        frames.append(
            Keyframe(
                basis,
                label=f"PC{i + 1}-PC{j + 1}",
                loadings=((i, 1.0), (j, 1.0)),
            )
        )
    return KeyframeSequence(frames, cyclic=True)


def le_tour(spectral: LaplacianEigenmaps, n_frames: int) -> KeyframeSequence:
    """Cumulative circular tour over spectral coordinates.

    Keyframe k mixes the first q = k + 2 eigenvector axes at uniform
    angular offsets theta_i = 2*pi*i/q around the circle (x from the
    cosines, y from the sines), then orthonormalizes. For q == 2 the
    uniform offsets make the two columns proportional for *any* phase
    (their 2x2 determinant is sin(theta_2 - theta_1) = sin(pi) = 0), so
    that frame uses quarter-phase offsets (0, pi/2) instead — i.e. the
    plain first-two-eigenvector view.

    The returned bases live over the spectral coordinates: serve them
    with the N-by-m embedding, not the raw data.
    """
    m = spectral.eigenvectors_.shape[1]
    n = int(n_frames)
    if n < 2:
        raise ValueError("n_frames must be >= 2")
    if m < n + 1:
        raise ValueError(f"need at least {n + 1} eigenvectors, model has {m}")
    frames = []
    for k in range(n):
        q = k + 2
        if q == 2:
            thetas = np.array([0.0, math.pi / 2.0])
        else:
            thetas = 2.0 * math.pi * np.arange(q) / q
        mat = np.zeros((m, 2))
        mat[:q, 0] = np.cos(thetas)
        mat[:q, 1] = np.sin(thetas)
        basis = gram_schmidt(mat)
        norms = np.linalg.norm(basis[:q], axis=1)
        loadings = tuple((i, float(min(norms[i], 1.0))) for i in range(q))
        frames.append(Keyframe(basis, label=f"LE 1..{q}", loadings=loadings))
    return KeyframeSequence(frames, cyclic=True)


def grand_tour_extend(current, n_targets: int, seed: int) -> KeyframeSequence:
    """Append uniformly random view planes to a tour (random walk).

    ``current`` may be an existing sequence or a single starting basis.
    Deterministic for a given seed.
    """
    if int(n_targets) < 1:
        raise ValueError("n_targets must be >= 1")
    if isinstance(current, KeyframeSequence):
        frames = list(current.keyframes)
    elif isinstance(current, Keyframe):
        frames = [current]
    else:
        frames = [Keyframe(check_basis(current, "current"), label="start")]
    p = frames[0].dims
    rng = np.random.default_rng(int(seed))
    for i in range(int(n_targets)):
        frames.append(Keyframe(random_basis(p, rng), label=f"random {i + 1}"))
    return KeyframeSequence(frames, cyclic=True)


def _unit_rms(points):
    rms = math.sqrt(float(np.mean(np.einsum("ij,ij->i", points, points))))
    if rms < EPS_DEGENERATE:
        raise DegeneratePointSet("embedding has zero total variance")
    return points / rms


def sequential_tour(embeddings, labels=None, dedup_tol=1e-9):
    """Stack a sequence of aligned 2D embeddings into one tour.

    Each embedding after the first is Procrustes-aligned to its already
    aligned predecessor and rescaled to unit RMS radius; the K aligned
    positions of every point become one 2K-dimensional row, and keyframe
    i is the canonical coordinate pair of frame i in that stacked space,
    so interpolating the tour blends between consecutive embeddings.

    Consecutive embeddings that coincide after alignment (within
    ``dedup_tol``) share one keyframe basis, making the segment between
    them exactly zero-length: a tour over converged, repeated frames
    holds every point fixed instead of pulsing through redundant
    coordinate pairs.

    Returns (sequence, aligned) where ``aligned`` is the list of
    processed N-by-2 embeddings in order.
    """
    embs = [as_float_matrix(e, f"embedding {i}", n_cols=2) for i, e in enumerate(embeddings)]
    k = len(embs)
    if k < 2:
        raise TooFewKeyframes(f"need at least 2 embeddings, got {k}")
    n = embs[0].shape[0]
    for i, e in enumerate(embs):
        if e.shape[0] != n:
            raise LengthMismatch(
                f"embedding {i} has {e.shape[0]} rows, expected {n} (one-to-one points)"
            )
    if labels is not None and len(labels) != k:
        raise LengthMismatch(f"{len(labels)} labels for {k} embeddings")

    aligned = [_unit_rms(embs[0] - embs[0].mean(axis=0))]
    for i in range(1, k):
        res = procrustes_align(embs[i], aligned[i - 1])
        aligned.append(_unit_rms(res.aligned))

    rep = [0] * k
    for i in range(1, k):
        same = float(np.abs(aligned[i] - aligned[i - 1]).max()) <= dedup_tol
        rep[i] = rep[i - 1] if same else i

    dims = 2 * k
    frames = []
    for i in range(k):
        basis = np.zeros((dims, 2))
        basis[2 * rep[i], 0] = 1.0
        basis[2 * rep[i] + 1, 1] = 1.0
        label = labels[i] if labels is not None else f"frame {i}"
        frames.append(
            Keyframe(basis, label=str(label), loadings=((2 * rep[i], 1.0), (2 * rep[i] + 1, 1.0)))
        )
    return KeyframeSequence(frames, cyclic=True), aligned


def _sqrtm_psd_2x2(g):
    lam, v = _sym_eig_2x2(g)
    lam = np.maximum(lam, 0.0)
    return v @ np.diag(np.sqrt(lam)) @ v.T


def _stiefel_factor(x):
    """Column-orthonormal Y closest to x's column frame, completing rank.

    For full-rank x this is the polar factor; a rank-1 x gets its
    missing direction filled with the first canonical vector that has an
    orthogonal component.
    """
    lam, v = _sym_eig_2x2(x.T @ x)
    if lam[1] > EPS_DEGENERATE * max(1.0, lam[0]):
        return x @ (v @ np.diag(1.0 / np.sqrt(lam)) @ v.T)
    if lam[0] < EPS_DEGENERATE:
        return None
    u0 = (x @ v[:, 0]) / math.sqrt(lam[0])
    u1 = None
    for kdim in range(x.shape[0]):
        cand = np.zeros(x.shape[0])
        cand[kdim] = 1.0
        cand -= (u0 @ cand) * u0
        nn = np.linalg.norm(cand)
        if nn > 1e-6:
            u1 = cand / nn
            break
    if u1 is None:
        return None
    return np.column_stack([u0, u1]) @ v.T


def manual_drag(basis, dim_index, direction):
    """Pin one dimension's handle to a new 2D direction.

    The returned basis has row ``dim_index`` exactly equal to
    ``direction`` (norm <= 1) while the remaining rows are adjusted by
    the minimum-change transform that restores orthonormality: the rest
    block keeps its column frame and only its 2x2 Gram factor is swapped
    for the one the pinned row dictates. The operation is exactly
    invertible — dragging back to the original row restores the original
    basis to rounding error.

    Degenerate requests (p == 2 with a zero direction, or a rest block
    that cannot supply the needed rank) are no-ops: the input basis is
    returned unchanged.
    """
    basis = check_basis(basis)
    p = basis.shape[0]
    dim_index = int(dim_index)
    if not 0 <= dim_index < p:
        raise ValueError(f"dim_index {dim_index} out of range for {p} dims")
    v = np.asarray(direction, dtype=np.float64).reshape(2)
    nv = float(np.linalg.norm(v))
    if nv > 1.0 + 1e-12:
        raise ValueError(f"direction norm {nv:.6f} exceeds 1")
    if nv > 1.0:
        v = v / nv
        nv = 1.0

    if p == 2:
        # Both rows of a 2x2 orthonormal matrix are unit: the drag target
        # is normalized and the other row is forced up to sign.
        if nv < 1e-9:
            return basis
        vu = v / nv
        w = np.array([-vu[1], vu[0]])
        other = basis[1 - dim_index]
        if w @ other < 0.0:
            w = -w
        out = np.empty((2, 2))
        out[dim_index] = vu
        out[1 - dim_index] = w
        return out

    rest = np.delete(basis, dim_index, axis=0)
    y = _stiefel_factor(rest)
    if y is None:
        return basis
    target_gram = np.eye(2) - np.outer(v, v)
    new_rest = y @ _sqrtm_psd_2x2(target_gram)
    out = np.empty_like(basis)
    out[dim_index] = v
    mask = np.arange(p) != dim_index
    out[mask] = new_rest
    return out


def residual_axis(basis, covariance):
    """Principal direction of the data outside the current view plane.

    Returns the unit top eigenvector of (I - F F^T) C (I - F F^T), or
    None when no residual direction exists (p == 2, or the data lies in
    the view plane).
    """
    basis = check_basis(basis)
    p = basis.shape[0]
    if p == 2:
        return None
    cov = as_float_matrix(covariance, "covariance")
    if cov.shape != (p, p):
        raise ValueError(f"covariance must be {p}x{p}, got {cov.shape}")
    cov = (cov + cov.T) / 2.0

    proj = np.eye(p) - basis @ basis.T
    resid = proj @ cov @ proj
    vals, vecs = np.linalg.eigh(resid)
    top = vals[-1]
    scale = max(float(np.trace(cov)), 1.0)
    if top < 1e-12 * scale:
        return None
    axis = vecs[:, -1]
    axis = axis - basis @ (basis.T @ axis)
    axis = axis / np.linalg.norm(axis)
    i = int(np.argmax(np.abs(axis)))
    if axis[i] < 0:
        axis = -axis
    return axis


def rotate_about_residual(basis, axis, angle, about=0):
    """Rotate the view plane toward a residual axis.

    Forms the p-by-3 frame [col0, col1, axis] and rotates by ``angle``
    about the in-frame direction ``about`` (0: about the x column, so
    the y column tilts into the residual axis; 1: the converse). The
    axis must be orthogonal to both basis columns within 1e-6.
    """
    basis = check_basis(basis)
    axis = np.asarray(axis, dtype=np.float64).reshape(basis.shape[0])
    na = np.linalg.norm(axis)
    if abs(na - 1.0) > 1e-6:
        raise AxisNotOrthogonal(f"axis must be unit length, norm is {na:.6f}")
    if float(np.abs(basis.T @ axis).max()) > 1e-6:
        raise AxisNotOrthogonal("axis is not orthogonal to the view plane")
    if about not in (0, 1):
        raise ValueError("about must be 0 or 1")

    axis = axis - basis @ (basis.T @ axis)
    axis = axis / np.linalg.norm(axis)
    c, s = math.cos(angle), math.sin(angle)
    frame = np.column_stack([basis[:, 0], basis[:, 1], axis])
    if about == 0:
        new0 = frame[:, 0]
        new1 = c * frame[:, 1] + s * frame[:, 2]
    else:
        new0 = c * frame[:, 0] + s * frame[:, 2]
        new1 = frame[:, 1]
    return gram_schmidt(np.column_stack([new0, new1]))
