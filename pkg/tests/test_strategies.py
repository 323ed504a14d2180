import math
import warnings

import numpy as np
import pytest

from dtour.errors import (
    AxisNotOrthogonal,
    DegeneratePointSet,
    DisconnectedGraphWarning,
    LengthMismatch,
    RankDeficientWarning,
    SingleKeyframeWarning,
    TooFewKeyframes,
    TooManyPoints,
)
from dtour.geometry import geodesic_distance, principal_angles, random_basis, rotation2
from dtour.path import compile_path
from dtour.strategies import (
    LaplacianEigenmaps,
    PrincipalComponents,
    grand_tour_extend,
    le_tour,
    little_tour,
    manual_drag,
    residual_axis,
    rotate_about_residual,
    sequential_tour,
)
from dtour._validation import basis_drift


# ----------------------------------------------------------------------
# principal components

def test_pca_dominant_axis(rng):
    n = 2000
    x = np.zeros((n, 3))
    x[:, 0] = rng.standard_normal(n) * 5.0
    x[:, 1] = rng.standard_normal(n) * 1e-4
    pca = PrincipalComponents(n_components=2).fit(x)
    angle = math.acos(min(abs(pca.components_[0, 0]), 1.0))
    assert angle < 1e-3


def test_pca_isotropic_variances(rng):
    x = rng.standard_normal((50000, 4))
    pca = PrincipalComponents(n_components=4).fit(x)
    ev = pca.explained_variance_
    assert ev.max() / ev.min() < 1.15


def test_pca_anisotropic_matches_covariance_oracle(rng):
    scales = np.sqrt([9.0, 4.0, 1.0, 0.25])
    x = rng.standard_normal((50000, 4)) * scales
    pca = PrincipalComponents(n_components=4).fit(x)
    oracle = np.linalg.eigh(np.cov(x.T))[0][::-1]
    assert np.abs(pca.explained_variance_ - oracle).max() < 1e-9
    ratios = pca.explained_variance_ / pca.explained_variance_[2]
    assert np.abs(ratios - np.array([9.0, 4.0, 1.0, 0.25])).max() / 9.0 < 0.10


def test_pca_sign_convention(rng):
    x = rng.standard_normal((500, 4))
    a = PrincipalComponents(n_components=3).fit(x)
    b = PrincipalComponents(n_components=3).fit(x.copy())
    assert np.array_equal(a.components_, b.components_)
    for j in range(3):
        col = a.components_[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_pca_rank_deficient_warns(rng):
    base = rng.standard_normal((100, 1))
    x = np.hstack([base, 2 * base, -base, 0.5 * base])
    with pytest.warns(RankDeficientWarning):
        pca = PrincipalComponents(n_components=4).fit(x)
    assert pca.components_.shape[1] == 2


def test_pca_transform_centers(rng):
    x = rng.standard_normal((300, 5)) + 7.0
    pca = PrincipalComponents(n_components=3).fit(x)
    scores = pca.transform(x)
    assert np.abs(scores.mean(axis=0)).max() < 1e-10


# ----------------------------------------------------------------------
# little tour

def test_little_tour_structure(rng):
    x = rng.standard_normal((1000, 5)) * np.arange(5, 0, -1)
    pca = PrincipalComponents(n_components=4).fit(x)
    seq = little_tour(pca, 3)
    assert len(seq) == 3
    assert [k.label for k in seq] == ["PC1-PC2", "PC2-PC3", "PC3-PC1"]
    assert seq[0].loadings == ((0, 1.0), (1, 1.0))
    comps = pca.components_
    assert np.array_equal(seq[0].basis[:, 0], comps[:, 0])
    assert np.array_equal(seq[2].basis, np.column_stack([comps[:, 2], comps[:, 0]]))


def test_little_tour_shared_component_angle(rng):
    x = rng.standard_normal((1000, 6)) * np.arange(6, 0, -1)
    pca = PrincipalComponents(n_components=5).fit(x)
    seq = little_tour(pca, 5)
    for i in range(len(seq)):
        tau = principal_angles(seq[i].basis, seq[(i + 1) % len(seq)].basis)
        assert tau[0] == 0.0


def test_little_tour_two_components_collapses(rng):
    x = rng.standard_normal((500, 4)) * np.arange(4, 0, -1)
    pca = PrincipalComponents(n_components=3).fit(x)
    with pytest.warns(SingleKeyframeWarning):
        seq = little_tour(pca, 2)
    assert len(seq) == 2
    path = compile_path(seq)
    assert path.total_length == 0.0


# ----------------------------------------------------------------------
# laplacian eigenmaps

@pytest.fixture(scope="module")
def ring_model():
    # Near-uniform angles keep the neighbor graph a single connected ring.
    rng = np.random.default_rng(99)
    theta = np.linspace(0, 2 * math.pi, 512, endpoint=False)
    theta += rng.uniform(-0.3, 0.3, 512) * (2 * math.pi / 512)
    x = np.column_stack([np.cos(theta), np.sin(theta)])
    x += 0.005 * rng.standard_normal(x.shape)
    return LaplacianEigenmaps(n_components=6, knn_k=8).fit(x), x


def test_spectral_ring_loop(ring_model):
    model, _ = ring_model
    emb = model.embedding_[:, :2]
    radii = np.linalg.norm(emb - emb.mean(axis=0), axis=1)
    assert radii.std() / radii.mean() < 0.20


def test_spectral_eigenvalue_bounds(ring_model):
    model, _ = ring_model
    ev = model.eigenvalues_
    assert np.all(np.diff(ev) >= -1e-12)
    assert np.all(ev >= -1e-9)
    assert np.all(ev <= 2.0 + 1e-9)
    assert np.abs(np.linalg.norm(model.eigenvectors_, axis=0) - 1.0).max() < 1e-9


def test_spectral_disconnected_patch(rng):
    blob1 = 0.1 * rng.standard_normal((80, 3))
    blob2 = 0.1 * rng.standard_normal((80, 3)) + 50.0
    with pytest.warns(DisconnectedGraphWarning):
        model = LaplacianEigenmaps(n_components=2, knn_k=3).fit(np.vstack([blob1, blob2]))
    # Patched graph has a simple zero eigenvalue: nontrivial ones positive.
    assert model.eigenvalues_[0] > 0


def test_spectral_too_many_points(rng):
    x = rng.standard_normal((101, 3))
    with pytest.raises(TooManyPoints):
        LaplacianEigenmaps(n_components=2, knn_k=3, max_points=100).fit(x)


def test_spectral_sparse_path_matches_dense(rng):
    # Same data through both solvers (threshold is 2048 rows).
    theta = np.sort(rng.uniform(0, 2 * math.pi, 300))
    x = np.column_stack([np.cos(theta), np.sin(theta)]) + 0.01 * rng.standard_normal((300, 2))
    dense = LaplacianEigenmaps(n_components=3, knn_k=6).fit(x)
    import dtour.strategies as st

    old = st._DENSE_EIG_LIMIT
    st._DENSE_EIG_LIMIT = 10
    try:
        sparse = LaplacianEigenmaps(n_components=3, knn_k=6).fit(x)
    finally:
        st._DENSE_EIG_LIMIT = old
    assert np.abs(dense.eigenvalues_ - sparse.eigenvalues_).max() < 1e-8
    for j in range(3):
        dot = abs(dense.eigenvectors_[:, j] @ sparse.eigenvectors_[:, j])
        assert dot > 1.0 - 1e-6


# ----------------------------------------------------------------------
# le tour

def test_le_tour_frames(ring_model):
    model, _ = ring_model
    seq = le_tour(model, 4)
    assert len(seq) == 4
    for k in seq:
        assert basis_drift(k.basis) < 1e-10
    # q=2 frame spans exactly the first two spectral coordinates
    e = np.zeros((6, 2))
    e[0, 0] = 1.0
    e[1, 1] = 1.0
    assert geodesic_distance(seq[0].basis, e) == 0.0


def test_le_tour_q2_not_degenerate(ring_model):
    model, _ = ring_model
    seq = le_tour(model, 2)
    assert basis_drift(seq[0].basis) < 1e-10


def test_le_tour_consecutive_closer_than_far(ring_model):
    model, _ = ring_model
    seq = le_tour(model, 4)
    consec = [geodesic_distance(seq[k].basis, seq[k + 1].basis) for k in range(3)]
    far = geodesic_distance(seq[0].basis, seq[3].basis)
    assert max(consec) < far + 1e-12


def test_le_tour_needs_enough_eigenvectors(ring_model):
    model, _ = ring_model
    with pytest.raises(ValueError):
        le_tour(model, 6)  # needs 7 eigenvectors, model has 6


# ----------------------------------------------------------------------
# grand tour

def test_grand_tour_deterministic(rng):
    start = random_basis(4, np.random.default_rng(1))
    a = grand_tour_extend(start, 10, seed=42)
    b = grand_tour_extend(start, 10, seed=42)
    for ka, kb in zip(a, b):
        assert np.array_equal(ka.basis, kb.basis)
    c = grand_tour_extend(start, 10, seed=43)
    assert not np.array_equal(a[1].basis, c[1].basis)


def test_grand_tour_invariants(rng):
    seq = grand_tour_extend(random_basis(5, rng), 6, seed=0)
    assert len(seq) == 7
    assert seq.cyclic
    for k in seq:
        assert basis_drift(k.basis) < 1e-10
    compile_path(seq)


def test_grand_tour_uniformity_small(rng):
    # E ||F^T e_i||^2 == 2/p on the uniform Grassmannian.
    vals = [np.sum(random_basis(4, rng)[0] ** 2) for _ in range(4000)]
    assert abs(np.mean(vals) - 0.5) < 0.03


# ----------------------------------------------------------------------
# sequential tour

def test_sequential_identical_embeddings(rng):
    emb = rng.standard_normal((150, 2))
    seq, aligned = sequential_tour([emb, emb.copy()])
    assert np.array_equal(seq[0].basis, seq[1].basis)
    path = compile_path(seq)
    assert path.total_length == 0.0
    stacked = np.hstack(aligned)
    for t in (0.0, 0.2, 0.7):
        xy = stacked @ path.basis_at(t)
        assert np.abs(xy - aligned[0]).max() < 1e-9


def test_sequential_rotated_copy_aligns(rng):
    emb = rng.standard_normal((200, 2))
    rot = emb @ rotation2(math.pi / 2)
    seq, aligned = sequential_tour([emb, rot])
    assert np.abs(aligned[1] - aligned[0]).max() < 1e-6


def test_sequential_distinct_frames(rng):
    embs = [rng.standard_normal((100, 2)) for _ in range(3)]
    seq, aligned = sequential_tour(embs, labels=["a", "b", "c"])
    assert seq.dims == 6
    assert [k.label for k in seq] == ["a", "b", "c"]
    assert seq[1].basis[2, 0] == 1.0 and seq[1].basis[3, 1] == 1.0
    path = compile_path(seq)
    assert path.total_length > 0
    # Unit RMS after alignment
    for a in aligned:
        rms = math.sqrt(float(np.mean(np.sum(a**2, axis=1))))
        assert abs(rms - 1.0) < 1e-9


def test_sequential_alignment_never_hurts(rng):
    embs = [rng.standard_normal((120, 2)) for _ in range(4)]
    seq, aligned = sequential_tour(embs)
    for i in range(1, 4):
        prev = aligned[i - 1]
        raw = embs[i] - embs[i].mean(axis=0)
        raw = raw / math.sqrt(float(np.mean(np.sum(raw**2, axis=1))))
        resid_aligned = np.linalg.norm(aligned[i] - prev)
        resid_raw = np.linalg.norm(raw - prev)
        assert resid_aligned <= resid_raw + 1e-9


def test_sequential_errors(rng):
    with pytest.raises(TooFewKeyframes):
        sequential_tour([rng.standard_normal((10, 2))])
    with pytest.raises(LengthMismatch):
        sequential_tour([rng.standard_normal((10, 2)), rng.standard_normal((11, 2))])
    with pytest.raises(DegeneratePointSet):
        sequential_tour([np.zeros((10, 2)), rng.standard_normal((10, 2))])
    with pytest.raises(LengthMismatch):
        sequential_tour([rng.standard_normal((10, 2))] * 2, labels=["only-one"])


# ----------------------------------------------------------------------
# manual drag

def test_drag_fixed_point(rng):
    b = random_basis(6, rng)
    out = manual_drag(b, 2, b[2])
    assert geodesic_distance(out, b) < 1e-9
    assert np.abs(out - b).max() < 1e-12


def test_drag_pins_row_exactly(rng):
    report = []
    for _ in range(1000):
        p = int(rng.integers(3, 12))
        b = random_basis(p, rng)
        k = int(rng.integers(p))
        d = rng.standard_normal(2)
        d = d / np.linalg.norm(d) * float(rng.uniform(0.0, 1.0))
        out = manual_drag(b, k, d)
        assert basis_drift(out) < 1e-10
        report.append(np.abs(out[k] - d).max())
    # Row-target error is reported; with the constrained transform it is
    # rounding noise.
    assert max(report) < 1e-12


def test_drag_undo_small_displacements(rng):
    worst = 0.0
    for _ in range(300):
        p = int(rng.integers(3, 12))
        b = random_basis(p, rng)
        k = int(rng.integers(p))
        delta = rng.standard_normal(2)
        delta = delta / np.linalg.norm(delta) * 0.1
        v = b[k] + delta
        if np.linalg.norm(v) > 1.0 - 1e-6:
            continue  # saturated drags destroy rest-block rank by necessity
        out = manual_drag(b, k, v)
        back = manual_drag(out, k, b[k])
        worst = max(worst, geodesic_distance(back, b))
    assert worst < 1e-6


def test_drag_continuity_constant(rng):
    # Small target motion moves the plane by at most ~10x the motion.
    for _ in range(100):
        b = random_basis(8, rng)
        k = int(rng.integers(8))
        eps = 1e-4
        delta = rng.standard_normal(2)
        delta = delta / np.linalg.norm(delta) * eps
        v = b[k] + delta
        if np.linalg.norm(v) > 1.0 - 1e-9:
            continue
        out = manual_drag(b, k, v)
        assert geodesic_distance(out, b) <= 10.0 * eps


def test_drag_p2(rng):
    b = np.eye(2)
    out = manual_drag(b, 0, [0.0, 1.0])
    assert np.abs(np.abs(out[0]) - np.array([0.0, 1.0])).max() < 1e-12
    assert np.abs(np.abs(out[1]) - np.array([1.0, 0.0])).max() < 1e-12
    noop = manual_drag(b, 0, [0.0, 0.0])
    assert np.array_equal(noop, b)


def test_drag_rejects_long_direction(rng):
    with pytest.raises(ValueError):
        manual_drag(random_basis(4, rng), 0, [1.0, 1.0])


# ----------------------------------------------------------------------
# residual axis and rotation

def test_residual_axis_p3():
    e = np.eye(3)
    axis = residual_axis(e[:, :2], np.diag([1.0, 1.0, 5.0]))
    assert np.abs(np.abs(axis) - e[:, 2]).max() < 1e-12


def test_residual_axis_p2_none():
    assert residual_axis(np.eye(2), np.eye(2)) is None


def test_residual_axis_in_plane_data(rng):
    b = np.eye(4)[:, :2]
    cov = np.diag([3.0, 2.0, 0.0, 0.0])
    assert residual_axis(b, cov) is None


def test_residual_axis_beats_monte_carlo(rng):
    p = 5
    b = random_basis(p, rng)
    a = rng.standard_normal((p, p))
    cov = a @ a.T
    axis = residual_axis(b, cov)
    assert np.abs(b.T @ axis).max() < 1e-9
    achieved = float(axis @ cov @ axis)
    proj = np.eye(p) - b @ b.T
    best = 0.0
    for _ in range(10000):
        v = proj @ rng.standard_normal(p)
        v /= np.linalg.norm(v)
        best = max(best, float(v @ cov @ v))
    assert best <= achieved + 1e-6


def test_rotate_about_residual(rng):
    e = np.eye(3)
    b = e[:, :2]
    out = rotate_about_residual(b, e[:, 2], math.pi / 2)
    target = np.column_stack([e[:, 0], e[:, 2]])
    assert geodesic_distance(out, target) < 1e-9
    assert np.abs(rotate_about_residual(b, e[:, 2], 0.0) - b).max() < 1e-12
    fwd = rotate_about_residual(b, e[:, 2], 0.4)
    axis2 = residual_axis(fwd, np.diag([1.0, 1.0, 1.0]))
    back = rotate_about_residual(fwd, axis2, -0.4)
    assert geodesic_distance(back, b) < 1e-9


def test_rotate_about_residual_requires_orthogonal_axis(rng):
    b = np.eye(4)[:, :2]
    with pytest.raises(AxisNotOrthogonal):
        rotate_about_residual(b, np.array([1.0, 0.0, 0.0, 0.0]), 0.3)
    with pytest.raises(AxisNotOrthogonal):
        rotate_about_residual(b, np.array([0.0, 0.0, 2.0, 0.0]), 0.3)


def test_every_strategy_compiles(rng):
    x = rng.standard_normal((400, 5)) * np.arange(5, 0, -1)
    pca = PrincipalComponents(n_components=4).fit(x)
    sequences = [little_tour(pca, 4), grand_tour_extend(random_basis(5, rng), 4, seed=2)]
    theta = np.sort(rng.uniform(0, 2 * math.pi, 300))
    ring = np.column_stack([np.cos(theta), np.sin(theta)]) + 0.01 * rng.standard_normal((300, 2))
    model = LaplacianEigenmaps(n_components=4, knn_k=6).fit(ring)
    sequences.append(le_tour(model, 3))
    seq, _ = sequential_tour([rng.standard_normal((60, 2)) for _ in range(3)])
    sequences.append(seq)
    for s in sequences:
        path = compile_path(s)
        for k in s:
            assert basis_drift(k.basis) < 1e-10
        for t in np.linspace(0, 1, 50):
            assert basis_drift(path.basis_at(t)) < 1e-9
