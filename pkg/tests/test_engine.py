import math

import numpy as np
import pytest

from dtour.dataio import Dataset, load_columnar, standardize
from dtour.engine import TourEngine, project
from dtour.engine_select import point_in_polygon
from dtour.errors import BadPolygon, DimensionMismatch, EmptyDataset, MissingColumn
from dtour.geometry import geodesic_distance, random_basis
from dtour.path import Keyframe, KeyframeSequence, compile_path
from dtour.strategies import PrincipalComponents, grand_tour_extend, little_tour

from conftest import make_dataset


# ----------------------------------------------------------------------
# project

def test_project_identity_p2(rng):
    ds = make_dataset(rng, n=100, p=2)
    proj = project(ds, np.eye(2))
    assert np.array_equal(proj.xy[:, 0], ds.columns[0])
    assert np.array_equal(proj.xy[:, 1], ds.columns[1])


def test_project_column_selector(rng):
    ds = make_dataset(rng, n=64, p=4)
    e = np.eye(4)
    proj = project(ds, np.column_stack([e[:, 0], e[:, 2]]))
    assert np.array_equal(proj.xy[:, 0], ds.columns[0])
    assert np.array_equal(proj.xy[:, 1], ds.columns[2])


def test_project_matches_naive_oracle(rng):
    ds = make_dataset(rng, n=10000, p=16)
    basis = random_basis(16, rng)
    proj = project(ds, basis)
    # Naive double-precision oracle: per-row dot products.
    x = ds.matrix(np.float64)
    oracle = np.empty((10000, 2))
    for i in range(10000):
        oracle[i, 0] = float(np.dot(x[i], basis[:, 0]))
        oracle[i, 1] = float(np.dot(x[i], basis[:, 1]))
    assert np.abs(proj.xy - oracle).max() < 1e-4


def test_project_chunk_independence(rng):
    ds = make_dataset(rng, n=4099, p=5)
    basis = random_basis(5, rng)
    ref = project(ds, basis, chunk_rows=4099).xy
    for chunk in (1, 17, 4096, 4099):
        assert np.array_equal(ref, project(ds, basis, chunk_rows=chunk).xy)
    assert np.array_equal(ref, project(ds, basis, workers=3).xy)


def test_project_bounds(rng):
    ds = make_dataset(rng, n=50, p=3)
    proj = project(ds, random_basis(3, rng))
    x0, y0, x1, y1 = proj.bounds
    assert x0 == proj.xy[:, 0].min() and x1 == proj.xy[:, 0].max()
    assert y0 == proj.xy[:, 1].min() and y1 == proj.xy[:, 1].max()


def test_project_dim_mismatch(rng):
    ds = make_dataset(rng, n=10, p=3)
    with pytest.raises(DimensionMismatch):
        project(ds, random_basis(4, rng))


# ----------------------------------------------------------------------
# engine fixtures

@pytest.fixture
def little_engine(rng):
    scales = np.sqrt([9.0, 4.0, 1.0, 0.25])
    cols = [(rng.standard_normal(5000) * s).astype(np.float32) for s in scales]
    ds = Dataset(cols, ["a", "b", "c", "d"])
    ds_std, _ = standardize(ds, "zscore")
    pca = PrincipalComponents(n_components=4).fit(ds_std.matrix())
    path = compile_path(little_tour(pca, 4))
    return TourEngine(ds_std, path), pca


@pytest.fixture
def grand_engine(rng):
    ds = make_dataset(rng, n=800, p=6, with_labels=True)
    path = compile_path(grand_tour_extend(random_basis(6, rng), 5, seed=4))
    return TourEngine(ds, path)


# ----------------------------------------------------------------------
# scrub / tick

def test_scrub_matches_keyframe_projection(little_engine):
    engine, pca = little_engine
    positions = engine.path.keyframe_positions()
    proj = engine.scrub(positions[1])
    ref = project(engine.dataset, engine.path.sequence[1].basis)
    assert np.abs(proj.xy - ref.xy).max() < 1e-6


def test_scrub_pure(grand_engine):
    a = grand_engine.scrub(0.37)
    b = grand_engine.scrub(0.37)
    assert np.array_equal(a.xy, b.xy)


def test_scrub_wraps(grand_engine):
    a = grand_engine.scrub(1.0)
    b = grand_engine.scrub(0.0)
    assert np.array_equal(a.xy, b.xy)


def test_tick_zero_speed(grand_engine):
    grand_engine.scrub(0.2)
    grand_engine.play(0.0)
    grand_engine.tick(5.0)
    assert grand_engine.state.t == 0.2


def test_tick_full_loop(grand_engine):
    grand_engine.scrub(0.25)
    grand_engine.play(0.1)
    grand_engine.tick(10.0)
    assert abs(grand_engine.state.t - 0.25) < 1e-9


def test_tick_uniform_steps(rng):
    # Same harness as the tour-path uniformity check: uneven keyframe
    # spacing, arc-length playback, constant angular velocity.
    from conftest import rotation_family_basis

    frames = [Keyframe(rotation_family_basis(a)) for a in (0.0, 0.5, 0.6, 0.7)]
    path = compile_path(KeyframeSequence(frames, cyclic=True))
    ds = make_dataset(rng, n=50, p=4)
    engine = TourEngine(ds, path)
    engine.play(0.1)
    bases = []
    for _ in range(600):
        engine.tick(1.0 / 60.0)
        bases.append(engine.state.current_basis.copy())
    steps = [geodesic_distance(bases[i], bases[i + 1]) for i in range(len(bases) - 1)]
    cv = np.std(steps) / np.mean(steps)
    assert cv < 0.10


def test_animated_scrub_converges(grand_engine):
    engine = grand_engine
    engine.scrub(0.0)
    engine.scrub(0.3, animate=True)
    for _ in range(1000):
        engine.tick(1 / 60)
        if engine._scrub_target is None:
            break
    assert abs(engine.state.t - 0.3) < 1e-12
    assert geodesic_distance(engine.state.current_basis, engine.path.basis_at(0.3)) < 1e-9


# ----------------------------------------------------------------------
# modes

def test_manual_freezes_then_returns(grand_engine):
    engine = grand_engine
    engine.scrub(0.4)
    frozen = engine.state.current_basis.copy()
    engine.set_mode("manual")
    assert engine.state.mode == "manual"
    assert np.array_equal(engine.state.current_basis, frozen)
    engine.drag(0, [0.5, 0.1])
    moved = engine.state.current_basis.copy()
    assert geodesic_distance(moved, frozen) > 1e-3

    engine.set_mode("guided")
    assert engine.state.mode == "manual"  # transition still running
    prev = engine.state.current_basis.copy()
    largest = 0.0
    for _ in range(120):
        engine.tick(1 / 60)
        largest = max(largest, geodesic_distance(prev, engine.state.current_basis))
        prev = engine.state.current_basis.copy()
        if engine.state.mode == "guided":
            break
    assert engine.state.mode == "guided"
    assert geodesic_distance(engine.state.current_basis, engine.path.basis_at(0.4)) < 1e-9
    # Bounded geodesic speed: no frame jumps during the blend.
    total = geodesic_distance(moved, engine.path.basis_at(0.4))
    assert largest <= max(4.0 * total / 30.0, 1e-6)


def test_mode_noop_transition(grand_engine):
    engine = grand_engine
    engine.scrub(0.1)
    engine.set_mode("guided")
    assert engine.state.mode == "guided"


def test_grand_mode_continuity(grand_engine):
    engine = grand_engine
    engine.scrub(0.6)
    before = engine.state.current_basis.copy()
    engine.set_mode("grand")
    assert engine.state.mode == "grand"
    assert geodesic_distance(before, engine.state.current_basis) < 1e-12
    engine.play(0.2)
    engine.tick(0.05)
    assert geodesic_distance(before, engine.state.current_basis) > 0
    engine.set_mode("guided")
    for _ in range(120):
        engine.tick(1 / 60)
        if engine.state.mode == "guided":
            break
    assert geodesic_distance(engine.state.current_basis, engine.path.basis_at(0.6)) < 1e-9


def test_bad_mode(grand_engine):
    with pytest.raises(ValueError):
        grand_engine.set_mode("warp")


# ----------------------------------------------------------------------
# selection

def test_lasso_all_and_bad_polygon(grand_engine):
    engine = grand_engine
    proj = engine.projection()
    x0, y0, x1, y1 = proj.bounds
    box = [[x0 - 1, y0 - 1], [x1 + 1, y0 - 1], [x1 + 1, y1 + 1], [x0 - 1, y1 + 1]]
    sel = engine.lasso_select(box)
    assert sel.all()
    with pytest.raises(BadPolygon):
        engine.lasso_select([[0, 0], [1, 1]])


def test_lasso_matches_bruteforce_grid():
    xs, ys = np.meshgrid(np.linspace(-1, 1, 21), np.linspace(-1, 1, 21))
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float32)
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])

    def oracle(px, py):
        crossings = 0
        m = len(square)
        for i in range(m):
            x1, y1 = square[i]
            x2, y2 = square[(i + 1) % m]
            if (y1 > py) != (y2 > py):
                xint = (x2 - x1) * (py - y1) / (y2 - y1) + x1
                if px < xint:
                    crossings += 1
        return crossings % 2 == 1

    mask = point_in_polygon(pts, square)
    ref = np.array([oracle(px, py) for px, py in pts.astype(np.float64)])
    assert np.array_equal(mask, ref)


def test_lasso_combine_modes(grand_engine):
    engine = grand_engine
    n = engine.dataset.n_rows
    proj = engine.projection()
    x0, y0, x1, y1 = proj.bounds
    all_box = [[x0 - 1, y0 - 1], [x1 + 1, y0 - 1], [x1 + 1, y1 + 1], [x0 - 1, y1 + 1]]
    engine.lasso_select(all_box, combine="replace")
    assert engine.state.selection.sum() == n
    engine.lasso_select(all_box, combine="subtract")
    assert engine.state.selection.sum() == 0
    engine.lasso_select(all_box, combine="add")
    assert engine.state.selection.sum() == n


def test_label_select(grand_engine):
    engine = grand_engine
    lab = engine.dataset.label("cls")
    sel = engine.label_select("cls", ["a"])
    assert sel.sum() == int((lab.codes == 0).sum())
    sel = engine.label_select("cls", ["a", "b", "c"])
    assert sel.all()
    with pytest.raises(MissingColumn):
        engine.label_select("nope", ["a"])
    with pytest.raises(ValueError):
        engine.label_select("cls", ["zzz"])


def test_selection_stable_across_navigation(grand_engine):
    engine = grand_engine
    engine.label_select("cls", ["b"])
    snapshot = engine.state.selection.copy()
    engine.scrub(0.7)
    engine.play(0.3)
    engine.tick(0.5)
    engine.set_mode("manual")
    engine.drag(1, [0.2, -0.1])
    assert np.array_equal(engine.state.selection, snapshot)


# ----------------------------------------------------------------------
# encodings

def test_set_encoding_variants(grand_engine):
    engine = grand_engine
    enc = engine.set_encoding({"kind": "categorical", "column": "cls"})
    assert enc["categories"] == ["a", "b", "c"]
    enc = engine.set_encoding({"kind": "continuous", "column": "score"})
    assert enc["min"] <= enc["max"]
    enc = engine.set_encoding({"kind": "twod", "t": 0.25})
    assert len(enc["basis"]) == 2 * engine.dataset.n_dims
    ref = engine.path.basis_at(0.25)
    assert np.abs(np.array(enc["basis"]) - ref.ravel(order="F")).max() == 0.0
    with pytest.raises(MissingColumn):
        engine.set_encoding({"kind": "categorical", "column": "score"})
    assert engine.set_encoding(None) is None


# ----------------------------------------------------------------------
# previews and snapshots

def test_previews_full_data_when_small(grand_engine):
    engine = grand_engine
    previews = engine.keyframe_previews(thumb_points=10000, seed=1)
    assert len(previews) == len(engine.path.sequence)
    assert previews[0].n_rows == engine.dataset.n_rows


def test_previews_deterministic_and_bounded(grand_engine):
    engine = grand_engine
    a = engine.keyframe_previews(thumb_points=100, seed=7)
    b = engine.keyframe_previews(thumb_points=100, seed=7)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.xy, pb.xy)
    for i, pv in enumerate(a):
        full = project(engine.dataset, engine.path.sequence[i].basis)
        fx0, fy0, fx1, fy1 = full.bounds
        px0, py0, px1, py1 = pv.bounds
        assert px0 >= fx0 and py0 >= fy0 and px1 <= fx1 and py1 <= fy1


def test_snapshot_matches_pca_scores(little_engine, tmp_path):
    engine, pca = little_engine
    engine.scrub(0.0)
    out = tmp_path / "snap.csv"
    engine.snapshot(out, fmt="csv")
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "x,y,selected"
    got = np.array([[float(v) for v in r.split(",")[:2]] for r in rows[1:]])
    scores = pca.transform(engine.dataset.matrix())[:, :2]
    assert np.abs(got - scores).max() < 1e-4


def test_snapshot_dtc1_round_trip(grand_engine, tmp_path):
    engine = grand_engine
    engine.scrub(0.33)
    engine.label_select("cls", ["a"])
    out = tmp_path / "snap.dtc1"
    engine.snapshot(out, fmt="dtc1")
    ds = load_columnar(out)
    proj = engine.projection()
    assert np.array_equal(ds.columns[0], proj.xy[:, 0])
    assert np.array_equal(ds.columns[1], proj.xy[:, 1])
    sel = ds.labels[0]
    assert sel.name == "selected"
    assert np.array_equal(sel.codes.astype(bool), engine.state.selection)


def test_snapshot_empty_dataset(rng):
    ds = Dataset([np.zeros(0, np.float32), np.zeros(0, np.float32)], ["a", "b"])
    frames = [Keyframe(np.eye(2)), Keyframe(np.array([[0.0, 1.0], [1.0, 0.0]]))]
    path = compile_path(KeyframeSequence(frames, cyclic=True))
    engine = TourEngine(ds, path)
    with pytest.raises(EmptyDataset):
        engine.snapshot("nowhere.csv")
