"""Projection engine: dataset x tour path x interactive session state.

``project`` is the headless hot path: it recomputes all N 2D positions
for a basis, chunked over rows with float64 accumulation into float32
output. Results are bit-identical for any chunk size or worker count
because each row's accumulation order is fixed.

``TourEngine`` owns a SessionState and implements the interaction
surface the session server exposes: scrubbing, playback, mode changes
with smooth return transitions, manual basis edits, selections, preview
thumbnails and snapshot export.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_basis
from .dataio import Dataset, LabelColumn, save_columnar
from .engine_select import point_in_polygon
from .errors import BadPolygon, DimensionMismatch, EmptyDataset, MissingColumn
from .geometry import geodesic_distance, geodesic_interpolate
from .path import TourPath
from .strategies import grand_tour_extend, manual_drag, residual_axis, rotate_about_residual

__all__ = ["Projection", "SessionState", "TourEngine", "project"]

MODES = ("overview", "guided", "manual", "grand")

# Basis agreement required between state.t and state.current_basis while
# in a path-following mode.
_CONSISTENT_TOL = 1e-9


@dataclass(frozen=True)
class Projection:
    """N 2D positions under one basis, float32, with data bounds."""

    xy: np.ndarray
    basis_used: np.ndarray
    bounds: tuple

    @property
    def n_rows(self):
        return len(self.xy)


def project(dataset: Dataset, basis, chunk_rows: int = 32768, workers: int = 1) -> Projection:
    """All-rows matrix product of the dataset with a basis.

    Accumulates in float64 per output column in fixed column order, so
    the float32 result is bit-identical for every chunking/worker split.
    Chunks are sized to stay cache-resident; buffers are reused across
    chunks to keep the loop allocation-free.
    """
    basis = check_basis(basis)
    if basis.shape[0] != dataset.n_dims:
        raise DimensionMismatch(
            f"basis has {basis.shape[0]} dims, dataset has {dataset.n_dims}"
        )
    n = dataset.n_rows
    p = dataset.n_dims
    cols = dataset.columns
    w0 = [np.float64(basis[j, 0]) for j in range(p)]
    w1 = [np.float64(basis[j, 1]) for j in range(p)]
    xy = np.empty((n, 2), dtype=np.float32)
    chunk_rows = max(1, int(chunk_rows))

    def run_span(start, stop):
        tmp = np.empty(min(chunk_rows, stop - start))
        acc_x = np.empty_like(tmp)
        acc_y = np.empty_like(tmp)
        for cs in range(start, stop, chunk_rows):
            ce = min(cs + chunk_rows, stop)
            m = ce - cs
            t, ax, ay = tmp[:m], acc_x[:m], acc_y[:m]
            ax[:] = 0.0
            ay[:] = 0.0
            for j in range(p):
                c = cols[j][cs:ce]
                np.multiply(c, w0[j], out=t)
                np.add(ax, t, out=ax)
                np.multiply(c, w1[j], out=t)
                np.add(ay, t, out=ay)
            xy[cs:ce, 0] = ax
            xy[cs:ce, 1] = ay

    if workers > 1 and n > chunk_rows:
        # Worker spans are aligned to chunk boundaries so the per-row
        # accumulation order (and thus the output) never changes.
        n_chunks = -(-n // chunk_rows)
        per = -(-n_chunks // workers)
        spans = [
            (i * per * chunk_rows, min((i + 1) * per * chunk_rows, n))
            for i in range(workers)
            if i * per * chunk_rows < n
        ]
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(lambda se: run_span(*se), spans))
    else:
        run_span(0, n)

    if n:
        bounds = (
            float(xy[:, 0].min()),
            float(xy[:, 1].min()),
            float(xy[:, 0].max()),
            float(xy[:, 1].max()),
        )
    else:
        bounds = (0.0, 0.0, 0.0, 0.0)
    return Projection(xy=xy, basis_used=basis, bounds=bounds)


@dataclass
class SessionState:
    """Everything the UI mirrors about one exploration session."""

    t: float
    mode: str
    current_basis: np.ndarray
    selection: np.ndarray
    color_encoding: Optional[dict] = None
    playing: bool = False
    speed: float = 0.1  # arc-length fraction per second


@dataclass
class _Transition:
    source: np.ndarray
    target_mode: str
    progress: float = 0.0


class TourEngine:
    """Single-writer interactive core over an immutable dataset + path.

    One thread mutates the session (scrub/tick/selection); projections
    it hands out are immutable snapshots.
    """

    def __init__(self, dataset: Dataset, path: TourPath, blend_seconds: float = 0.5,
                 grand_seed: int = 0, workers: int = 1):
        if dataset.n_dims != path.dims:
            raise DimensionMismatch(
                f"dataset has {dataset.n_dims} dims, tour expects {path.dims}"
            )
        self.dataset = dataset
        self.path = path
        self.blend_seconds = float(blend_seconds)
        self.grand_seed = int(grand_seed)
        self.workers = int(workers)
        self.state = SessionState(
            t=0.0,
            mode="overview",
            current_basis=path.basis_at(0.0),
            selection=np.zeros(dataset.n_rows, dtype=bool),
        )
        self._transition: Optional[_Transition] = None
        self._scrub_target: Optional[float] = None
        self._grand_path: Optional[TourPath] = None
        self._grand_t = 0.0
        self._cov: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # projections

    def projection(self) -> Projection:
        return project(self.dataset, self.state.current_basis, workers=self.workers)

    def _covariance(self):
        if self._cov is None:
            x = self.dataset.matrix(np.float64)
            x = x - x.mean(axis=0)
            denom = max(self.dataset.n_rows - 1, 1)
            self._cov = (x.T @ x) / denom
        return self._cov

    # ------------------------------------------------------------------
    # guided traversal

    def scrub(self, t, animate=False) -> Projection:
        """Move along the tour; wraps on cyclic paths.

        In manual/grand mode a scrub starts the smooth return to the
        guided path. With ``animate`` the position glides to ``t`` at
        playback speed over subsequent ticks instead of jumping.
        """
        st = self.state
        t = t % 1.0 if self.path.cyclic else min(max(t, 0.0), 1.0)
        if animate:
            st.t = st.t % 1.0
            self._scrub_target = t
            if st.mode in ("manual", "grand"):
                self._begin_return("guided")
            return self.projection()
        st.t = t
        if st.mode in ("manual", "grand"):
            self._begin_return("guided")
        else:
            st.current_basis = self.path.basis_at(st.t)
        return self.projection()

    def play(self, speed=None):
        if speed is not None:
            self.state.speed = float(speed)
        self.state.playing = True

    def pause(self):
        self.state.playing = False

    def tick(self, dt) -> None:
        """Advance playback, pending transitions, and animated scrubs."""
        st = self.state
        dt = float(dt)
        if dt < 0:
            raise ValueError("dt must be >= 0")

        if self._transition is not None:
            tr = self._transition
            tr.progress += dt / max(self.blend_seconds, 1e-6)
            if tr.progress >= 1.0:
                st.mode = tr.target_mode
                st.current_basis = self.path.basis_at(st.t)
                self._transition = None
            else:
                st.current_basis = geodesic_interpolate(
                    tr.source, self.path.basis_at(st.t), tr.progress
                )
            return

        if st.mode == "grand":
            if st.playing and self._grand_path is not None:
                self._grand_t = (self._grand_t + st.speed * dt) % 1.0
                st.current_basis = self._grand_path.basis_at(self._grand_t)
            return

        if self._scrub_target is not None:
            span = self._scrub_target - st.t
            if self.path.cyclic:
                span = (span + 0.5) % 1.0 - 0.5  # shortest direction
            step = max(st.speed, 1e-3) * dt
            if abs(span) <= step:
                st.t = self._scrub_target
                self._scrub_target = None
            else:
                st.t = (st.t + math.copysign(step, span)) % 1.0
            st.current_basis = self.path.basis_at(st.t)
            return

        if st.playing:
            st.t = (st.t + st.speed * dt) % 1.0
            st.current_basis = self.path.basis_at(st.t)

    # ------------------------------------------------------------------
    # modes

    def _begin_return(self, target_mode):
        st = self.state
        if geodesic_distance(st.current_basis, self.path.basis_at(st.t)) < _CONSISTENT_TOL:
            st.mode = target_mode
            st.current_basis = self.path.basis_at(st.t)
            self._transition = None
        else:
            self._transition = _Transition(st.current_basis.copy(), target_mode)

    def set_mode(self, mode):
        """Switch tour mode; transitions between bases are never abrupt.

        Entering manual freezes the current basis. Returning to a
        path-following mode blends back to basis_at(t) over
        ``blend_seconds`` (the mode flips once the blend lands).
        """
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        st = self.state
        if mode == st.mode:
            return
        if mode == "manual":
            st.mode = "manual"
            self._transition = None
            self._scrub_target = None
        elif mode == "grand":
            seq = grand_tour_extend(st.current_basis, n_targets=12, seed=self.grand_seed)
            from .path import compile_path

            self._grand_path = compile_path(seq)
            self._grand_t = 0.0
            st.mode = "grand"
            self._transition = None
            self._scrub_target = None
        else:
            self._begin_return(mode)

    # ------------------------------------------------------------------
    # manual operations

    def drag(self, dim_index, direction) -> Projection:
        st = self.state
        if st.mode != "manual":
            st.mode = "manual"
            self._transition = None
            self._scrub_target = None
        st.current_basis = manual_drag(st.current_basis, dim_index, direction)
        return self.projection()

    def rotate_residual(self, angle, about=0) -> Projection:
        st = self.state
        if st.mode != "manual":
            st.mode = "manual"
            self._transition = None
            self._scrub_target = None
        axis = residual_axis(st.current_basis, self._covariance())
        if axis is not None:
            st.current_basis = rotate_about_residual(st.current_basis, axis, angle, about=about)
        return self.projection()

    # ------------------------------------------------------------------
    # selection and encoding

    def _combine(self, mask, combine):
        st = self.state
        if combine == "replace":
            st.selection = mask
        elif combine == "add":
            st.selection = st.selection | mask
        elif combine == "subtract":
            st.selection = st.selection & ~mask
        else:
            raise ValueError(f"unknown combine mode {combine!r}")
        return st.selection

    def lasso_select(self, polygon, projection: Optional[Projection] = None, combine="replace"):
        """Select points inside a lasso polygon (even-odd rule).

        Selection is index-based so it survives basis changes —
        select-then-explore. The polygon is tested against the given
        projection (default: the current one).
        """
        polygon = np.asarray(polygon, dtype=np.float64)
        if polygon.ndim != 2 or polygon.shape[0] < 3 or polygon.shape[1] != 2:
            raise BadPolygon("lasso needs at least 3 vertices of (x, y)")
        if projection is None:
            projection = self.projection()
        mask = point_in_polygon(projection.xy, polygon)
        return self._combine(mask, combine)

    def label_select(self, column, values, combine="replace"):
        """Select rows whose categorical label is in ``values``.

        Values may be category names or integer codes.
        """
        lab = self.dataset.label(column)
        if lab.kind != "categorical":
            raise MissingColumn(f"{column!r} is not a categorical label column")
        wanted = set()
        for v in values:
            if isinstance(v, str):
                if v not in lab.categories:
                    raise ValueError(f"unknown category {v!r} in {column!r}")
                wanted.add(lab.categories.index(v))
            else:
                wanted.add(int(v))
        mask = np.isin(lab.codes, np.array(sorted(wanted), dtype=np.int64))
        return self._combine(mask, combine)

    def set_encoding(self, encoding):
        """Record the point-color encoding choice.

        Kinds: categorical(column), continuous(column, min, max), twod
        (anchored to a reference tour position; the reference basis is
        resolved here so clients can color without extra coordinates).
        """
        if encoding is None:
            self.state.color_encoding = None
            return None
        kind = encoding.get("kind")
        if kind == "categorical":
            lab = self.dataset.label(encoding["column"])
            if lab.kind != "categorical":
                raise MissingColumn(f"{encoding['column']!r} is not categorical")
            enc = {"kind": "categorical", "column": lab.name, "categories": list(lab.categories)}
        elif kind == "continuous":
            lab = self.dataset.label(encoding["column"])
            if lab.kind != "continuous":
                raise MissingColumn(f"{encoding['column']!r} is not continuous")
            lo = float(encoding.get("min", np.nanmin(lab.values)))
            hi = float(encoding.get("max", np.nanmax(lab.values)))
            enc = {"kind": "continuous", "column": lab.name, "min": lo, "max": hi}
        elif kind == "twod":
            ref_t = float(encoding.get("t", 0.0))
            ref_basis = self.path.basis_at(ref_t)
            enc = {
                "kind": "twod",
                "t": ref_t,
                "basis": [float(x) for x in ref_basis.ravel(order="F")],
            }
        else:
            raise ValueError(f"unknown encoding kind {kind!r}")
        self.state.color_encoding = enc
        return enc

    # ------------------------------------------------------------------
    # previews and snapshots

    def keyframe_previews(self, thumb_points: int = 5000, seed: int = 0):
        """Small projections of one shared subsample under each keyframe.

        The subsample is seeded and identical across keyframes so the
        gallery previews are directly comparable.
        """
        n = self.dataset.n_rows
        take = min(n, int(thumb_points))
        if take == n:
            idx = np.arange(n)
        else:
            rng = np.random.default_rng(int(seed))
            idx = np.sort(rng.choice(n, size=take, replace=False))
        sub = Dataset(
            [c[idx] for c in self.dataset.columns],
            list(self.dataset.dim_names),
            [],
        )
        return [project(sub, k.basis) for k in self.path.sequence]

    def snapshot(self, out_path, fmt="csv") -> None:
        """Write current positions (+ selection flag + labels) to a file."""
        if self.dataset.n_rows == 0:
            raise EmptyDataset("nothing to snapshot")
        proj = self.projection()
        sel = self.state.selection.astype(np.uint16)
        if fmt == "csv":
            headers = ["x", "y", "selected"] + [lab.name for lab in self.dataset.labels]
            with open(out_path, "w", encoding="utf-8") as f:
                f.write(",".join(headers) + "\n")
                lab_cells = []
                for lab in self.dataset.labels:
                    if lab.kind == "categorical":
                        lab_cells.append([lab.categories[c] for c in lab.codes])
                    else:
                        lab_cells.append([repr(float(v)) for v in lab.values])
                for i in range(proj.n_rows):
                    row = [repr(float(proj.xy[i, 0])), repr(float(proj.xy[i, 1])), str(int(sel[i]))]
                    row += [cells[i] for cells in lab_cells]
                    f.write(",".join(row) + "\n")
        elif fmt == "dtc1":
            labels = [
                LabelColumn("selected", "categorical", codes=sel, categories=["0", "1"])
            ] + list(self.dataset.labels)
            ds = Dataset([proj.xy[:, 0].copy(), proj.xy[:, 1].copy()], ["x", "y"], labels)
            save_columnar(ds, out_path)
        else:
            raise ValueError(f"unknown snapshot format {fmt!r}")
