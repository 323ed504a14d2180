"""Keyframe sequences compiled into arc-length-parameterized basis paths.

A path interpolates a cyclic (or open) sequence of keyframe bases with a
uniform cubic Catmull-Rom blend applied element-wise to the basis
matrices, re-orthonormalized at every evaluation. Compilation samples
each spline segment, sums geodesic distances into a cumulative table,
and ``basis_at`` then maps a position t in [0, 1] — interpreted as a
fraction of total path length — back through the table so that equal
steps in t traverse equal amounts of projection space.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._validation import check_basis
from .errors import DimensionMismatch, TooFewKeyframes
from .geometry import geodesic_distance, gram_schmidt

__all__ = ["Keyframe", "KeyframeSequence", "TourPath", "catmull_rom_basis", "compile_path"]

# Consecutive keyframes closer than this (in geodesic distance) bound a
# zero-length segment: kept in the path but never sampled, because the
# element-wise blend between two frames of the same plane can momentarily
# lose rank even though the plane never moves.
_ZERO_SEGMENT_TOL = 1e-9


@dataclass(frozen=True)
class Keyframe:
    """One tour stop: a basis plus display metadata.

    ``loadings`` optionally names the top contributing dimensions as
    (dimension index, weight in [0, 1]) pairs.
    """

    basis: np.ndarray
    label: str = ""
    loadings: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "basis", check_basis(self.basis, "keyframe basis"))
        if self.loadings is not None:
            loadings = tuple((int(i), float(w)) for i, w in self.loadings)
            p = self.basis.shape[0]
            for i, w in loadings:
                if not 0 <= i < p:
                    raise ValueError(f"loading index {i} out of range for {p} dims")
                if not -1e-12 <= w <= 1.0 + 1e-12:
                    raise ValueError(f"loading weight {w} outside [0, 1]")
            object.__setattr__(self, "loadings", loadings)

    @property
    def dims(self):
        return self.basis.shape[0]


class KeyframeSequence:
    """Ordered keyframes sharing one data space; cyclic by default."""

    def __init__(self, keyframes: Sequence[Keyframe], cyclic: bool = True):
        keyframes = list(keyframes)
        if len(keyframes) < 2:
            raise TooFewKeyframes(f"need at least 2 keyframes, got {len(keyframes)}")
        dims = keyframes[0].dims
        for k in keyframes[1:]:
            if k.dims != dims:
                raise DimensionMismatch(
                    f"keyframes mix {dims} and {k.dims} data dimensions"
                )
        self.keyframes = keyframes
        self.cyclic = bool(cyclic)

    @property
    def dims(self):
        return self.keyframes[0].dims

    def __len__(self):
        return len(self.keyframes)

    def __iter__(self):
        return iter(self.keyframes)

    def __getitem__(self, i):
        return self.keyframes[i]

    def bases(self):
        return [k.basis for k in self.keyframes]


def _blend(p0, p1, p2, p3, t):
    """Uniform Catmull-Rom (tension 0.5) element-wise matrix blend."""
    t2 = t * t
    t3 = t2 * t
    return 0.5 * (
        2.0 * p1
        + (p2 - p0) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (3.0 * (p1 - p2) + p3 - p0) * t3
    )


def catmull_rom_basis(p0, p1, p2, p3, t):
    """Interpolated basis between ``p1`` (t=0) and ``p2`` (t=1).

    The standard uniform cubic Catmull-Rom blend runs element-wise over
    the four control bases, then the result is re-orthonormalized, so
    the curve passes exactly through each keyframe while every
    intermediate matrix is a valid basis. Raises DegenerateBasis if the
    blend loses rank 2.
    """
    p0 = check_basis(p0, "p0")
    p1 = check_basis(p1, "p1")
    p2 = check_basis(p2, "p2")
    p3 = check_basis(p3, "p3")
    for other in (p1, p2, p3):
        if other.shape[0] != p0.shape[0]:
            raise DimensionMismatch("control bases mix data dimensions")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    return gram_schmidt(_blend(p0, p1, p2, p3, t))


@dataclass
class TourPath:
    """A compiled, arc-length-parameterized tour.

    ``raw_params`` / ``cum_lengths`` form the cumulative arc-length
    table: raw spline parameter (segment index + local t) against summed
    geodesic distance. Both are sorted nondecreasing; the last entry of
    ``cum_lengths`` equals ``total_length``. Immutable after compile.
    """

    sequence: KeyframeSequence
    samples_per_segment: int
    raw_params: np.ndarray
    cum_lengths: np.ndarray
    segment_lengths: np.ndarray
    total_length: float
    _boundary_cums: np.ndarray = field(repr=False, default=None)
    # Monotone cubic (length -> raw parameter) map per positive-length
    # segment: smoother playback speed than linear interpolation of the
    # same table, exact at every table node.
    _seg_maps: list = field(repr=False, default=None)

    @property
    def cyclic(self):
        return self.sequence.cyclic

    @property
    def dims(self):
        return self.sequence.dims

    @property
    def n_segments(self):
        return len(self.segment_lengths)

    def basis_at_raw(self, u):
        """Evaluate the spline at a raw parameter in [0, n_segments].

        This is the naive per-segment-uniform parameterization; it does
        not compensate for uneven keyframe spacing.
        """
        n_seg = self.n_segments
        if self.cyclic:
            u = u % n_seg
        else:
            u = min(max(u, 0.0), float(n_seg))
        seg = min(int(math.floor(u)), n_seg - 1)
        local = u - seg
        keys = self.sequence.bases()
        k = len(keys)
        if self.cyclic:
            idx = [(seg - 1) % k, seg % k, (seg + 1) % k, (seg + 2) % k]
        else:
            idx = [max(seg - 1, 0), seg, min(seg + 1, k - 1), min(seg + 2, k - 1)]
        return gram_schmidt(_blend(keys[idx[0]], keys[idx[1]], keys[idx[2]], keys[idx[3]], local))

    def basis_at(self, t):
        """Basis at arc-length fraction ``t`` of the whole tour.

        t wraps modulo 1 on cyclic paths and clamps to [0, 1] otherwise;
        t=0 is keyframe 0. On a zero-length path, keyframe 0 is returned
        for every t.
        """
        if self.cyclic:
            t = t % 1.0
        else:
            t = min(max(t, 0.0), 1.0)
        if self.total_length <= _ZERO_SEGMENT_TOL:
            return self.sequence[0].basis.copy()
        target = t * self.total_length
        if self._seg_maps:
            lows = self._seg_maps[0]
            maps = self._seg_maps[1]
            i = int(np.searchsorted(lows, target, side="right")) - 1
            i = min(max(i, 0), len(maps) - 1)
            lo, hi, interp = maps[i]
            target = min(max(target, lo), hi)
            return self.basis_at_raw(float(interp(target)))
        idx = int(np.searchsorted(self.cum_lengths, target, side="left"))
        idx = min(max(idx, 1), len(self.cum_lengths) - 1)
        lo, hi = self.cum_lengths[idx - 1], self.cum_lengths[idx]
        if hi <= lo:
            u = self.raw_params[idx]
        else:
            frac = (target - lo) / (hi - lo)
            u = self.raw_params[idx - 1] + frac * (self.raw_params[idx] - self.raw_params[idx - 1])
        return self.basis_at_raw(float(u))

    def keyframe_positions(self):
        """Arc-length fractions at which each keyframe is attained.

        First entry is always 0; a zero-length path yields all zeros.
        """
        if self.total_length <= _ZERO_SEGMENT_TOL:
            return [0.0] * len(self.sequence)
        n = len(self.sequence)
        return [float(self._boundary_cums[i] / self.total_length) for i in range(n)]


def compile_path(sequence: KeyframeSequence, samples_per_segment: int = 8) -> TourPath:
    """Build the cumulative arc-length table for a keyframe sequence.

    Each segment is sampled at ``samples_per_segment`` interior points
    plus endpoints and geodesic distances between consecutive samples
    are summed. Cyclic sequences get a closing segment from the last
    keyframe back to the first. Zero-length segments (consecutive
    keyframes with the same span) are retained at length 0 and skipped
    by lookup.
    """
    if len(sequence) < 2:
        raise TooFewKeyframes(f"need at least 2 keyframes, got {len(sequence)}")
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    keys = sequence.bases()
    k = len(keys)
    n_seg = k if sequence.cyclic else k - 1

    path = TourPath(
        sequence=sequence,
        samples_per_segment=int(samples_per_segment),
        raw_params=np.zeros(1),
        cum_lengths=np.zeros(1),
        segment_lengths=np.zeros(n_seg),
        total_length=0.0,
    )

    raws = [0.0]
    cums = [0.0]
    boundary = [0.0]
    seg_lengths = np.zeros(n_seg)
    seg_maps = []
    steps = samples_per_segment + 1
    for seg in range(n_seg):
        end = keys[(seg + 1) % k]
        start = keys[seg]
        if geodesic_distance(start, end) < _ZERO_SEGMENT_TOL:
            raws.append(float(seg + 1))
            cums.append(cums[-1])
            boundary.append(cums[-1])
            continue
        prev = path.basis_at_raw(float(seg))
        acc = cums[-1]
        sub_r = [float(seg)]
        sub_c = [acc]
        for j in range(1, steps + 1):
            u = seg + j / steps
            cur = path.basis_at_raw(u)
            acc += geodesic_distance(prev, cur)
            raws.append(float(u))
            cums.append(acc)
            sub_r.append(float(u))
            sub_c.append(acc)
            prev = cur
        seg_lengths[seg] = acc - boundary[-1]
        boundary.append(acc)
        if np.all(np.diff(sub_c) > 0):
            seg_maps.append((sub_c[0], sub_c[-1], PchipInterpolator(sub_c, sub_r)))

    path.raw_params = np.asarray(raws)
    path.cum_lengths = np.asarray(cums)
    path.segment_lengths = seg_lengths
    path.total_length = float(cums[-1])
    path._boundary_cums = np.asarray(boundary)
    if seg_maps:
        path._seg_maps = (np.array([m[0] for m in seg_maps]), seg_maps)
    return path
