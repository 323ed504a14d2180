"""Generate golden protocol fixtures for the front-end test suite.

Run from the repository root with the Python package installed:

    python frontend/scripts/make_fixtures.py

Captures a real hello + binary frames from the session server codec so
the TypeScript client proves byte compatibility against actual server
output rather than against its own mirror.
"""

import json
from pathlib import Path

import numpy as np

from dtour.dataio import Dataset, LabelColumn
from dtour.engine import TourEngine
from dtour.path import compile_path
from dtour.strategies import grand_tour_extend
from dtour.geometry import random_basis
from dtour import service as svc

OUT = Path(__file__).parent.parent / "test" / "fixtures"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(1234)
    n, p = 500, 5
    cols = [rng.standard_normal(n).astype(np.float32) for _ in range(p)]
    labels = [
        LabelColumn(
            "cls",
            "categorical",
            codes=rng.integers(0, 3, n).astype(np.uint16),
            categories=["alpha", "beta", "gamma"],
        ),
        LabelColumn("score", "continuous", values=rng.standard_normal(n).astype(np.float32)),
    ]
    ds = Dataset(cols, [f"d{i}" for i in range(p)], labels)
    path = compile_path(grand_tour_extend(random_basis(p, rng), 4, seed=77))
    engine = TourEngine(ds, path)

    server = svc.SessionServer(engine)
    hello = server._hello(1)
    (OUT / "hello.json").write_text(json.dumps(hello, indent=1))

    # column payloads, chunked small to force reassembly
    import dtour.service as s

    orig = s._DATA_PER_FRAME
    s._DATA_PER_FRAME = 512
    try:
        frames = []
        counter = svc._SeqCounter()
        for j, col in enumerate(cols):
            for f in svc.encode_data_chunks(counter, j, np.ascontiguousarray(col, "<f4").tobytes()):
                frames.append(f)
        for i, lab in enumerate(labels):
            payload = (
                np.ascontiguousarray(lab.codes, "<u2").tobytes()
                if lab.kind == "categorical"
                else np.ascontiguousarray(lab.values, "<f4").tobytes()
            )
            for f in svc.encode_data_chunks(counter, p + i, payload):
                frames.append(f)
    finally:
        s._DATA_PER_FRAME = orig
    blob = b"".join(len(f).to_bytes(4, "little") + f for f in frames)
    (OUT / "data_chunks.bin").write_bytes(blob)

    # basis frames at every keyframe position
    basis_frames = []
    expected_bases = []
    for i, t in enumerate(path.keyframe_positions()):
        basis = path.basis_at(t)
        basis_frames.append(svc.encode_basis(100 + i, t, basis))
        expected_bases.append(
            {"t": t, "basis": [float(x) for x in basis.astype(np.float32).ravel(order="F")]}
        )
    (OUT / "basis_frames.bin").write_bytes(
        b"".join(len(f).to_bytes(4, "little") + f for f in basis_frames)
    )

    mask = (rng.random(n) < 0.25)
    (OUT / "selection.bin").write_bytes(svc.encode_selection(7, mask))

    previews = engine.keyframe_previews(thumb_points=n, seed=0)
    (OUT / "previews.bin").write_bytes(svc.encode_previews(9, [pv.xy for pv in previews]))

    expected = {
        "n": n,
        "p": p,
        "columns_first8": [[float(v) for v in c[:8]] for c in cols],
        "cls_codes_first16": [int(v) for v in labels[0].codes[:16]],
        "score_first8": [float(v) for v in labels[1].values[:8]],
        "selection_indices_first": [int(i) for i in np.flatnonzero(mask)[:20]],
        "selection_count": int(mask.sum()),
        "bases": expected_bases,
        "previews_frame0_first8": [float(v) for v in previews[0].xy.ravel()[:8]],
        "segment_lengths": [float(x) for x in path.segment_lengths],
        "keyframe_positions": path.keyframe_positions(),
    }
    (OUT / "expected.json").write_text(json.dumps(expected, indent=1))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
