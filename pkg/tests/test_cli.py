import json
import os
import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from dtour.cli import main
from dtour.dataio import load_tour
from dtour.geometry import rotation2


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(12)
    x = rng.standard_normal((3000, 4)) * np.sqrt([9.0, 4.0, 1.0, 0.25])
    cls = rng.choice(["u", "v", "w"], 3000)
    path = tmp / "data.csv"
    with open(path, "w") as f:
        f.write("a,b,c,d,cls\n")
        for row, c in zip(x, cls):
            f.write(",".join(repr(float(v)) for v in row) + f",{c}\n")
    return path


@pytest.fixture(scope="module")
def embeddings_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("embs")
    rng = np.random.default_rng(5)
    base = rng.standard_normal((300, 2))
    for i in range(3):
        pts = base @ rotation2(0.4 * i) + 0.05 * i * rng.standard_normal((300, 2))
        with open(tmp / f"{i:02d}.csv", "w") as f:
            f.write("x,y\n")
            for row in pts:
                f.write(f"{float(row[0])!r},{float(row[1])!r}\n")
    return tmp


def test_build_little(data_csv, tmp_path, capsys):
    out = tmp_path / "little.json"
    code = main(
        [
            "build",
            "--input",
            str(data_csv),
            "--strategy",
            "little",
            "--components",
            "4",
            "--standardize",
            "zscore",
            "--label-columns",
            "cls",
            "--seed",
            "0",
            "--output",
            str(out),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "keyframes: 4" in printed
    assert "total geodesic length" in printed
    tf = load_tour(out)
    assert len(tf.keyframes) == 4
    assert tf.standardize == "zscore"
    assert tf.dims == 4


def test_build_sequential(embeddings_dir, tmp_path, capsys):
    out = tmp_path / "seq.json"
    code = main(
        ["build", "--strategy", "sequential", "--embeddings", str(embeddings_dir), "--output", str(out)]
    )
    assert code == 0
    tf = load_tour(out)
    assert tf.dims == 6  # 2K for K=3 embeddings
    emb = out.with_suffix("").with_suffix("")  # strip .json
    companion = str(out)[: -len(".json")] + ".embedding.dtc1"
    assert os.path.exists(companion)
    from dtour.dataio import load_columnar

    ds = load_columnar(companion)
    assert ds.n_dims == 6 and ds.n_rows == 300


def test_build_invalid_strategy(data_csv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(
            [
                "build",
                "--input",
                str(data_csv),
                "--strategy",
                "zigzag",
                "--output",
                str(tmp_path / "x.json"),
            ]
        )
    assert exc.value.code == 2


def test_validate_clean_and_corrupt(data_csv, tmp_path, capsys):
    out = tmp_path / "t.json"
    assert (
        main(
            ["build", "--input", str(data_csv), "--strategy", "little", "--components", "3",
             "--label-columns", "cls", "--output", str(out)]
        )
        == 0
    )
    assert main(["validate", str(out)]) == 0
    capsys.readouterr()

    doc = json.loads(out.read_text())
    doc["keyframes"][1]["basis"] = [1.5 * v for v in doc["keyframes"][1]["basis"]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == 1
    printed = capsys.readouterr()
    assert "keyframe 1" in printed.out and "VIOLATION" in printed.out

    doc = json.loads(out.read_text())
    doc["keyframes"][0]["basis"][0] += 1e-8
    drifty = tmp_path / "drift.json"
    drifty.write_text(json.dumps(doc))
    assert main(["validate", str(drifty)]) == 0
    printed = capsys.readouterr()
    assert "repaired on load" in printed.out


def test_project_at_keyframe_matches_pca(data_csv, tmp_path, capsys):
    from dtour.dataio import load_csv, standardize
    from dtour.strategies import PrincipalComponents

    out = tmp_path / "t.json"
    main(
        ["build", "--input", str(data_csv), "--strategy", "little", "--components", "4",
         "--standardize", "zscore", "--label-columns", "cls", "--output", str(out)]
    )
    snap = tmp_path / "snap.csv"
    assert (
        main(
            ["project", "--input", str(data_csv), "--tour", str(out), "--t", "0.0",
             "--label-columns", "cls", "--output", str(snap)]
        )
        == 0
    )
    rows = snap.read_text().strip().splitlines()
    assert rows[0] == "x,y,selected,cls"
    got = np.array([[float(v) for v in r.split(",")[:2]] for r in rows[1:]])

    ds = load_csv(data_csv, label_columns=["cls"])
    ds_std, _ = standardize(ds, "zscore")
    pca = PrincipalComponents(n_components=4).fit(ds_std.matrix())
    scores = pca.transform(ds_std.matrix())[:, :2]
    assert np.abs(got - scores).max() < 1e-4


def test_project_wraps_cyclic(data_csv, tmp_path, capsys):
    out = tmp_path / "t.json"
    main(
        ["build", "--input", str(data_csv), "--strategy", "little", "--components", "4",
         "--label-columns", "cls", "--output", str(out)]
    )
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    c = tmp_path / "c.csv"
    common = ["project", "--input", str(data_csv), "--tour", str(out), "--label-columns", "cls"]
    assert main(common + ["--t", "0.0", "--output", str(a)]) == 0
    assert main(common + ["--t", "1.0", "--output", str(b)]) == 0
    assert main(common + ["--t", "1.25", "--output", str(c)]) == 0
    assert a.read_text() == b.read_text()
    d = tmp_path / "d.csv"
    assert main(common + ["--t", "0.25", "--output", str(d)]) == 0
    assert c.read_text() == d.read_text()


def test_bench_runs_and_rejects_zero(capsys):
    code = main(["bench", "--n", "20000", "--p", "8", "--duration", "0.3", "--keyframes", "6"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n"] == 20000
    assert report["projections_per_second"] > 0
    assert report["basis_at_ms"]["median"] < 1.0

    assert main(["bench", "--n", "0", "--p", "8"]) == 2


def test_bench_stability(capsys):
    # Two short runs land within 20% of each other (one retry allowed for
    # noisy shared hardware).
    def run():
        main(["bench", "--n", "100000", "--p", "8", "--duration", "0.8"])
        return json.loads(capsys.readouterr().out)["projections_per_second"]

    for _ in range(2):
        a, b = run(), run()
        if abs(a - b) / max(a, b) < 0.20:
            break
    else:
        pytest.fail(f"throughput unstable: {a:.1f}/s vs {b:.1f}/s")


def test_missing_input_env_error(tmp_path):
    code = main(
        ["build", "--input", str(tmp_path / "nope.csv"), "--strategy", "little",
         "--output", str(tmp_path / "x.json")]
    )
    assert code == 3


def test_serve_bind_failure(data_csv, tmp_path):
    out = tmp_path / "t.json"
    main(
        ["build", "--input", str(data_csv), "--strategy", "little", "--components", "3",
         "--label-columns", "cls", "--output", str(out)]
    )
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.listen(1)
    try:
        code = main(
            ["serve", "--input", str(data_csv), "--tour", str(out), "--label-columns", "cls",
             "--port", str(port)]
        )
        assert code == 3
    finally:
        sock.close()


def test_serve_subprocess_hello(data_csv, tmp_path):
    import asyncio
    import websockets

    out = tmp_path / "t.json"
    main(
        ["build", "--input", str(data_csv), "--strategy", "little", "--components", "3",
         "--label-columns", "cls", "--output", str(out)]
    )
    env = dict(os.environ)
    proc = subprocess.Popen(
        [sys.executable, "-m", "dtour.cli", "serve", "--input", str(data_csv), "--tour", str(out),
         "--label-columns", "cls", "--port", "0", "--open"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
        env=env,
    )
    try:
        line = ""
        deadline = time.time() + 30
        port = None
        while time.time() < deadline:
            line = proc.stdout.readline()
            if "session endpoint" in line:
                port = int(line.rsplit(":", 1)[1].split("/")[0])
                break
        assert port, "server did not announce its endpoint"

        async def check():
            async with websockets.connect(f"ws://127.0.0.1:{port}/ws", max_size=None) as ws:
                hello = json.loads(await ws.recv())
                assert hello["type"] == "hello"
                assert hello["n"] == 3000 and hello["p"] == 4
                assert abs(sum(hello["segment_lengths"]) - hello["total_length"]) < 1e-6

        asyncio.run(check())
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_config_file_defaults(data_csv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "dtour.toml").write_text("[build]\ncomponents = 3\n")
    out = tmp_path / "cfg.json"
    code = main(
        ["build", "--input", str(data_csv), "--strategy", "little", "--label-columns", "cls",
         "--output", str(out)]
    )
    assert code == 0
    assert len(load_tour(out).keyframes) == 3
