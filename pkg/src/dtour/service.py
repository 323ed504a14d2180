"""Local session server and its wire protocol.

One ordered, reliable, bidirectional channel (a WebSocket) per session.
Control messages are JSON text frames; bulk payloads are binary frames
with a fixed 16-byte header (u32 magic, u32 kind, u64 payload length).
The dataset ships once as per-column binary chunks right after the
hello; from then on the server sends only bases, selections, and state
— O(p) bytes per interaction, independent of N.

Every message carries a per-direction strictly increasing sequence
number; a client that breaks protocol gets an error frame and the
session closes.
"""

import asyncio
import errno
import json
import mimetypes
import struct
from pathlib import Path

import numpy as np

from .engine import TourEngine
from .errors import BindFailure, DtourError, ProtocolViolation

__all__ = [
    "FRAME_MAGIC",
    "KIND_DATA_CHUNK",
    "KIND_PREVIEWS",
    "KIND_BASIS",
    "KIND_SELECTION",
    "MAX_FRAME_BYTES",
    "encode_control",
    "decode_control",
    "encode_basis",
    "decode_basis",
    "encode_data_chunks",
    "decode_data_chunk",
    "encode_selection",
    "decode_selection",
    "encode_previews",
    "decode_previews",
    "SessionServer",
    "serve_blocking",
]

FRAME_MAGIC = 0x44544652  # "RFTD" little-endian == b"DTFR" on the wire
KIND_DATA_CHUNK = 1
KIND_PREVIEWS = 2
KIND_BASIS = 3
KIND_SELECTION = 4

MAX_FRAME_BYTES = 4 * 1024 * 1024
_CHUNK_SUBHEADER = struct.Struct("<IIQQ")  # seq, column_id, offset, total_bytes
_HEADER = struct.Struct("<IIQ")  # magic, kind, payload length
_DATA_PER_FRAME = MAX_FRAME_BYTES - _HEADER.size - _CHUNK_SUBHEADER.size

CLIENT_TYPES = frozenset(
    {
        "set_t",
        "set_mode",
        "drag",
        "rotate_residual",
        "lasso",
        "label_select",
        "set_encoding",
        "play",
        "pause",
        "request_previews",
        "request_snapshot",
    }
)


# ----------------------------------------------------------------------
# codec

def encode_control(msg: dict) -> str:
    if "type" not in msg or "seq" not in msg:
        raise ProtocolViolation("control message needs 'type' and 'seq'")
    return json.dumps(msg, separators=(",", ":"))


def decode_control(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"control frame is not JSON: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg or "seq" not in msg:
        raise ProtocolViolation("control message needs 'type' and 'seq'")
    if not isinstance(msg["seq"], int):
        raise ProtocolViolation("'seq' must be an integer")
    return msg


def _frame(kind: int, payload: bytes) -> bytes:
    return _HEADER.pack(FRAME_MAGIC, kind, len(payload)) + payload


def split_frame(data: bytes):
    """(kind, payload) of one binary frame; validates magic and length."""
    if len(data) < _HEADER.size:
        raise ProtocolViolation("binary frame shorter than its header")
    magic, kind, length = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise ProtocolViolation(f"bad frame magic {magic:#x}")
    if len(data) != _HEADER.size + length:
        raise ProtocolViolation("frame length field disagrees with frame size")
    return kind, data[_HEADER.size :]


def encode_basis(seq: int, t: float, basis) -> bytes:
    """Basis update: u32 seq, u32 flags, f64 t, then 2p float32.

    Column-major payload (p floats of column x, then column y): exactly
    8p bytes of coordinates regardless of N.
    """
    basis = np.asarray(basis, dtype=np.float32)
    payload = struct.pack("<IId", seq, 0, float(t)) + basis.tobytes(order="F")
    return _frame(KIND_BASIS, payload)


def decode_basis(payload: bytes):
    seq, _flags, t = struct.unpack_from("<IId", payload)
    flat = np.frombuffer(payload, dtype="<f4", offset=16)
    if len(flat) % 2:
        raise ProtocolViolation("basis payload is not 2p floats")
    return seq, t, flat.reshape(2, -1).T.copy()


def encode_data_chunks(seq_source, column_id: int, data: bytes):
    """Yield one or more data_chunk frames covering ``data``.

    Frames never exceed MAX_FRAME_BYTES; receivers reassemble by
    (column_id, offset, total).
    """
    total = len(data)
    offset = 0
    while True:
        piece = data[offset : offset + _DATA_PER_FRAME]
        sub = _CHUNK_SUBHEADER.pack(next(seq_source), column_id, offset, total)
        yield _frame(KIND_DATA_CHUNK, sub + piece)
        offset += len(piece)
        if offset >= total:
            break


def decode_data_chunk(payload: bytes):
    seq, column_id, offset, total = _CHUNK_SUBHEADER.unpack_from(payload)
    return seq, column_id, offset, total, payload[_CHUNK_SUBHEADER.size :]


def encode_selection(seq: int, mask) -> bytes:
    """Selection bitmask: u32 seq, u32 mode, u64 n, LSB-first packed bits."""
    mask = np.asarray(mask, dtype=bool)
    packed = np.packbits(mask, bitorder="little").tobytes()
    return _frame(KIND_SELECTION, struct.pack("<IIQ", seq, 0, len(mask)) + packed)


def decode_selection(payload: bytes):
    seq, _mode, n = struct.unpack_from("<IIQ", payload)
    bits = np.unpackbits(
        np.frombuffer(payload, dtype=np.uint8, offset=16), bitorder="little"
    )
    return seq, bits[:n].astype(bool)


def encode_previews(seq: int, previews) -> bytes:
    """Preview thumbnails: u32 seq, u32 frames, u32 points, u32 pad, xy f32."""
    arrs = [np.asarray(p, dtype=np.float32).reshape(-1, 2) for p in previews]
    n_points = arrs[0].shape[0] if arrs else 0
    for a in arrs:
        if a.shape[0] != n_points:
            raise ValueError("all previews must share one subsample")
    body = b"".join(a.tobytes(order="C") for a in arrs)
    payload = struct.pack("<IIII", seq, len(arrs), n_points, 0) + body
    return _frame(KIND_PREVIEWS, payload)


def decode_previews(payload: bytes):
    seq, n_frames, n_points, _pad = struct.unpack_from("<IIII", payload)
    flat = np.frombuffer(payload, dtype="<f4", offset=16)
    if len(flat) != n_frames * n_points * 2:
        raise ProtocolViolation("previews payload size mismatch")
    return seq, [
        flat[i * n_points * 2 : (i + 1) * n_points * 2].reshape(n_points, 2).copy()
        for i in range(n_frames)
    ]


# ----------------------------------------------------------------------
# server

class _SeqCounter:
    def __init__(self):
        self.value = 0

    def __next__(self):
        self.value += 1
        return self.value


def _peek(queue: asyncio.Queue):
    items = getattr(queue, "_queue", None)
    return items[0] if items else None


def _is_set_t(raw):
    if not isinstance(raw, str):
        return False
    try:
        return json.loads(raw).get("type") == "set_t"
    except (json.JSONDecodeError, AttributeError):
        return False


class SessionServer:
    """One-client session server around a TourEngine.

    ``ui_dir`` optionally points at a static bundle served on plain HTTP
    GETs of the same port (the WebSocket endpoint lives at /ws).
    """

    def __init__(self, engine: TourEngine, host="127.0.0.1", port=7700,
                 frame_budget=120.0, ui_dir=None):
        self.engine = engine
        self.host = host
        self.port = int(port)
        self.frame_budget = float(frame_budget)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._server = None
        self._busy = False
        self.bytes_log = []  # (direction, kind, nbytes) for bandwidth audits

    # -- lifecycle ------------------------------------------------------

    async def start(self):
        from websockets.asyncio.server import serve

        try:
            self._server = await serve(
                self._session,
                self.host,
                self.port,
                process_request=self._maybe_serve_static,
                max_size=MAX_FRAME_BYTES + 1024,
            )
        except OSError as exc:
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
            raise
        return self

    @property
    def bound_port(self):
        return self._server.sockets[0].getsockname()[1]

    async def close(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    # -- static UI ------------------------------------------------------

    def _maybe_serve_static(self, connection, request):
        if request.path == "/ws" or "Upgrade" in request.headers:
            return None  # proceed with the WebSocket handshake
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        def page(status, reason, body, ctype="text/plain; charset=utf-8"):
            headers = Headers(
                [("Content-Type", ctype), ("Content-Length", str(len(body)))]
            )
            return Response(status, reason, headers, body)

        if self.ui_dir is None:
            return page(404, "Not Found", b"no UI bundle configured\n")
        rel = request.path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        try:
            target.relative_to(self.ui_dir.resolve())
        except ValueError:
            return page(403, "Forbidden", b"forbidden\n")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return page(404, "Not Found", b"not found\n")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        return page(200, "OK", target.read_bytes(), ctype)

    # -- session --------------------------------------------------------

    async def _send(self, ws, data, kind=None):
        await ws.send(data)
        direction = "out"
        if isinstance(data, (bytes, bytearray)):
            self.bytes_log.append((direction, kind, len(data)))
        else:
            self.bytes_log.append((direction, "json", len(data.encode())))

    def _hello(self, seq):
        eng = self.engine
        ds = eng.dataset
        path = eng.path
        st = eng.state
        columns = [
            {"id": j, "name": ds.dim_names[j], "dtype": "f32", "bytes": ds.n_rows * 4}
            for j in range(ds.n_dims)
        ]
        for i, lab in enumerate(ds.labels):
            nbytes = ds.n_rows * (2 if lab.kind == "categorical" else 4)
            columns.append(
                {
                    "id": ds.n_dims + i,
                    "name": lab.name,
                    "dtype": "u16" if lab.kind == "categorical" else "f32",
                    "bytes": nbytes,
                }
            )
        return {
            "type": "hello",
            "seq": seq,
            "protocol": 1,
            "n": ds.n_rows,
            "p": ds.n_dims,
            "dim_names": list(ds.dim_names),
            "cyclic": path.cyclic,
            "total_length": path.total_length,
            "segment_lengths": [float(x) for x in path.segment_lengths],
            "keyframe_positions": path.keyframe_positions(),
            "keyframes": [
                {"label": k.label, "loadings": [[i, w] for i, w in k.loadings] if k.loadings else None}
                for k in path.sequence
            ],
            "labels": [
                {"name": lab.name, "kind": lab.kind,
                 "categories": lab.categories if lab.kind == "categorical" else None}
                for lab in ds.labels
            ],
            "columns": columns,
            "t": st.t,
            "mode": st.mode,
            "speed": st.speed,
            "playing": st.playing,
            "encoding": st.color_encoding,
        }

    async def _stream_dataset(self, ws, seq):
        ds = self.engine.dataset
        for j, col in enumerate(ds.columns):
            data = np.ascontiguousarray(col, dtype="<f4").tobytes()
            for frame in encode_data_chunks(seq, j, data):
                await self._send(ws, frame, KIND_DATA_CHUNK)
        for i, lab in enumerate(ds.labels):
            if lab.kind == "categorical":
                data = np.ascontiguousarray(lab.codes, dtype="<u2").tobytes()
            else:
                data = np.ascontiguousarray(lab.values, dtype="<f4").tobytes()
            for frame in encode_data_chunks(seq, ds.n_dims + i, data):
                await self._send(ws, frame, KIND_DATA_CHUNK)

    async def _session(self, ws):
        from websockets.exceptions import ConnectionClosed

        if self._busy:
            seq = _SeqCounter()
            await self._send(
                ws,
                encode_control({"type": "error", "seq": next(seq), "code": "busy",
                                "message": "a session is already active"}),
            )
            await ws.close()
            return
        self._busy = True
        out_seq = _SeqCounter()
        last_in_seq = 0
        eng = self.engine
        try:
            await self._send(ws, encode_control(self._hello(next(out_seq))))
            await self._stream_dataset(ws, out_seq)

            inbox = asyncio.Queue()

            async def reader():
                try:
                    async for raw in ws:
                        await inbox.put(raw)
                except ConnectionClosed:
                    pass
                finally:
                    await inbox.put(None)

            reader_task = asyncio.create_task(reader())
            min_interval = 1.0 / self.frame_budget
            loop = asyncio.get_running_loop()
            last_tick = loop.time()
            last_mode = eng.state.mode

            async def send_basis():
                st = eng.state
                await self._send(
                    ws, encode_basis(next(out_seq), st.t, st.current_basis), KIND_BASIS
                )

            try:
                while True:
                    engine_busy = (
                        eng.state.playing
                        or eng._transition is not None
                        or eng._scrub_target is not None
                    )
                    try:
                        timeout = min_interval if engine_busy else None
                        raw = await asyncio.wait_for(inbox.get(), timeout=timeout)
                    except asyncio.TimeoutError:
                        now = loop.time()
                        eng.tick(now - last_tick)
                        last_tick = now
                        await send_basis()
                        if eng.state.mode != last_mode:
                            # a return transition just landed
                            last_mode = eng.state.mode
                            await self._send_state(ws, out_seq)
                        continue
                    if raw is None:
                        break
                    # Coalesce scrub bursts: only the latest set_t matters.
                    while _is_set_t(raw) and _is_set_t(_peek(inbox)):
                        raw = await inbox.get()
                    last_tick = loop.time()
                    last_in_seq = await self._handle_message(
                        ws, raw, out_seq, last_in_seq, send_basis
                    )
                    last_mode = eng.state.mode
            finally:
                reader_task.cancel()
        except ConnectionClosed:
            pass
        except ProtocolViolation:
            pass
        finally:
            self._busy = False

    async def _handle_message(self, ws, raw, out_seq, last_in_seq, send_basis):
        if isinstance(raw, (bytes, bytearray)):
            await self._protocol_error(ws, out_seq, "clients send JSON control frames only")
            raise ProtocolViolation("binary frame from client")
        try:
            msg = decode_control(raw)
        except ProtocolViolation as exc:
            await self._protocol_error(ws, out_seq, str(exc))
            raise
        self.bytes_log.append(("in", msg.get("type"), len(raw.encode())))
        if msg["seq"] <= last_in_seq:
            await self._protocol_error(
                ws, out_seq, f"sequence number {msg['seq']} not increasing"
            )
            raise ProtocolViolation("non-monotonic client seq")
        if msg["type"] not in CLIENT_TYPES:
            await self._protocol_error(ws, out_seq, f"unknown message type {msg['type']!r}")
            raise ProtocolViolation("unknown message type")

        eng = self.engine
        mtype = msg["type"]
        try:
            if mtype == "set_t":
                eng.scrub(float(msg["t"]), animate=bool(msg.get("animate", False)))
                await send_basis()
            elif mtype == "set_mode":
                eng.set_mode(str(msg["mode"]))
                await self._send_state(ws, out_seq)
                await send_basis()
            elif mtype == "drag":
                eng.drag(int(msg["dim"]), [float(x) for x in msg["direction"]])
                await send_basis()
            elif mtype == "rotate_residual":
                eng.rotate_residual(float(msg["angle"]), about=int(msg.get("about", 0)))
                await send_basis()
            elif mtype == "lasso":
                sel = eng.lasso_select(msg["polygon"], combine=msg.get("combine", "replace"))
                await self._send(ws, encode_selection(next(out_seq), sel), KIND_SELECTION)
            elif mtype == "label_select":
                sel = eng.label_select(
                    msg["column"], msg["values"], combine=msg.get("combine", "replace")
                )
                await self._send(ws, encode_selection(next(out_seq), sel), KIND_SELECTION)
            elif mtype == "set_encoding":
                enc = eng.set_encoding(msg.get("encoding"))
                await self._send(
                    ws,
                    encode_control({"type": "encoding", "seq": next(out_seq), "encoding": enc}),
                )
            elif mtype == "play":
                if "frame_budget" in msg:
                    self.frame_budget = max(1.0, float(msg["frame_budget"]))
                eng.play(msg.get("speed"))
                await self._send_state(ws, out_seq)
            elif mtype == "pause":
                eng.pause()
                await self._send_state(ws, out_seq)
            elif mtype == "request_previews":
                previews = eng.keyframe_previews(
                    thumb_points=int(msg.get("thumb_points", 5000)),
                    seed=int(msg.get("seed", 0)),
                )
                await self._send(
                    ws,
                    encode_previews(next(out_seq), [p.xy for p in previews]),
                    KIND_PREVIEWS,
                )
            elif mtype == "request_snapshot":
                eng.snapshot(msg["path"], fmt=msg.get("format", "csv"))
                await self._send(
                    ws,
                    encode_control(
                        {"type": "snapshot_done", "seq": next(out_seq), "path": msg["path"]}
                    ),
                )
        except (KeyError, TypeError) as exc:
            await self._protocol_error(ws, out_seq, f"malformed {mtype}: {exc!r}")
            raise ProtocolViolation(f"malformed {mtype}") from exc
        except (DtourError, ValueError) as exc:
            # Operation-level failure: report, keep the session alive.
            await self._send(
                ws,
                encode_control(
                    {
                        "type": "error",
                        "seq": next(out_seq),
                        "code": type(exc).__name__,
                        "message": str(exc),
                    }
                ),
            )
        return msg["seq"]

    async def _send_state(self, ws, out_seq):
        st = self.engine.state
        await self._send(
            ws,
            encode_control(
                {
                    "type": "state",
                    "seq": next(out_seq),
                    "mode": st.mode,
                    "t": st.t,
                    "playing": st.playing,
                    "speed": st.speed,
                }
            ),
        )

    async def _protocol_error(self, ws, out_seq, message):
        try:
            await self._send(
                ws,
                encode_control(
                    {"type": "error", "seq": next(out_seq), "code": "protocol", "message": message}
                ),
            )
            await ws.close(code=1002, reason="protocol violation")
        except Exception:
            pass


def serve_blocking(engine: TourEngine, host="127.0.0.1", port=7700, ui_dir=None,
                   frame_budget=120.0, ready_callback=None):
    """Run a session server until interrupted (CLI entry point)."""

    async def main():
        server = SessionServer(
            engine, host=host, port=port, frame_budget=frame_budget, ui_dir=ui_dir
        )
        await server.start()
        if ready_callback is not None:
            ready_callback(server)
        try:
            await asyncio.Future()
        except asyncio.CancelledError:
            pass
        finally:
            await server.close()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
