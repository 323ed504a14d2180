// Session wire protocol: JSON text control frames plus binary frames
// with a 16-byte header (u32 magic, u32 kind, u64 payload length, all
// little-endian). Must stay byte-compatible with the server; the test
// suite decodes golden frames captured from it.

export const FRAME_MAGIC = 0x44544652; // b"DTFR" read as LE u32

export const KIND_DATA_CHUNK = 1;
export const KIND_PREVIEWS = 2;
export const KIND_BASIS = 3;
export const KIND_SELECTION = 4;

export interface HelloMessage {
  type: "hello";
  seq: number;
  protocol: number;
  n: number;
  p: number;
  dim_names: string[];
  cyclic: boolean;
  total_length: number;
  segment_lengths: number[];
  keyframe_positions: number[];
  keyframes: { label: string; loadings: [number, number][] | null }[];
  labels: { name: string; kind: "categorical" | "continuous"; categories: string[] | null }[];
  columns: { id: number; name: string; dtype: "f32" | "u16"; bytes: number }[];
  t: number;
  mode: string;
  speed: number;
  playing: boolean;
  encoding: unknown;
}

export interface StateMessage {
  type: "state";
  seq: number;
  mode: string;
  t: number;
  playing: boolean;
  speed: number;
}

export interface ErrorMessage {
  type: "error";
  seq: number;
  code: string;
  message: string;
}

export type ServerControl = HelloMessage | StateMessage | ErrorMessage | {
  type: string;
  seq: number;
  [key: string]: unknown;
};

export interface BasisFrame {
  seq: number;
  t: number;
  /** Column-major: p floats of column x, then p floats of column y. */
  basis: Float32Array;
}

export interface DataChunkFrame {
  seq: number;
  columnId: number;
  offset: number;
  total: number;
  bytes: Uint8Array;
}

export interface SelectionFrame {
  seq: number;
  mask: Uint8Array; // one byte per point, 0 or 1
}

export interface PreviewsFrame {
  seq: number;
  nPoints: number;
  frames: Float32Array[]; // interleaved xy pairs per keyframe
}

export class ProtocolError extends Error {}

export function decodeControl(text: string): ServerControl {
  let msg: unknown;
  try {
    msg = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`control frame is not JSON: ${exc}`);
  }
  if (typeof msg !== "object" || msg === null) throw new ProtocolError("control frame not an object");
  const rec = msg as Record<string, unknown>;
  if (typeof rec.type !== "string" || typeof rec.seq !== "number") {
    throw new ProtocolError("control message needs 'type' and 'seq'");
  }
  return rec as ServerControl;
}

export function encodeControl(msg: { type: string; seq: number; [key: string]: unknown }): string {
  return JSON.stringify(msg);
}

export interface RawFrame {
  kind: number;
  payload: DataView;
}

export function splitFrame(buf: ArrayBuffer): RawFrame {
  if (buf.byteLength < 16) throw new ProtocolError("binary frame shorter than its header");
  const head = new DataView(buf);
  const magic = head.getUint32(0, true);
  if (magic !== FRAME_MAGIC) throw new ProtocolError(`bad frame magic 0x${magic.toString(16)}`);
  const kind = head.getUint32(4, true);
  const length = Number(head.getBigUint64(8, true));
  if (buf.byteLength !== 16 + length) {
    throw new ProtocolError("frame length field disagrees with frame size");
  }
  return { kind, payload: new DataView(buf, 16) };
}

export function decodeBasis(payload: DataView): BasisFrame {
  const seq = payload.getUint32(0, true);
  const t = payload.getFloat64(8, true);
  const nFloats = (payload.byteLength - 16) / 4;
  if (nFloats % 2 !== 0) throw new ProtocolError("basis payload is not 2p floats");
  const basis = new Float32Array(nFloats);
  for (let i = 0; i < nFloats; i++) {
    basis[i] = payload.getFloat32(16 + 4 * i, true);
  }
  return { seq, t, basis };
}

export function decodeDataChunk(payload: DataView): DataChunkFrame {
  const seq = payload.getUint32(0, true);
  const columnId = payload.getUint32(4, true);
  const offset = Number(payload.getBigUint64(8, true));
  const total = Number(payload.getBigUint64(16, true));
  const bytes = new Uint8Array(payload.buffer, payload.byteOffset + 24, payload.byteLength - 24);
  return { seq, columnId, offset, total, bytes };
}

export function decodeSelection(payload: DataView): SelectionFrame {
  const seq = payload.getUint32(0, true);
  const n = Number(payload.getBigUint64(8, true));
  const mask = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    const byte = payload.getUint8(16 + (i >> 3));
    mask[i] = (byte >> (i & 7)) & 1; // LSB-first packing
  }
  return { seq, mask };
}

export function decodePreviews(payload: DataView): PreviewsFrame {
  const seq = payload.getUint32(0, true);
  const nFrames = payload.getUint32(4, true);
  const nPoints = payload.getUint32(8, true);
  const expected = 16 + nFrames * nPoints * 8;
  if (payload.byteLength !== expected) throw new ProtocolError("previews payload size mismatch");
  const frames: Float32Array[] = [];
  for (let f = 0; f < nFrames; f++) {
    const arr = new Float32Array(nPoints * 2);
    const base = 16 + f * nPoints * 8;
    for (let i = 0; i < nPoints * 2; i++) {
      arr[i] = payload.getFloat32(base + 4 * i, true);
    }
    frames.push(arr);
  }
  return { seq, nPoints, frames };
}

/** Reassembles per-column data chunks streamed after the hello. */
export class ChunkAssembler {
  private buffers = new Map<number, Uint8Array>();
  private received = new Map<number, number>();
  private expected: Map<number, number>;

  constructor(columns: { id: number; bytes: number }[]) {
    this.expected = new Map(columns.map((c) => [c.id, c.bytes]));
  }

  add(chunk: DataChunkFrame): void {
    let buf = this.buffers.get(chunk.columnId);
    if (!buf) {
      buf = new Uint8Array(chunk.total);
      this.buffers.set(chunk.columnId, buf);
      this.received.set(chunk.columnId, 0);
    }
    buf.set(chunk.bytes, chunk.offset);
    this.received.set(chunk.columnId, (this.received.get(chunk.columnId) ?? 0) + chunk.bytes.length);
  }

  get complete(): boolean {
    for (const [id, bytes] of this.expected) {
      if ((this.received.get(id) ?? 0) < bytes) return false;
    }
    return true;
  }

  float32(id: number): Float32Array {
    const buf = this.buffers.get(id);
    if (!buf) throw new ProtocolError(`column ${id} never arrived`);
    return new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
  }

  uint16(id: number): Uint16Array {
    const buf = this.buffers.get(id);
    if (!buf) throw new ProtocolError(`column ${id} never arrived`);
    return new Uint16Array(buf.buffer, buf.byteOffset, buf.byteLength / 2);
  }
}
