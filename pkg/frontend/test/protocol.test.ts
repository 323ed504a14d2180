// Byte-compatibility against golden frames captured from the server.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ChunkAssembler,
  KIND_BASIS,
  KIND_DATA_CHUNK,
  KIND_PREVIEWS,
  KIND_SELECTION,
  decodeBasis,
  decodeControl,
  decodeDataChunk,
  decodePreviews,
  decodeSelection,
  splitFrame,
  type HelloMessage,
} from "../src/protocol.js";

const FIXTURES = join(__dirname, "fixtures");

function loadBuffer(name: string): ArrayBuffer {
  const raw = readFileSync(join(FIXTURES, name));
  return raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength);
}

function* frames(name: string): Generator<ArrayBuffer> {
  const buf = loadBuffer(name);
  const view = new DataView(buf);
  let pos = 0;
  while (pos < buf.byteLength) {
    const len = view.getUint32(pos, true);
    yield buf.slice(pos + 4, pos + 4 + len);
    pos += 4 + len;
  }
}

const hello = JSON.parse(readFileSync(join(FIXTURES, "hello.json"), "utf-8")) as HelloMessage;
const expected = JSON.parse(readFileSync(join(FIXTURES, "expected.json"), "utf-8"));

describe("control frames", () => {
  it("parses the server hello", () => {
    const msg = decodeControl(JSON.stringify(hello)) as HelloMessage;
    expect(msg.type).toBe("hello");
    expect(msg.n).toBe(expected.n);
    expect(msg.p).toBe(expected.p);
    expect(msg.dim_names).toHaveLength(expected.p);
    expect(msg.columns).toHaveLength(expected.p + 2);
    const segSum = msg.segment_lengths.reduce((a: number, b: number) => a + b, 0);
    expect(Math.abs(segSum - msg.total_length)).toBeLessThan(1e-6);
  });

  it("rejects malformed control frames", () => {
    expect(() => decodeControl("nope")).toThrow();
    expect(() => decodeControl(JSON.stringify({ type: "x" }))).toThrow();
    expect(() => decodeControl(JSON.stringify({ seq: 1 }))).toThrow();
  });
});

describe("data chunk stream", () => {
  it("reassembles every column bit-exactly", () => {
    const assembler = new ChunkAssembler(hello.columns);
    let lastSeq = 0;
    for (const frame of frames("data_chunks.bin")) {
      const { kind, payload } = splitFrame(frame);
      expect(kind).toBe(KIND_DATA_CHUNK);
      const chunk = decodeDataChunk(payload);
      expect(chunk.seq).toBeGreaterThan(lastSeq);
      lastSeq = chunk.seq;
      assembler.add(chunk);
    }
    expect(assembler.complete).toBe(true);
    for (let j = 0; j < expected.p; j++) {
      const col = assembler.float32(j);
      expect(col).toHaveLength(expected.n);
      for (let i = 0; i < 8; i++) {
        expect(col[i]).toBeCloseTo(expected.columns_first8[j][i], 12);
      }
    }
    const codes = assembler.uint16(expected.p);
    for (let i = 0; i < 16; i++) {
      expect(codes[i]).toBe(expected.cls_codes_first16[i]);
    }
    const score = assembler.float32(expected.p + 1);
    for (let i = 0; i < 8; i++) {
      expect(score[i]).toBeCloseTo(expected.score_first8[i], 12);
    }
  });
});

describe("basis frames", () => {
  it("decodes every keyframe basis exactly", () => {
    const all = [...frames("basis_frames.bin")];
    expect(all).toHaveLength(expected.bases.length);
    all.forEach((frame, i) => {
      const { kind, payload } = splitFrame(frame);
      expect(kind).toBe(KIND_BASIS);
      const { seq, t, basis } = decodeBasis(payload);
      expect(seq).toBe(100 + i);
      expect(t).toBeCloseTo(expected.bases[i].t, 15);
      expect(basis).toHaveLength(2 * expected.p);
      expected.bases[i].basis.forEach((v: number, j: number) => {
        expect(basis[j]).toBe(Math.fround(v));
      });
      // orthonormal within f32 tolerance
      const p = expected.p;
      let n0 = 0, n1 = 0, dot = 0;
      for (let j = 0; j < p; j++) {
        n0 += basis[j] * basis[j];
        n1 += basis[p + j] * basis[p + j];
        dot += basis[j] * basis[p + j];
      }
      expect(Math.abs(Math.sqrt(n0) - 1)).toBeLessThan(1e-6);
      expect(Math.abs(Math.sqrt(n1) - 1)).toBeLessThan(1e-6);
      expect(Math.abs(dot)).toBeLessThan(1e-6);
    });
  });

  it("is O(p): 8p payload bytes plus fixed headers", () => {
    const all = [...frames("basis_frames.bin")];
    for (const frame of all) {
      expect(frame.byteLength).toBe(16 + 16 + 8 * expected.p);
    }
  });
});

describe("selection frames", () => {
  it("unpacks the LSB-first bitmask", () => {
    const { kind, payload } = splitFrame(loadBuffer("selection.bin"));
    expect(kind).toBe(KIND_SELECTION);
    const { seq, mask } = decodeSelection(payload);
    expect(seq).toBe(7);
    expect(mask).toHaveLength(expected.n);
    let count = 0;
    for (const m of mask) count += m;
    expect(count).toBe(expected.selection_count);
    for (const idx of expected.selection_indices_first) {
      expect(mask[idx]).toBe(1);
    }
  });
});

describe("preview frames", () => {
  it("decodes all keyframe thumbnails", () => {
    const { kind, payload } = splitFrame(loadBuffer("previews.bin"));
    expect(kind).toBe(KIND_PREVIEWS);
    const { seq, nPoints, frames: views } = decodePreviews(payload);
    expect(seq).toBe(9);
    expect(nPoints).toBe(expected.n);
    expect(views).toHaveLength(expected.bases.length);
    for (let i = 0; i < 8; i++) {
      expect(views[0][i]).toBeCloseTo(expected.previews_frame0_first8[i], 12);
    }
  });
});

describe("frame validation", () => {
  it("rejects bad magic and short frames", () => {
    const good = loadBuffer("selection.bin");
    expect(() => splitFrame(good.slice(0, 8))).toThrow();
    const bad = new Uint8Array(good.slice(0));
    bad[0] = 0x58;
    expect(() => splitFrame(bad.buffer)).toThrow();
  });
});
