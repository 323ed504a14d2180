// Session client: opens the WebSocket, assembles the dataset stream,
// and surfaces typed events. Sequence numbers increase per direction.

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
  encodeControl,
  splitFrame,
  type BasisFrame,
  type HelloMessage,
  type PreviewsFrame,
  type ServerControl,
} from "./protocol.js";
import { ViewModel, type LabelData } from "./viewmodel.js";

export interface SessionEvents {
  ready: (vm: ViewModel) => void;
  basis: (frame: BasisFrame) => void;
  selection: (mask: Uint8Array) => void;
  previews: (frame: PreviewsFrame) => void;
  state: (msg: ServerControl) => void;
  error: (code: string, message: string) => void;
}

export class SessionClient {
  private ws: WebSocket;
  private seq = 0;
  private hello: HelloMessage | null = null;
  private assembler: ChunkAssembler | null = null;
  private listeners: Partial<SessionEvents> = {};
  vm: ViewModel | null = null;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onmessage = (ev) => this.onMessage(ev.data);
  }

  on<K extends keyof SessionEvents>(event: K, handler: SessionEvents[K]): void {
    this.listeners[event] = handler;
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  send(msg: { type: string; [key: string]: unknown }): void {
    this.ws.send(encodeControl({ ...msg, seq: this.nextSeq() }));
  }

  setT(t: number, animate = false): void {
    this.send({ type: "set_t", t, animate });
  }

  setMode(mode: string): void {
    this.send({ type: "set_mode", mode });
  }

  drag(dim: number, direction: [number, number]): void {
    this.send({ type: "drag", dim, direction });
  }

  rotateResidual(angle: number): void {
    this.send({ type: "rotate_residual", angle });
  }

  play(speed?: number): void {
    this.send(speed === undefined ? { type: "play" } : { type: "play", speed });
  }

  pause(): void {
    this.send({ type: "pause" });
  }

  requestPreviews(thumbPoints = 2000, seed = 0): void {
    this.send({ type: "request_previews", thumb_points: thumbPoints, seed });
  }

  private onMessage(data: string | ArrayBuffer): void {
    if (typeof data === "string") {
      const msg = decodeControl(data);
      if (msg.type === "hello") {
        this.hello = msg as HelloMessage;
        this.assembler = new ChunkAssembler(this.hello.columns);
      } else if (msg.type === "error") {
        this.listeners.error?.((msg as { code: string }).code, (msg as { message: string }).message);
      } else {
        this.listeners.state?.(msg);
      }
      return;
    }
    const { kind, payload } = splitFrame(data);
    if (kind === KIND_DATA_CHUNK) {
      if (!this.assembler || !this.hello) return;
      this.assembler.add(decodeDataChunk(payload));
      if (this.assembler.complete && !this.vm) {
        const columns: Float32Array[] = [];
        for (let j = 0; j < this.hello.p; j++) columns.push(this.assembler.float32(j));
        const labels: LabelData[] = this.hello.labels.map((lab, i) => ({
          name: lab.name,
          kind: lab.kind,
          categories: lab.categories,
          ...(lab.kind === "categorical"
            ? { codes: this.assembler!.uint16(this.hello!.p + i) }
            : { values: this.assembler!.float32(this.hello!.p + i) }),
        }));
        this.vm = new ViewModel(this.hello, columns, labels);
        this.listeners.ready?.(this.vm);
      }
    } else if (kind === KIND_BASIS) {
      const frame = decodeBasis(payload);
      this.vm?.setBasis(frame.basis, frame.t);
      this.listeners.basis?.(frame);
    } else if (kind === KIND_SELECTION) {
      const { mask } = decodeSelection(payload);
      if (this.vm) this.vm.selection = mask;
      this.listeners.selection?.(mask);
    } else if (kind === KIND_PREVIEWS) {
      this.listeners.previews?.(decodePreviews(payload));
    }
  }
}
