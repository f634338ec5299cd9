// Wire types and payload codecs for the teleop service protocol.
// Everything here is pure so the message layer can be tested headless.

export interface PoseMsg {
  x: number;
  y: number;
  theta: number;
}

export interface ImagePayload {
  w: number;
  h: number;
  encoding: string;
  data: string; // base64
}

export interface StateMessage {
  type: "state";
  t: number;
  pose: PoseMsg;
  omega_applied: number;
  collided: boolean;
  recording: boolean;
  color: ImagePayload;
  depth: ImagePayload;
}

export type ServerMessage =
  | StateMessage
  | { type: "ack"; [key: string]: unknown }
  | { type: "maps"; ids: string[] }
  | { type: "error"; reason: string };

export type ClientMessage =
  | { type: "cmd"; omega: number }
  | { type: "record"; on: boolean }
  | { type: "reset"; map_id: string }
  | { type: "list_maps" };

/** Validate an outbound message against the service schema. */
export function validateClientMessage(msg: unknown): msg is ClientMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  switch (m.type) {
    case "cmd":
      return typeof m.omega === "number" && Number.isFinite(m.omega) && Object.keys(m).length === 2;
    case "record":
      return typeof m.on === "boolean" && Object.keys(m).length === 2;
    case "reset":
      return typeof m.map_id === "string" && Object.keys(m).length === 2;
    case "list_maps":
      return Object.keys(m).length === 1;
    default:
      return false;
  }
}

export function parseServerMessage(text: string): ServerMessage | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof parsed !== "object" || parsed === null) return null;
  const m = parsed as Record<string, unknown>;
  if (m.type === "state" || m.type === "ack" || m.type === "maps" || m.type === "error") {
    return parsed as ServerMessage;
  }
  return null;
}

function base64ToBytes(data: string): Uint8Array {
  if (typeof atob === "function") {
    const binary = atob(data);
    const out = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(data, "base64"));
}

/** raw-rgb8-base64 -> RGBA pixels ready for ImageData. */
export function decodeColorToRgba(payload: ImagePayload): Uint8ClampedArray<ArrayBuffer> {
  const bytes = base64ToBytes(payload.data);
  const expected = payload.w * payload.h * 3;
  if (payload.encoding !== "raw-rgb8-base64" || bytes.length !== expected) {
    throw new Error(`bad color payload: ${payload.encoding} ${bytes.length}/${expected}`);
  }
  const rgba = new Uint8ClampedArray(payload.w * payload.h * 4);
  for (let p = 0; p < payload.w * payload.h; p++) {
    rgba[4 * p] = bytes[3 * p];
    rgba[4 * p + 1] = bytes[3 * p + 1];
    rgba[4 * p + 2] = bytes[3 * p + 2];
    rgba[4 * p + 3] = 255;
  }
  return rgba;
}

/** raw-f32le-base64 -> normalized depth values, row-major. */
export function decodeDepth(payload: ImagePayload): Float32Array {
  const bytes = base64ToBytes(payload.data);
  const expected = payload.w * payload.h * 4;
  if (payload.encoding !== "raw-f32le-base64" || bytes.length !== expected) {
    throw new Error(`bad depth payload: ${payload.encoding} ${bytes.length}/${expected}`);
  }
  return new Float32Array(bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.length));
}

/** Grayscale ramp: near (0) black, far (1) white. */
export function depthToRgba(depth: Float32Array): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(depth.length * 4);
  for (let i = 0; i < depth.length; i++) {
    const v = Math.max(0, Math.min(1, depth[i]));
    const gray = Math.round(v * 255);
    rgba[4 * i] = gray;
    rgba[4 * i + 1] = gray;
    rgba[4 * i + 2] = gray;
    rgba[4 * i + 3] = 255;
  }
  return rgba;
}
