import { describe, expect, it } from "vitest";
import {
  decodeColorToRgba,
  decodeDepth,
  depthToRgba,
  parseServerMessage,
  validateClientMessage,
} from "../src/protocol.js";

function b64(bytes: Uint8Array): string {
  return Buffer.from(bytes).toString("base64");
}

describe("client message schema", () => {
  it("accepts exactly the documented shapes", () => {
    expect(validateClientMessage({ type: "cmd", omega: 0.3 })).toBe(true);
    expect(validateClientMessage({ type: "record", on: true })).toBe(true);
    expect(validateClientMessage({ type: "reset", map_id: "known_straight" })).toBe(true);
    expect(validateClientMessage({ type: "list_maps" })).toBe(true);
  });

  it("rejects off-schema messages", () => {
    expect(validateClientMessage({ type: "cmd", omega: "fast" })).toBe(false);
    expect(validateClientMessage({ type: "cmd", omega: NaN })).toBe(false);
    expect(validateClientMessage({ type: "cmd", omega: 1, extra: 2 })).toBe(false);
    expect(validateClientMessage({ type: "warp" })).toBe(false);
    expect(validateClientMessage(null)).toBe(false);
  });
});

describe("server message parsing", () => {
  it("passes known types through and rejects junk", () => {
    expect(parseServerMessage('{"type":"maps","ids":["a"]}')).toEqual({
      type: "maps",
      ids: ["a"],
    });
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage('{"type":"mystery"}')).toBeNull();
  });
});

describe("payload codecs", () => {
  it("decodes rgb8 into opaque RGBA", () => {
    const raw = new Uint8Array([10, 20, 30, 200, 210, 220]);
    const rgba = decodeColorToRgba({
      w: 2,
      h: 1,
      encoding: "raw-rgb8-base64",
      data: b64(raw),
    });
    expect(Array.from(rgba)).toEqual([10, 20, 30, 255, 200, 210, 220, 255]);
  });

  it("decodes little-endian f32 depth", () => {
    const values = new Float32Array([0.0, 0.5, 1.0]);
    const depth = decodeDepth({
      w: 3,
      h: 1,
      encoding: "raw-f32le-base64",
      data: b64(new Uint8Array(values.buffer)),
    });
    expect(Array.from(depth)).toEqual([0.0, 0.5, 1.0]);
  });

  it("rejects payloads with the wrong byte count", () => {
    expect(() =>
      decodeDepth({ w: 4, h: 1, encoding: "raw-f32le-base64", data: b64(new Uint8Array(8)) })
    ).toThrow();
  });

  it("renders far depth white on the grayscale ramp", () => {
    const rgba = depthToRgba(new Float32Array([1.0, 0.0]));
    expect(Array.from(rgba.slice(0, 4))).toEqual([255, 255, 255, 255]);
    expect(Array.from(rgba.slice(4, 8))).toEqual([0, 0, 0, 255]);
  });
});
