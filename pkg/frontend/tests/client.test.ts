import { describe, expect, it } from "vitest";
import { TeleopClient } from "../src/client.js";
import { SocketLike } from "../src/client.js";

class FakeSocket implements SocketLike {
  readyState = 1;
  sent: string[] = [];
  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.readyState = 3;
  }
}

describe("TeleopClient", () => {
  it("never sends while disconnected", () => {
    const client = new TeleopClient();
    expect(client.send({ type: "list_maps" })).toBe(false);
    const socket = new FakeSocket();
    socket.readyState = 0; // connecting
    client.attach(socket);
    expect(client.send({ type: "list_maps" })).toBe(false);
    expect(socket.sent).toHaveLength(0);
  });

  it("scales steering by omega_max when emitting cmds", () => {
    const client = new TeleopClient(0.5);
    const socket = new FakeSocket();
    client.attach(socket);
    client.markOpen();
    client.steering.setKey("left", true);
    client.sampleSteering(0.25, 0); // ramp to +0.5 steering
    const last = JSON.parse(socket.sent.at(-1)!);
    expect(last).toEqual({ type: "cmd", omega: 0.25 });
  });

  it("respects the send policy while sampling", () => {
    const client = new TeleopClient(1.0);
    const socket = new FakeSocket();
    client.attach(socket);
    client.markOpen();
    // steady zero steering sampled every 50 ms for 1 s
    for (let now = 0; now <= 1000; now += 50) {
      client.sampleSteering(0.05, now);
    }
    const cmds = socket.sent.map((s) => JSON.parse(s));
    expect(cmds.every((c) => c.type === "cmd" && c.omega === 0)).toBe(true);
    expect(cmds).toHaveLength(11); // first sample plus one keepalive per 100 ms
  });

  it("drops malformed inbound frames without dispatching", () => {
    const client = new TeleopClient();
    const seen: unknown[] = [];
    client.onMessage = (m) => seen.push(m);
    client.handleIncoming("garbage");
    client.handleIncoming('{"type":"maps","ids":[]}');
    expect(seen).toHaveLength(1);
  });
});
