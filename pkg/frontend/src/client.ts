// Connection wrapper: owns the WebSocket, validates every outbound message,
// and refuses to send while disconnected. Steering is sampled by the caller
// on a timer; this class only enforces the send policy.

import { ClientMessage, ServerMessage, parseServerMessage, validateClientMessage } from "./protocol.js";
import { CommandScheduler, SteeringRamp } from "./steering.js";

export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
}

const OPEN = 1;

export class TeleopClient {
  readonly steering: SteeringRamp;
  readonly scheduler: CommandScheduler;
  omegaMax: number;
  connected = false;
  private socket: SocketLike | null = null;
  onMessage: (msg: ServerMessage) => void = () => {};
  onConnectionChange: (connected: boolean) => void = () => {};

  constructor(omegaMax = 1.0, rampRate = 2.0) {
    this.omegaMax = omegaMax;
    this.steering = new SteeringRamp(rampRate);
    this.scheduler = new CommandScheduler();
  }

  attach(socket: SocketLike): void {
    this.socket = socket;
    this.connected = socket.readyState === OPEN;
    this.scheduler.reset();
    this.onConnectionChange(this.connected);
  }

  markOpen(): void {
    this.connected = true;
    this.scheduler.reset();
    this.onConnectionChange(true);
  }

  markClosed(): void {
    this.connected = false;
    this.onConnectionChange(false);
  }

  handleIncoming(text: string): void {
    const msg = parseServerMessage(text);
    if (msg === null) {
      console.warn("skipping malformed server message");
      return;
    }
    this.onMessage(msg);
  }

  send(message: ClientMessage): boolean {
    if (!this.connected || this.socket === null || this.socket.readyState !== OPEN) {
      return false;
    }
    if (!validateClientMessage(message)) {
      throw new Error(`outbound message fails schema: ${JSON.stringify(message)}`);
    }
    this.socket.send(JSON.stringify(message));
    return true;
  }

  /** Sample the steering ramp; emit a cmd when the policy says so. */
  sampleSteering(dtSeconds: number, nowMs: number): number {
    const value = this.steering.advance(dtSeconds);
    if (this.connected && this.scheduler.shouldSend(value, nowMs)) {
      if (this.send({ type: "cmd", omega: value * this.omegaMax })) {
        this.scheduler.markSent(value, nowMs);
      }
    }
    return value;
  }

  toggleRecord(on: boolean): void {
    this.send({ type: "record", on });
  }

  requestMaps(): void {
    this.send({ type: "list_maps" });
  }

  resetTo(mapId: string): void {
    this.send({ type: "reset", map_id: mapId });
  }
}
