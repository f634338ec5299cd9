// Keyboard steering ramp: held arrows slew the value toward +/-1 at a fixed
// rate and release slews it back to 0, so commands stay smooth like a human
// demonstrator's. Left arrow is positive (counter-clockwise), right negative.

export class SteeringRamp {
  value = 0;
  private leftHeld = false;
  private rightHeld = false;

  constructor(readonly ratePerSecond = 2.0) {}

  setKey(key: "left" | "right", held: boolean): void {
    if (key === "left") this.leftHeld = held;
    else this.rightHeld = held;
  }

  target(): number {
    return (this.leftHeld ? 1 : 0) + (this.rightHeld ? -1 : 0);
  }

  /** Advance the ramp by dt seconds; returns the new steering value. */
  advance(dtSeconds: number): number {
    const goal = this.target();
    const maxStep = this.ratePerSecond * Math.max(0, dtSeconds);
    const delta = goal - this.value;
    if (Math.abs(delta) <= maxStep) {
      this.value = goal;
    } else {
      this.value += Math.sign(delta) * maxStep;
    }
    return this.value;
  }
}

// Send policy: a cmd goes out when the steering moved noticeably or the
// keepalive interval elapsed; never more than one reason is needed.
export class CommandScheduler {
  private lastSentValue: number | null = null;
  private lastSentAtMs = -Infinity;

  constructor(readonly minChange = 0.01, readonly keepaliveMs = 100) {}

  shouldSend(value: number, nowMs: number): boolean {
    if (this.lastSentValue === null) return true;
    if (Math.abs(value - this.lastSentValue) >= this.minChange) return true;
    return nowMs - this.lastSentAtMs >= this.keepaliveMs;
  }

  markSent(value: number, nowMs: number): void {
    this.lastSentValue = value;
    this.lastSentAtMs = nowMs;
  }

  reset(): void {
    this.lastSentValue = null;
    this.lastSentAtMs = -Infinity;
  }
}
