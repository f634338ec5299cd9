// Canvas helpers: frame blitting and the top-down pose trail.

import { ImagePayload, PoseMsg, decodeColorToRgba, decodeDepth, depthToRgba } from "./protocol.js";

export function drawColor(canvas: HTMLCanvasElement, payload: ImagePayload): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = payload.w;
  canvas.height = payload.h;
  ctx.putImageData(new ImageData(decodeColorToRgba(payload), payload.w, payload.h), 0, 0);
}

export function drawDepth(canvas: HTMLCanvasElement, payload: ImagePayload): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = payload.w;
  canvas.height = payload.h;
  const gray = depthToRgba(decodeDepth(payload));
  ctx.putImageData(new ImageData(gray, payload.w, payload.h), 0, 0);
}

export class TrailView {
  private poses: PoseMsg[] = [];

  constructor(readonly maxPoses = 2000) {}

  push(pose: PoseMsg): void {
    this.poses.push(pose);
    if (this.poses.length > this.maxPoses) this.poses.shift();
  }

  clear(): void {
    this.poses = [];
  }

  draw(canvas: HTMLCanvasElement): void {
    const ctx = canvas.getContext("2d");
    if (!ctx || this.poses.length === 0) return;
    const xs = this.poses.map((p) => p.x);
    const ys = this.poses.map((p) => p.y);
    const minX = Math.min(...xs) - 0.3;
    const maxX = Math.max(...xs) + 0.3;
    const minY = Math.min(...ys) - 0.3;
    const maxY = Math.max(...ys) + 0.3;
    const scale = Math.min(canvas.width / (maxX - minX), canvas.height / (maxY - minY));
    const toPx = (p: PoseMsg): [number, number] => [
      (p.x - minX) * scale,
      canvas.height - (p.y - minY) * scale,
    ];
    ctx.fillStyle = "#181818";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#4cc9f0";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    this.poses.forEach((pose, i) => {
      const [px, py] = toPx(pose);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
    const head = this.poses[this.poses.length - 1];
    const [hx, hy] = toPx(head);
    ctx.fillStyle = "#f72585";
    ctx.beginPath();
    ctx.arc(hx, hy, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#f72585";
    ctx.beginPath();
    ctx.moveTo(hx, hy);
    ctx.lineTo(hx + 10 * Math.cos(head.theta), hy - 10 * Math.sin(head.theta));
    ctx.stroke();
  }
}
