// Browser entry point: connects to the teleop service, renders the live
// color/depth frames and the top-down trail, and maps the keyboard to
// steering commands. Server URL comes from the ?server= query parameter.

import { TeleopClient } from "./client.js";
import { StateMessage } from "./protocol.js";
import { TrailView, drawColor, drawDepth } from "./render.js";

const SAMPLE_INTERVAL_MS = 50;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const server =
    params.get("server") ?? `ws://${window.location.host || "127.0.0.1:8731"}/ws`;
  const omegaMax = parseFloat(params.get("omega_max") ?? "1.0");
  const rampRate = parseFloat(params.get("ramp_rate") ?? "2.0");

  const colorCanvas = el<HTMLCanvasElement>("color");
  const depthCanvas = el<HTMLCanvasElement>("depth");
  const trailCanvas = el<HTMLCanvasElement>("trail");
  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLDivElement>("status");
  const mapSelect = el<HTMLSelectElement>("maps");

  const client = new TeleopClient(omegaMax, rampRate);
  const trail = new TrailView();
  let lastState: StateMessage | null = null;

  client.onConnectionChange = (connected) => {
    banner.textContent = connected ? "" : `disconnected from ${server}`;
    banner.style.display = connected ? "none" : "block";
  };

  client.onMessage = (msg) => {
    if (msg.type === "state") {
      lastState = msg;
      try {
        drawColor(colorCanvas, msg.color);
        drawDepth(depthCanvas, msg.depth);
      } catch (err) {
        console.warn("frame skipped:", err);
        return;
      }
      trail.push(msg.pose);
      trail.draw(trailCanvas);
      status.textContent =
        `t=${msg.t.toFixed(1)}s  ` +
        `pose=(${msg.pose.x.toFixed(2)}, ${msg.pose.y.toFixed(2)}, ${msg.pose.theta.toFixed(2)})  ` +
        `cmd=${msg.omega_applied.toFixed(2)} rad/s  ` +
        (msg.recording ? "REC  " : "") +
        (msg.collided ? "COLLIDED (press M to pick a map and reset)" : "");
    } else if (msg.type === "maps") {
      mapSelect.innerHTML = "";
      for (const id of msg.ids) {
        const option = document.createElement("option");
        option.value = id;
        option.textContent = id;
        mapSelect.appendChild(option);
      }
    } else if (msg.type === "error") {
      console.warn("server error:", msg.reason);
    }
  };

  const socket = new WebSocket(server);
  client.attach(socket);
  socket.onopen = () => {
    client.markOpen();
    client.requestMaps();
  };
  socket.onclose = () => client.markClosed();
  socket.onerror = () => client.markClosed();
  socket.onmessage = (event) => client.handleIncoming(String(event.data));

  window.addEventListener("keydown", (event) => {
    if (event.repeat) return;
    if (event.key === "ArrowLeft") client.steering.setKey("left", true);
    else if (event.key === "ArrowRight") client.steering.setKey("right", true);
    else if (event.key === "r" || event.key === "R") {
      client.toggleRecord(!(lastState?.recording ?? false));
    } else if (event.key === "m" || event.key === "M") {
      client.requestMaps();
      mapSelect.focus();
    }
  });
  window.addEventListener("keyup", (event) => {
    if (event.key === "ArrowLeft") client.steering.setKey("left", false);
    else if (event.key === "ArrowRight") client.steering.setKey("right", false);
  });
  mapSelect.addEventListener("change", () => {
    client.resetTo(mapSelect.value);
    trail.clear();
    (document.activeElement as HTMLElement | null)?.blur();
  });

  let lastSample = performance.now();
  window.setInterval(() => {
    const now = performance.now();
    client.sampleSteering((now - lastSample) / 1000, now);
    lastSample = now;
  }, SAMPLE_INTERVAL_MS);
}

main();
