// Live round-trip against a real session server: one full implantation
// driven through the cockpit client, then the server's command telemetry
// is matched row-for-row against the client-side log, and the stale
// banner condition is checked after killing the server.

import { spawn, ChildProcess } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { CockpitClient } from "../src/client.js";
import { EventPayload, StatePayload } from "../src/protocol.js";
import { TcpTransport } from "./tcp.js";

const PORT = 18000 + Math.floor(Math.random() * 10_000);
const CONTACT_STIFFNESS = 0.1; // N/mm, default config
const PRESS_REST_PEN_MM = 5.5;

let server: ChildProcess;
let outDir: string;
let client: CockpitClient;

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function waitFor(pred: () => boolean, timeoutMs: number, what: string): Promise<void> {
  const t0 = Date.now();
  while (Date.now() - t0 < timeoutMs) {
    if (pred()) return;
    await sleep(20);
  }
  throw new Error(`timeout waiting for ${what}`);
}

function sawEvent(name: string, since = 0): boolean {
  return client.view.events.slice(since).some((e: EventPayload) => e.event === name);
}

beforeAll(async () => {
  outDir = fs.mkdtempSync(path.join(os.tmpdir(), "cockpit-session-"));
  server = spawn(
    "coilpilot",
    ["serve", "--port", String(PORT), "--seed", "31", "--out", outDir, "--realtime-factor", "8"],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  // wait for the port to accept
  let transport: TcpTransport | null = null;
  for (let i = 0; i < 100 && !transport; i++) {
    try {
      transport = await TcpTransport.connect("127.0.0.1", PORT, 500);
    } catch {
      await sleep(100);
    }
  }
  if (!transport) throw new Error("server never came up");
  client = new CockpitClient(transport);
}, 30_000);

afterAll(() => {
  try {
    client?.close();
  } catch {
    /* already closed */
  }
  if (server && server.exitCode === null) server.kill("SIGKILL");
});

describe("cockpit round-trip against a live server", () => {
  it("drives one full implantation and matches the server command log", async () => {
    await waitFor(() => client.view.latest !== null, 15_000, "first state frame");

    client.send("load_anchor");
    await waitFor(() => client.view.latest?.deployment.phase === "loaded", 15_000, "loaded");
    client.send("couple");
    await waitFor(() => client.view.latest?.deployment.phase === "coupled-to-robot", 15_000, "coupled");

    const eventsBefore = client.view.events.length;
    client.engagePath("circle24", "site-1");
    await waitFor(() => sawEvent("path-complete", eventsBefore), 60_000, "path-complete");
    expect(client.view.mode).not.toBe("tracing");

    // manual contact: jog along the press direction until the rest-pose
    // penetration estimate clears the puncture margin
    const pressDone = () => {
      const s = client.view.latest as StatePayload;
      return s.contact.force_n / CONTACT_STIFFNESS - s.target_plane.displacement_mm >= PRESS_REST_PEN_MM;
    };
    const t0 = Date.now();
    while (!pressDone() && Date.now() - t0 < 90_000) {
      client.jog(1, 0.35);
      client.jog(2, 1.3);
      client.jog(3, 1.3);
      await sleep(30);
    }
    expect(pressDone()).toBe(true);
    expect(client.view.latest?.contact.in_contact).toBe(true);

    // rotate the driver (rate-limited stream) until self-release
    const t1 = Date.now();
    while (!sawEvent("anchor-released") && Date.now() - t1 < 90_000) {
      client.rotateBy(0.5);
      await sleep(25);
    }
    expect(sawEvent("anchor-released")).toBe(true);
    const released = client.view.anchorErrors[0];
    expect(released.site).toBe("site-1");
    expect(released.depthMm).toBeCloseTo(5.0, 9);
    expect(released.releaseTorqueNmm).toBeCloseTo(1.23, 9);

    client.send("release_check");
    await waitFor(() => sawEvent("release-status"), 15_000, "release-status");

    // end the session; the server writes its telemetry on disconnect
    client.send("stop");
    await waitFor(() => client.view.connection === "closed" || server.exitCode !== null, 30_000, "session end");
    await waitFor(() => fs.existsSync(path.join(outDir, "commands.csv")), 30_000, "telemetry files");
    await waitFor(() => server.exitCode !== null, 30_000, "server exit");

    // the server telemetry command sequence must match the client log
    const lines = fs
      .readFileSync(path.join(outDir, "commands.csv"), "utf-8")
      .trim()
      .split("\n")
      .slice(1);
    const serverCmds = lines.map((line) => {
      const [, seq, action] = line.split(",");
      return { sequence: Number(seq), action };
    });
    const clientCmds = client.view.commandLog.map((c) => ({ sequence: c.sequence, action: c.action }));
    expect(serverCmds).toEqual(clientCmds);

    // and the error panel mirrors the summary values exactly
    const summary = JSON.parse(fs.readFileSync(path.join(outDir, "summary.json"), "utf-8"));
    expect(summary.anchors_released).toBe(1);
    expect(released.lateralErrorMm).toBe(summary.mean_lateral_error_mm);
  }, 240_000);
});

describe("stale banner after server kill", () => {
  it("reports stale within 1 s of killing the server", async () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "cockpit-stale-"));
    const port = PORT + 1;
    const proc = spawn("coilpilot", ["serve", "--port", String(port), "--seed", "7"], {
      stdio: ["ignore", "ignore", "ignore"],
    });
    let transport: TcpTransport | null = null;
    for (let i = 0; i < 100 && !transport; i++) {
      try {
        transport = await TcpTransport.connect("127.0.0.1", port, 500);
      } catch {
        await sleep(100);
      }
    }
    if (!transport) throw new Error("server never came up");
    const c = new CockpitClient(transport);
    await waitFor(() => c.view.latest !== null, 15_000, "first state");
    expect(c.isStale()).toBe(false);

    proc.kill("SIGKILL");
    const killedAt = Date.now();
    await waitFor(() => c.isStale(), 1_000, "stale flag");
    expect(Date.now() - killedAt).toBeLessThanOrEqual(1_000);
    c.close();
    fs.rmSync(dir, { recursive: true, force: true });
  }, 60_000);
});
