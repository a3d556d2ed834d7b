// Cockpit session client: keeps the latest server state, gates and logs
// outgoing commands, and tracks staleness.  The client never simulates
// physics; everything rendered comes from state messages.

import {
  CommandFrame,
  EventPayload,
  ProtocolError,
  ServerFrame,
  StatePayload,
  encodeCommand,
  isEventFrame,
  isStateFrame,
  parseFrame,
} from "./protocol.js";
import { Transport } from "./transport.js";

export const STALE_AFTER_MS = 500;
export const ROTATE_MIN_INTERVAL_MS = 100; // rotate_driver stream capped at 10 Hz

export type Mode = "manual" | "tracing" | "deploying";

export interface CommandLogEntry {
  sequence: number;
  action: string;
  params: Record<string, unknown>;
  sentAtMs: number;
  acknowledged: boolean;
}

export interface AnchorErrorEntry {
  anchorIndex: number;
  site: string;
  lateralErrorMm: number;
  depthMm: number;
  releaseTorqueNmm: number;
}

export interface ViewState {
  connection: "connecting" | "connected" | "closed";
  latest: StatePayload | null;
  lastStateAtMs: number;
  lastServerSequence: number;
  mode: Mode;
  selectedSite: string;
  awaitingAck: boolean;
  commandLog: CommandLogEntry[];
  events: EventPayload[];
  errors: string[];
  anchorErrors: AnchorErrorEntry[];
}

const ROTATABLE_PHASES = new Set(["coupled-to-robot", "inserting", "head-contact"]);

export class CockpitClient {
  readonly view: ViewState;
  private transport: Transport;
  private now: () => number;
  private seq = 0;
  private pendingRotation = 0;
  private lastRotateSentMs = -Infinity;
  private listeners: Array<() => void> = [];

  constructor(transport: Transport, now: () => number = () => Date.now()) {
    this.transport = transport;
    this.now = now;
    this.view = {
      connection: "connecting",
      latest: null,
      lastStateAtMs: now(),
      lastServerSequence: 0,
      mode: "manual",
      selectedSite: "",
      awaitingAck: false,
      commandLog: [],
      events: [],
      errors: [],
      anchorErrors: [],
    };
    transport.onMessage((line) => this.handleLine(line));
    transport.onClose(() => {
      this.view.connection = "closed";
      this.notify();
    });
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const l of this.listeners) l();
  }

  private handleLine(line: string): void {
    let frame: ServerFrame;
    try {
      frame = parseFrame(line);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.view.errors.push(err.message);
        this.notify();
        return;
      }
      throw err;
    }
    if (frame.sequence <= this.view.lastServerSequence) {
      this.view.errors.push(`sequence regression: ${frame.sequence}`);
    }
    this.view.lastServerSequence = frame.sequence;
    this.view.connection = "connected";
    // any server frame acknowledges the in-flight command
    this.view.awaitingAck = false;

    if (isStateFrame(frame)) {
      this.view.latest = frame.payload;
      this.view.lastStateAtMs = this.now();
      this.view.mode = this.deriveMode(frame.payload);
    } else if (isEventFrame(frame)) {
      const ev = frame.payload;
      this.view.events.push(ev);
      const seq = ev["client_sequence"];
      if (ev.event === "command-accepted" && typeof seq === "number") {
        const entry = this.view.commandLog.find((c) => c.sequence === seq);
        if (entry) entry.acknowledged = true;
      }
      if (ev.event === "anchor-released") {
        // exact passthrough of the server-measured error; rounding is
        // applied only at display time
        this.view.anchorErrors.push({
          anchorIndex: Number(ev["anchor_index"]),
          site: String(ev["site"] ?? ""),
          lateralErrorMm: Number(ev["lateral_error_mm"]),
          depthMm: Number(ev["depth_mm"]),
          releaseTorqueNmm: Number(ev["release_torque_nmm"]),
        });
      }
    } else {
      const message = (frame.payload as { message?: string }).message ?? "server error";
      this.view.errors.push(message);
    }
    this.notify();
  }

  private deriveMode(state: StatePayload): Mode {
    if (state.controller.mode === "tracing") return "tracing";
    if (state.controller.mode === "deploying" || ROTATABLE_PHASES.has(state.deployment.phase)) {
      return "deploying";
    }
    return "manual";
  }

  isStale(): boolean {
    if (this.view.connection === "closed") return true;
    return this.now() - this.view.lastStateAtMs > STALE_AFTER_MS;
  }

  // ------------------------------------------------------------- commands

  /** Client-side legality of an action in the current mode/phase. */
  canSend(action: string): boolean {
    if (this.view.connection === "closed") return false;
    const mode = this.view.mode;
    const phase = this.view.latest?.deployment.phase ?? "unloaded";
    switch (action) {
      case "jog":
        return mode !== "tracing";
      case "engage_path":
        return mode !== "tracing";
      case "rotate_driver":
        return mode !== "tracing" && ROTATABLE_PHASES.has(phase);
      case "load_anchor":
        return phase === "unloaded" || phase === "released";
      case "couple":
        return phase === "loaded";
      case "pause":
      case "manual_override":
      case "release_check":
      case "reset":
      case "stop":
        return true;
      default:
        return false;
    }
  }

  /** Emit exactly one well-formed command frame; returns its sequence. */
  send(action: string, params: Record<string, unknown> = {}): number {
    if (!this.canSend(action)) {
      throw new Error(`action ${action} not legal in mode ${this.view.mode}`);
    }
    this.seq += 1;
    const frame: CommandFrame = { kind: "command", action, sequence: this.seq, ...params };
    this.transport.send(encodeCommand(frame));
    this.view.commandLog.push({
      sequence: this.seq,
      action,
      params,
      sentAtMs: this.now(),
      acknowledged: false,
    });
    this.view.awaitingAck = true;
    this.notify();
    return this.seq;
  }

  jog(chamber: 1 | 2 | 3, dpKpa: number): number {
    return this.send("jog", { chamber, dp_kpa: dpKpa });
  }

  engagePath(pathId: string, site?: string): number {
    if (site) this.view.selectedSite = site;
    return this.send("engage_path", site ? { path_id: pathId, site } : { path_id: pathId });
  }

  /**
   * Accumulate driver rotation from a continuous control and stream
   * rotate_driver commands at no more than 10 Hz.
   */
  rotateBy(dthetaRad: number): number | null {
    this.pendingRotation += dthetaRad;
    return this.flushRotation();
  }

  flushRotation(): number | null {
    if (this.pendingRotation <= 0) return null;
    if (!this.canSend("rotate_driver")) return null;
    if (this.now() - this.lastRotateSentMs < ROTATE_MIN_INTERVAL_MS) return null;
    const dtheta = this.pendingRotation;
    this.pendingRotation = 0;
    this.lastRotateSentMs = this.now();
    return this.send("rotate_driver", { dtheta_rad: dtheta });
  }

  close(): void {
    this.transport.close();
  }
}
