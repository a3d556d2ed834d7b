// Wire protocol types for the session server (newline-delimited JSON
// frames; see docs/protocol.md in the repository root).

export type Vec3 = [number, number, number];

export interface TargetPlane {
  point_mm: Vec3;
  normal: Vec3;
  displacement_mm: number;
}

export interface AnchorSiteState {
  label: string;
  position_mm: Vec3;
  implanted: boolean;
}

export interface DeploymentView {
  phase: string;
  depth_mm: number;
  rotation_rad: number;
  torque_reading_nmm: number;
}

export interface ContactView {
  in_contact: boolean;
  force_n: number;
  penetration_mm: number;
}

export interface ControllerView {
  mode: string;
  goal_index: number;
  goals_total: number;
  error_mm: number;
}

export interface StatePayload {
  tip_mm: Vec3;
  tip_sensed_mm: Vec3;
  tangent: Vec3;
  backbone_mm: Vec3[];
  pressures_kpa: [number, number, number];
  commanded_kpa: [number, number, number];
  target_plane: TargetPlane;
  anchor_sites: AnchorSiteState[];
  deployment: DeploymentView;
  contact: ContactView;
  controller: ControllerView;
  anchors_implanted: number;
}

export interface EventPayload {
  event: string;
  [key: string]: unknown;
}

export interface ServerFrame {
  kind: "state" | "event" | "error";
  sequence: number;
  sim_time: number;
  payload: StatePayload | EventPayload | { message: string };
}

export interface CommandFrame {
  kind: "command";
  action: string;
  sequence: number;
  [param: string]: unknown;
}

export class ProtocolError extends Error {}

export function parseFrame(line: string): ServerFrame {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new ProtocolError(`not JSON: ${line.slice(0, 80)}`);
  }
  const frame = doc as Partial<ServerFrame>;
  if (
    typeof frame !== "object" ||
    frame === null ||
    (frame.kind !== "state" && frame.kind !== "event" && frame.kind !== "error") ||
    typeof frame.sequence !== "number" ||
    typeof frame.sim_time !== "number" ||
    typeof frame.payload !== "object"
  ) {
    throw new ProtocolError(`malformed frame: ${line.slice(0, 80)}`);
  }
  return frame as ServerFrame;
}

export function isStateFrame(frame: ServerFrame): frame is ServerFrame & { payload: StatePayload } {
  return frame.kind === "state";
}

export function isEventFrame(frame: ServerFrame): frame is ServerFrame & { payload: EventPayload } {
  return frame.kind === "event";
}

export function encodeCommand(cmd: CommandFrame): string {
  return JSON.stringify(cmd);
}
