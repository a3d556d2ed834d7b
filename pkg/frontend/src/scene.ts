// Pure scene construction: an orbit camera with orthographic projection
// turns the latest state payload into 2D draw primitives. No DOM here,
// so the geometry is unit-testable.

import { StatePayload, Vec3 } from "./protocol.js";

export interface Camera {
  yawRad: number;
  pitchRad: number;
  zoom: number; // pixels per mm
  target: Vec3;
}

// side perspective preset matching the operator's bench view
export const OPERATOR_VIEW: Camera = {
  yawRad: -Math.PI / 2,
  pitchRad: 0.26,
  zoom: 5.0,
  target: [0, 0, 35],
};

export interface Stroke {
  kind: "polyline";
  points: Array<[number, number]>;
  color: string;
  width: number;
  depth: number;
}

export interface Dot {
  kind: "dot";
  at: [number, number];
  radius: number;
  color: string;
  fill: boolean;
  depth: number;
  label?: string;
}

export type Primitive = Stroke | Dot;

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

/** Camera basis: right/up/forward unit vectors for yaw (about world z)
 * and pitch (elevation). */
export function cameraBasis(cam: Camera): { right: Vec3; up: Vec3; forward: Vec3 } {
  const cy = Math.cos(cam.yawRad), sy = Math.sin(cam.yawRad);
  const cp = Math.cos(cam.pitchRad), sp = Math.sin(cam.pitchRad);
  const forward: Vec3 = [cp * cy, cp * sy, -sp]; // looking direction
  const right: Vec3 = [-sy, cy, 0];
  const up: Vec3 = [sp * cy, sp * sy, cp];
  return { right, up, forward };
}

export function project(point: Vec3, cam: Camera, widthPx: number, heightPx: number): [number, number, number] {
  const { right, up, forward } = cameraBasis(cam);
  const rel = sub(point, cam.target);
  const x = rel[0] * right[0] + rel[1] * right[1] + rel[2] * right[2];
  const y = rel[0] * up[0] + rel[1] * up[1] + rel[2] * up[2];
  const depth = rel[0] * forward[0] + rel[1] * forward[1] + rel[2] * forward[2];
  return [widthPx / 2 + cam.zoom * x, heightPx / 2 - cam.zoom * y, depth];
}

function circlePoints(center: Vec3, normal: Vec3, radius: number, n = 48): Vec3[] {
  // orthonormal basis in the plane
  const seed: Vec3 = Math.abs(normal[0]) < 0.9 ? [1, 0, 0] : [0, 1, 0];
  const d = seed[0] * normal[0] + seed[1] * normal[1] + seed[2] * normal[2];
  let e1: Vec3 = [seed[0] - d * normal[0], seed[1] - d * normal[1], seed[2] - d * normal[2]];
  const len = Math.hypot(...e1);
  e1 = [e1[0] / len, e1[1] / len, e1[2] / len];
  const e2: Vec3 = [
    normal[1] * e1[2] - normal[2] * e1[1],
    normal[2] * e1[0] - normal[0] * e1[2],
    normal[0] * e1[1] - normal[1] * e1[0],
  ];
  const pts: Vec3[] = [];
  for (let i = 0; i <= n; i++) {
    const a = (2 * Math.PI * i) / n;
    pts.push([
      center[0] + radius * (Math.cos(a) * e1[0] + Math.sin(a) * e2[0]),
      center[1] + radius * (Math.cos(a) * e1[1] + Math.sin(a) * e2[1]),
      center[2] + radius * (Math.cos(a) * e1[2] + Math.sin(a) * e2[2]),
    ]);
  }
  return pts;
}

const SURFACE_RADIUS_MM = 40;
const STANDOFF_MM = 10;

/** Build the draw list for one state snapshot (painter-sorted far to near). */
export function buildScene(state: StatePayload, cam: Camera, w: number, h: number): Primitive[] {
  const prims: Primitive[] = [];
  const proj = (p: Vec3) => project(p, cam, w, h);

  // base plate + axis
  const basePts = circlePoints([0, 0, 0], [0, 0, 1], 12).map(proj);
  prims.push({
    kind: "polyline",
    points: basePts.map(([x, y]) => [x, y]),
    color: "#555c66",
    width: 1,
    depth: avgDepth(basePts),
  });

  // moving target surface
  const plane = state.target_plane;
  const surf = circlePoints(plane.point_mm, plane.normal, SURFACE_RADIUS_MM).map(proj);
  prims.push({
    kind: "polyline",
    points: surf.map(([x, y]) => [x, y]),
    color: "#b0743c",
    width: 2,
    depth: avgDepth(surf),
  });

  // anchor sites and their projected standoff targets
  for (const site of state.anchor_sites) {
    const [sx, sy, sd] = proj(site.position_mm);
    prims.push({
      kind: "dot",
      at: [sx, sy],
      radius: site.implanted ? 6 : 4,
      color: site.implanted ? "#3fbf6f" : "#e0b345",
      fill: site.implanted,
      depth: sd,
      label: site.label,
    });
    const standoff: Vec3 = [
      site.position_mm[0] + plane.displacement_mm * -plane.normal[0] + STANDOFF_MM * plane.normal[0],
      site.position_mm[1] + plane.displacement_mm * -plane.normal[1] + STANDOFF_MM * plane.normal[1],
      site.position_mm[2] + plane.displacement_mm * -plane.normal[2] + STANDOFF_MM * plane.normal[2],
    ];
    const [tx, ty, td] = proj(standoff);
    prims.push({ kind: "dot", at: [tx, ty], radius: 3, color: "#5aa4d6", fill: false, depth: td });
  }

  // robot backbone and tip
  const backbone = state.backbone_mm.map(proj);
  prims.push({
    kind: "polyline",
    points: backbone.map(([x, y]) => [x, y]),
    color: "#7fd4f0",
    width: 4,
    depth: avgDepth(backbone),
  });
  const [tipX, tipY, tipD] = proj(state.tip_mm);
  prims.push({
    kind: "dot",
    at: [tipX, tipY],
    radius: 5,
    color: state.contact.in_contact ? "#ff5f56" : "#ffffff",
    fill: true,
    depth: tipD,
  });

  prims.sort((a, b) => b.depth - a.depth);
  return prims;
}

function avgDepth(pts: Array<[number, number, number]>): number {
  return pts.reduce((acc, p) => acc + p[2], 0) / Math.max(1, pts.length);
}
