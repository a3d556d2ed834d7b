import { describe, expect, it } from "vitest";
import { StatePayload } from "../src/protocol.js";
import { Camera, OPERATOR_VIEW, buildScene, cameraBasis, project } from "../src/scene.js";

const CAM: Camera = { yawRad: 0.4, pitchRad: 0.3, zoom: 4, target: [0, 0, 30] };

function state(): StatePayload {
  return {
    tip_mm: [10, 0, 40],
    tip_sensed_mm: [10, 0, 40],
    tangent: [0, 0, 1],
    backbone_mm: [[0, 0, 0], [5, 0, 20], [10, 0, 40]],
    pressures_kpa: [30, 30, 30],
    commanded_kpa: [30, 30, 30],
    target_plane: { point_mm: [0, 0, 48], normal: [0, 0, -1], displacement_mm: 2 },
    anchor_sites: [
      { label: "site-1", position_mm: [24, 0, 48], implanted: false },
      { label: "site-2", position_mm: [-12, -20.78, 48], implanted: true },
    ],
    deployment: { phase: "unloaded", depth_mm: 0, rotation_rad: 0, torque_reading_nmm: 0 },
    contact: { in_contact: false, force_n: 0, penetration_mm: 0 },
    controller: { mode: "manual", goal_index: 0, goals_total: 0, error_mm: 0 },
    anchors_implanted: 1,
  };
}

describe("camera", () => {
  it("basis vectors are orthonormal", () => {
    const { right, up, forward } = cameraBasis(CAM);
    const dot = (a: number[], b: number[]) => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    expect(dot(right, up)).toBeCloseTo(0, 12);
    expect(dot(right, forward)).toBeCloseTo(0, 12);
    expect(dot(up, forward)).toBeCloseTo(0, 12);
    for (const v of [right, up, forward]) expect(Math.hypot(...v)).toBeCloseTo(1, 12);
  });

  it("projects the camera target to the screen center", () => {
    const [x, y] = project(CAM.target, CAM, 800, 600);
    expect(x).toBeCloseTo(400, 9);
    expect(y).toBeCloseTo(300, 9);
  });

  it("zoom scales screen distances linearly", () => {
    const p: [number, number, number] = [10, 5, 35];
    const [x1, y1] = project(p, CAM, 800, 600);
    const [x2, y2] = project(p, { ...CAM, zoom: 8 }, 800, 600);
    expect(x2 - 400).toBeCloseTo(2 * (x1 - 400), 9);
    expect(y2 - 300).toBeCloseTo(2 * (y1 - 300), 9);
  });

  it("preserves world distances in screen space up to zoom (orthographic)", () => {
    const a: [number, number, number] = [3, -2, 31];
    const b: [number, number, number] = [-4, 6, 44];
    const pa = project(a, CAM, 800, 600);
    const pb = project(b, CAM, 800, 600);
    const screen = Math.hypot(pb[0] - pa[0], pb[1] - pa[1]);
    const world = Math.hypot(b[0] - a[0], b[1] - a[1], b[2] - a[2]);
    expect(screen).toBeLessThanOrEqual(CAM.zoom * world + 1e-9);
  });
});

describe("buildScene", () => {
  it("draws backbone, tip, surface, sites and standoff targets", () => {
    const prims = buildScene(state(), OPERATOR_VIEW, 800, 600);
    const polylines = prims.filter((p) => p.kind === "polyline");
    const dots = prims.filter((p) => p.kind === "dot");
    expect(polylines.length).toBeGreaterThanOrEqual(3); // base, surface, backbone
    // tip + 2 sites + 2 standoff markers
    expect(dots.length).toBe(5);
    const labels = dots.map((d) => (d.kind === "dot" ? d.label : undefined)).filter(Boolean);
    expect(labels).toContain("site-1");
  });

  it("marks implanted sites as filled", () => {
    const prims = buildScene(state(), OPERATOR_VIEW, 800, 600);
    const site2 = prims.find((p) => p.kind === "dot" && p.label === "site-2");
    expect(site2 && site2.kind === "dot" && site2.fill).toBe(true);
  });

  it("painter order is far to near", () => {
    const prims = buildScene(state(), OPERATOR_VIEW, 800, 600);
    const depths = prims.map((p) => p.depth);
    for (let i = 1; i < depths.length; i++) expect(depths[i]).toBeLessThanOrEqual(depths[i - 1] + 1e-12);
  });

  it("straight robot renders a vertical backbone in the operator view", () => {
    const s = state();
    s.backbone_mm = [[0, 0, 0], [0, 0, 20], [0, 0, 40]];
    const prims = buildScene(s, OPERATOR_VIEW, 800, 600);
    const backbone = prims.filter((p): p is Extract<typeof p, { kind: "polyline" }> => p.kind === "polyline")
      .find((p) => p.width === 4)!;
    const xs = backbone.points.map(([x]) => x);
    expect(Math.max(...xs) - Math.min(...xs)).toBeLessThan(1e-9);
    // +z ascends on screen
    expect(backbone.points[0][1]).toBeGreaterThan(backbone.points[2][1]);
  });
});
