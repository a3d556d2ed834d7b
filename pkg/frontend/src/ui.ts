// DOM layer: canvas rendering, readouts, controls, stale banner. All
// displayed values come straight from the latest state message.

import { CockpitClient } from "./client.js";
import { Camera, OPERATOR_VIEW, buildScene } from "./scene.js";
import { StripChart } from "./stripchart.js";

const JOG_STEP_KPA = 1.0;
const ROTATE_STEP_RAD = 0.35;

export function mountCockpit(root: HTMLElement, client: CockpitClient): void {
  root.innerHTML = `
    <div id="banner" class="banner hidden">STALE DATA - no state from server</div>
    <div class="layout">
      <canvas id="scene" width="860" height="640"></canvas>
      <div class="panel">
        <div id="conn" class="row">connecting...</div>
        <div id="mode" class="row badge">manual</div>
        <div class="row">
          <button id="load">Load anchor</button>
          <button id="couple">Couple</button>
          <button id="release-check">Release check</button>
        </div>
        <div class="row">
          <select id="site"></select>
          <button id="engage">Engage path</button>
          <button id="pause">Pause</button>
        </div>
        <div class="row">jog keys: q/a w/s e/d (chambers 1-3), r rotates the driver</div>
        <div id="pressures" class="row mono"></div>
        <div id="force" class="row mono"></div>
        <div id="deploy" class="row mono"></div>
        <canvas id="dial" width="140" height="90"></canvas>
        <canvas id="chart" width="300" height="90"></canvas>
        <div class="row"><b>Implanted anchors</b></div>
        <table id="errors"><tr><th>#</th><th>site</th><th>error (mm)</th><th>depth</th></tr></table>
        <div class="row"><b>Command log</b></div>
        <div id="cmdlog" class="log mono"></div>
      </div>
    </div>`;

  const scene = root.querySelector<HTMLCanvasElement>("#scene")!;
  const ctx = scene.getContext("2d")!;
  const dial = root.querySelector<HTMLCanvasElement>("#dial")!.getContext("2d")!;
  const chartCanvas = root.querySelector<HTMLCanvasElement>("#chart")!.getContext("2d")!;
  const banner = root.querySelector<HTMLElement>("#banner")!;
  const chart = new StripChart();
  const camera: Camera = { ...OPERATOR_VIEW };

  // orbit camera drag
  let dragging = false;
  let lastXY: [number, number] = [0, 0];
  scene.addEventListener("mousedown", (e) => {
    dragging = true;
    lastXY = [e.clientX, e.clientY];
  });
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    camera.yawRad += (e.clientX - lastXY[0]) * 0.008;
    camera.pitchRad = Math.max(-1.4, Math.min(1.4, camera.pitchRad + (e.clientY - lastXY[1]) * 0.008));
    lastXY = [e.clientX, e.clientY];
  });
  scene.addEventListener("wheel", (e) => {
    e.preventDefault();
    camera.zoom = Math.max(1, Math.min(20, camera.zoom * (e.deltaY < 0 ? 1.1 : 0.9)));
  });

  const guarded = (action: string, fn: () => void) => {
    if (!client.canSend(action) || client.view.awaitingAck) return;
    fn();
  };
  root.querySelector("#load")!.addEventListener("click", () => guarded("load_anchor", () => client.send("load_anchor")));
  root.querySelector("#couple")!.addEventListener("click", () => guarded("couple", () => client.send("couple")));
  root.querySelector("#release-check")!.addEventListener("click", () =>
    guarded("release_check", () => client.send("release_check")),
  );
  root.querySelector("#pause")!.addEventListener("click", () => guarded("pause", () => client.send("pause")));
  root.querySelector("#engage")!.addEventListener("click", () =>
    guarded("engage_path", () => {
      const site = root.querySelector<HTMLSelectElement>("#site")!.value;
      client.engagePath("circle24", site || undefined);
    }),
  );

  const jogKeys: Record<string, [1 | 2 | 3, number]> = {
    q: [1, JOG_STEP_KPA], a: [1, -JOG_STEP_KPA],
    w: [2, JOG_STEP_KPA], s: [2, -JOG_STEP_KPA],
    e: [3, JOG_STEP_KPA], d: [3, -JOG_STEP_KPA],
  };
  window.addEventListener("keydown", (e) => {
    const jog = jogKeys[e.key];
    if (jog) guarded("jog", () => client.jog(jog[0], jog[1]));
    if (e.key === "r" && client.canSend("rotate_driver")) client.rotateBy(ROTATE_STEP_RAD);
  });

  function drawScene(): void {
    const state = client.view.latest;
    ctx.fillStyle = "#10151c";
    ctx.fillRect(0, 0, scene.width, scene.height);
    if (!state) return;
    for (const prim of buildScene(state, camera, scene.width, scene.height)) {
      if (prim.kind === "polyline") {
        ctx.strokeStyle = prim.color;
        ctx.lineWidth = prim.width;
        ctx.beginPath();
        prim.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
      } else {
        ctx.beginPath();
        ctx.arc(prim.at[0], prim.at[1], prim.radius, 0, 2 * Math.PI);
        ctx.strokeStyle = prim.color;
        ctx.fillStyle = prim.color;
        prim.fill ? ctx.fill() : ctx.stroke();
        if (prim.label) {
          ctx.fillStyle = "#c8d2dc";
          ctx.font = "11px sans-serif";
          ctx.fillText(prim.label, prim.at[0] + 8, prim.at[1] - 6);
        }
      }
    }
  }

  function drawDial(torque: number): void {
    dial.clearRect(0, 0, 140, 90);
    dial.strokeStyle = "#3c4654";
    dial.lineWidth = 8;
    dial.beginPath();
    dial.arc(70, 78, 56, Math.PI, 2 * Math.PI);
    dial.stroke();
    const frac = Math.max(0, Math.min(1, torque / 3.0));
    dial.strokeStyle = frac > 0.8 ? "#ff5f56" : "#7fd4f0";
    dial.beginPath();
    dial.arc(70, 78, 56, Math.PI, Math.PI * (1 + frac));
    dial.stroke();
    dial.fillStyle = "#c8d2dc";
    dial.font = "12px sans-serif";
    dial.fillText(`${torque.toFixed(2)} N*mm`, 42, 70);
  }

  function drawChart(): void {
    chartCanvas.clearRect(0, 0, 300, 90);
    const { samples, dropAt } = chart;
    if (samples.length < 2) return;
    const { min, max } = chart.range();
    const t0 = samples[0].t, t1 = samples[samples.length - 1].t || t0 + 1;
    const px = (s: { t: number; value: number }): [number, number] => [
      ((s.t - t0) / Math.max(1e-9, t1 - t0)) * 296 + 2,
      86 - ((s.value - min) / Math.max(1e-9, max - min)) * 80,
    ];
    chartCanvas.strokeStyle = "#e0b345";
    chartCanvas.lineWidth = 1.5;
    chartCanvas.beginPath();
    samples.forEach((s, i) => {
      const [x, y] = px(s);
      i === 0 ? chartCanvas.moveTo(x, y) : chartCanvas.lineTo(x, y);
    });
    chartCanvas.stroke();
    if (dropAt !== null && dropAt >= t0) {
      // highlight the self-release torque drop
      const x = ((dropAt - t0) / Math.max(1e-9, t1 - t0)) * 296 + 2;
      chartCanvas.strokeStyle = "#ff5f56";
      chartCanvas.beginPath();
      chartCanvas.moveTo(x, 4);
      chartCanvas.lineTo(x, 86);
      chartCanvas.stroke();
    }
  }

  function refreshPanel(): void {
    const v = client.view;
    root.querySelector("#conn")!.textContent = `connection: ${v.connection}`;
    const badge = root.querySelector<HTMLElement>("#mode")!;
    badge.textContent = v.mode;
    badge.className = `row badge badge-${v.mode}`;
    const state = v.latest;
    if (state) {
      const p = state.pressures_kpa.map((x) => x.toFixed(1)).join(" / ");
      const c = state.commanded_kpa.map((x) => x.toFixed(1)).join(" / ");
      root.querySelector("#pressures")!.textContent = `pressure kPa: ${p}  (cmd ${c})`;
      root.querySelector("#force")!.textContent =
        `contact: ${state.contact.in_contact ? "YES" : "no"}  force ${state.contact.force_n.toFixed(2)} N`;
      root.querySelector("#deploy")!.textContent =
        `phase ${state.deployment.phase}  depth ${state.deployment.depth_mm.toFixed(2)} mm`;
      const sel = root.querySelector<HTMLSelectElement>("#site")!;
      if (sel.options.length !== state.anchor_sites.length) {
        sel.innerHTML = state.anchor_sites.map((s) => `<option>${s.label}</option>`).join("");
      }
    }
    const table = root.querySelector<HTMLTableElement>("#errors")!;
    while (table.rows.length - 1 < v.anchorErrors.length) {
      const e = v.anchorErrors[table.rows.length - 1];
      const row = table.insertRow();
      row.innerHTML =
        `<td>${e.anchorIndex}</td><td>${e.site}</td>` +
        `<td>${e.lateralErrorMm.toFixed(2)}</td><td>${e.depthMm.toFixed(1)}</td>`;
    }
    const log = root.querySelector<HTMLElement>("#cmdlog")!;
    log.textContent = v.commandLog
      .slice(-12)
      .map((c) => `#${c.sequence} ${c.action}${c.acknowledged ? "" : " (pending)"}`)
      .join("\n");
  }

  setInterval(() => {
    banner.classList.toggle("hidden", !client.isStale());
    const state = client.view.latest;
    if (state) chart.push(Date.now() / 1000, state.deployment.torque_reading_nmm);
  }, 100);

  function frame(): void {
    drawScene();
    refreshPanel();
    drawDial(client.view.latest?.deployment.torque_reading_nmm ?? 0);
    drawChart();
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}
