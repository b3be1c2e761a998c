import init, { property_fit, zero_shot_trials, property_plane } from "./pkg/propnsm_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function run(outId, f) {
  const out = $(outId);
  out.classList.remove("err");
  try {
    f(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function heatmap(canvas, m, title) {
  const ctx = canvas.getContext("2d");
  const n = m.length;
  const top = 18;
  const cell = Math.min(canvas.width - 4, canvas.height - top - 2) / n;
  const max = Math.max(...m.flat().map(Math.abs)) || 1;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#222";
  ctx.fillText(title, 4, 12);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const v = m[i][j] / max;
      const r = v > 0 ? 255 : Math.round(255 * (1 + v));
      const b = v < 0 ? 255 : Math.round(255 * (1 - v));
      const g = Math.round(255 * (1 - Math.abs(v)));
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      ctx.fillRect(2 + j * cell, top + i * cell, cell, cell);
    }
  }
}

function line(canvas, ys, title) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 24;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#222";
  ctx.fillText(title, 4, 12);
  const lo = Math.min(...ys), hi = Math.max(...ys);
  const span = hi - lo || 1;
  ctx.strokeStyle = "#1565c0";
  ctx.beginPath();
  ys.forEach((y, i) => {
    const px = pad + (i / Math.max(ys.length - 1, 1)) * (w - 2 * pad);
    const py = h - pad - ((y - lo) / span) * (h - 2 * pad);
    i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.stroke();
  ctx.fillText(hi.toPrecision(4), 2, pad);
  ctx.fillText(lo.toPrecision(4), 2, h - 6);
}

function bars(canvas, methods) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, base = h - 24;
  ctx.clearRect(0, 0, w, h);
  const bw = w / methods.length;
  methods.forEach((m, i) => {
    const bh = m.accuracy * (base - 16);
    ctx.fillStyle = m.method === "NSM_PB" ? "#2e7d32" : "#90a4ae";
    ctx.fillRect(i * bw + 12, base - bh, bw - 24, bh);
    ctx.fillStyle = "#222";
    ctx.fillText(m.method, i * bw + 12, h - 8);
    ctx.fillText(m.accuracy.toFixed(3), i * bw + 12, base - bh - 4);
  });
}

const palette = ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
  "#f032e6", "#bfef45", "#9a6324", "#469990", "#800000", "#000075"];

function plane(canvas, view) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, c = w / 2;
  const extent = Math.max(1.2, ...view.points.map((p) => Math.max(Math.abs(p.x), Math.abs(p.y))));
  const s = (c - 12) / extent;
  ctx.clearRect(0, 0, w, w);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.arc(c, c, s, 0, 2 * Math.PI);
  ctx.stroke();
  for (const p of view.points) {
    ctx.fillStyle = palette[p.class % palette.length];
    ctx.globalAlpha = p.unseen ? 1 : 0.25;
    ctx.fillRect(c + p.x * s - 2, c - p.y * s - 2, 4, 4);
  }
  ctx.globalAlpha = 1;
  view.classes.forEach(([x, y], k) => {
    ctx.fillStyle = palette[k % palette.length];
    ctx.beginPath();
    ctx.arc(c + x * s, c - y * s, view.unseen.includes(k) ? 7 : 4, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function fitProperty() {
  run("pf-out", (out) => {
    const v = JSON.parse(property_fit(num("pf-alpha"), num("pf-lambda"), num("pf-n"), num("pf-seed")));
    heatmap($("pf-sem"), v.semantic_gram, "semantic gram (seen)");
    heatmap($("pf-prop"), v.property_gram, "property gram (seen)");
    line($("pf-trace"), v.trace, "objective per iteration");
    out.textContent = `unseen: ${v.unseen.join(", ")}\niterations: ${v.trace.length - 1}\nfinal objective: ${v.trace[v.trace.length - 1]}`;
  });
}

function runTrials() {
  run("zs-out", (out) => {
    const v = JSON.parse(zero_shot_trials(num("zs-noise"), num("zs-trials"), num("zs-seed")));
    bars($("zs-bars"), v.methods);
    out.textContent = v.methods.map((m) => `${m.method.padEnd(7)} ${m.accuracy.toFixed(4)}`).join("\n");
  });
}

function mapPlane() {
  run("pp-out", (out) => {
    const v = JSON.parse(property_plane(num("pp-alpha"), num("pp-lambda"), num("pp-seed")));
    plane($("pp-plane"), v);
    const names = v.unseen.map((k) => v.labels[k]).join(", ");
    out.textContent = `held out: ${names}\naccuracy among held-out classes: ${v.accuracy.toFixed(4)}`;
  });
}

await init();
$("pf-run").onclick = fitProperty;
$("zs-run").onclick = runTrials;
$("pp-run").onclick = mapPlane;
fitProperty();
runTrials();
mapPlane();
