import init, { tv_lmo, gtv1d_fit, l1_representer } from "./pkg/gaugekit_web.js";

const show = (id, text, isError) => {
  const el = document.getElementById(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
};

// total-variation atom on a pixel grid

const TV_N = 8;
const tv = { g: new Float64Array(TV_N * TV_N) };

function tvDraw(result) {
  const c = document.getElementById("tv-canvas");
  const ctx = c.getContext("2d");
  const s = c.width / TV_N;
  for (let i = 0; i < TV_N * TV_N; i++) {
    const v = tv.g[i];
    const shade = v < 0 ? `rgb(${255 + 200 * v},${255 + 200 * v},255)` : `rgb(255,${255 - 200 * v},${255 - 200 * v})`;
    ctx.fillStyle = v === 0 ? "#fff" : shade;
    ctx.fillRect((i % TV_N) * s, Math.floor(i / TV_N) * s, s, s);
  }
  ctx.strokeStyle = "#ddd";
  for (let k = 0; k <= TV_N; k++) {
    ctx.beginPath(); ctx.moveTo(k * s, 0); ctx.lineTo(k * s, c.height); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(0, k * s); ctx.lineTo(c.width, k * s); ctx.stroke();
  }
  if (!result || result.degenerate) return;
  const inside = new Set(result.cells);
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 3;
  for (const i of inside) {
    const r = Math.floor(i / TV_N), col = i % TV_N, x = col * s, y = r * s;
    const edge = (nb, x0, y0, x1, y1) => {
      if (!inside.has(nb)) { ctx.beginPath(); ctx.moveTo(x0, y0); ctx.lineTo(x1, y1); ctx.stroke(); }
    };
    edge(r > 0 ? i - TV_N : -1, x, y, x + s, y);
    edge(r < TV_N - 1 ? i + TV_N : -1, x, y + s, x + s, y + s);
    edge(col > 0 ? i - 1 : -1, x, y, x, y + s);
    edge(col < TV_N - 1 ? i + 1 : -1, x + s, y, x + s, y + s);
  }
  ctx.lineWidth = 1;
}

function tvUpdate() {
  try {
    const r = JSON.parse(tv_lmo(TV_N, TV_N, tv.g));
    tvDraw(r);
    show("tv-out", r.degenerate
      ? "g is zero: every atom is optimal"
      : `sign ${r.sign > 0 ? "+" : "-"}  |F| = ${r.cells.length}  Per(F) = ${r.perimeter}  ratio = ${r.ratio.toFixed(6)}` +
        `\ncomponents of the cut: ${r.components.length}`);
  } catch (e) {
    tvDraw(null);
    show("tv-out", String(e), true);
  }
}

function tvSetup() {
  const c = document.getElementById("tv-canvas");
  const paint = (ev, value) => {
    const rect = c.getBoundingClientRect();
    const s = rect.width / TV_N;
    const col = Math.floor((ev.clientX - rect.left) / s), row = Math.floor((ev.clientY - rect.top) / s);
    if (col < 0 || row < 0 || col >= TV_N || row >= TV_N) return;
    tv.g[row * TV_N + col] = value;
    tvUpdate();
  };
  c.addEventListener("click", (ev) => paint(ev, ev.shiftKey ? 0.5 : -1));
  c.addEventListener("contextmenu", (ev) => { ev.preventDefault(); paint(ev, 0); });
  document.getElementById("tv-reset").onclick = () => { tvPreset(); tvUpdate(); };
  tvPreset();
  tvUpdate();
}

function tvPreset() {
  tv.g.fill(0.1);
  for (const i of [18, 19, 20, 26, 27, 28, 34, 35, 36]) tv.g[i] = -1;
}

// piecewise-constant fit

const GTV_N = 60;
const gtv = { samples: new Map([[5, 0.2], [15, 0.25], [25, 0.8], [35, 0.75], [48, 0.4], [55, 0.45]]) };
const lambdaOf = () => Math.pow(10, Number(document.getElementById("gtv-lambda").value));

function gtvUpdate() {
  const c = document.getElementById("gtv-canvas");
  const ctx = c.getContext("2d");
  const lambda = lambdaOf();
  document.getElementById("gtv-lambda-val").textContent = lambda.toPrecision(3);
  ctx.clearRect(0, 0, c.width, c.height);
  const X = (i) => (i + 0.5) * c.width / GTV_N, Y = (v) => c.height * (1 - v);
  const entries = [...gtv.samples.entries()].sort((a, b) => a[0] - b[0]);
  ctx.fillStyle = "#c33";
  for (const [i, v] of entries) { ctx.beginPath(); ctx.arc(X(i), Y(v), 4, 0, 7); ctx.fill(); }
  if (entries.length === 0) { show("gtv-out", "no samples"); return; }
  try {
    const r = JSON.parse(gtv1d_fit(GTV_N, new Uint32Array(entries.map((e) => e[0])),
      new Float64Array(entries.map((e) => e[1])), lambda));
    ctx.strokeStyle = "#236";
    ctx.lineWidth = 2;
    ctx.beginPath();
    r.u.forEach((v, i) => {
      const x0 = i * c.width / GTV_N, x1 = (i + 1) * c.width / GTV_N;
      if (i === 0) ctx.moveTo(x0, Y(v)); else ctx.lineTo(x0, Y(v));
      ctx.lineTo(x1, Y(v));
    });
    ctx.stroke();
    ctx.lineWidth = 1;
    show("gtv-out", `samples ${entries.length}  jumps ${r.jumps.length}  (bound ${r.bound})  objective ${r.objective.toFixed(6)}` +
      `\njumps after positions: ${r.jumps.map((j) => `${j.at} (${j.height >= 0 ? "+" : ""}${j.height.toFixed(3)})`).join(", ")}`);
  } catch (e) {
    show("gtv-out", String(e), true);
  }
}

function gtvSetup() {
  const c = document.getElementById("gtv-canvas");
  c.addEventListener("click", (ev) => {
    const rect = c.getBoundingClientRect();
    const i = Math.min(GTV_N - 1, Math.max(0, Math.floor((ev.clientX - rect.left) / rect.width * GTV_N)));
    gtv.samples.set(i, 1 - (ev.clientY - rect.top) / rect.height);
    gtvUpdate();
  });
  document.getElementById("gtv-lambda").addEventListener("input", gtvUpdate);
  document.getElementById("gtv-clear").onclick = () => { gtv.samples.clear(); gtvUpdate(); };
  gtvUpdate();
}

// sparse spikes

function l1Update() {
  const num = (id) => Number(document.getElementById(id).value);
  const c = document.getElementById("l1-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  let r;
  try {
    r = JSON.parse(l1_representer(num("l1-m"), num("l1-n"), num("l1-k"), num("l1-lambda"), num("l1-seed") >>> 0));
  } catch (e) {
    show("l1-out", String(e), true);
    return;
  }
  const n = r.truth.length;
  const peak = Math.max(1e-9, ...r.truth.map(Math.abs), ...r.u.map(Math.abs));
  const X = (i) => (i + 0.5) * c.width / n, Y = (v) => c.height / 2 * (1 - 0.9 * v / peak);
  ctx.strokeStyle = "#aaa";
  ctx.beginPath(); ctx.moveTo(0, Y(0)); ctx.lineTo(c.width, Y(0)); ctx.stroke();
  const stems = (vals, color, dx) => {
    ctx.strokeStyle = color; ctx.fillStyle = color;
    vals.forEach((v, i) => {
      if (v === 0) return;
      ctx.beginPath(); ctx.moveTo(X(i) + dx, Y(0)); ctx.lineTo(X(i) + dx, Y(v)); ctx.stroke();
      ctx.beginPath(); ctx.arc(X(i) + dx, Y(v), 3, 0, 7); ctx.fill();
    });
  };
  stems(r.truth, "#999", -2);
  stems(r.u, "#c33", 2);
  show("l1-out", `grey: truth, red: recovered\nspikes used ${r.r_after} (bound ${r.bound}, before sparsification ${r.r_before})` +
    `  objective ${r.objective.toFixed(6)}`);
}

function l1Setup() {
  for (const id of ["l1-m", "l1-n", "l1-k", "l1-lambda", "l1-seed"]) {
    document.getElementById(id).addEventListener("change", l1Update);
  }
  l1Update();
}

init().then(() => { tvSetup(); gtvSetup(); l1Setup(); });
