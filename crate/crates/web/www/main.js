import init, { densityView, pathView, lambdaView, rRange } from "./pkg/levy_spde_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const num = (id) => Number(document.getElementById(id).value);

function show(id, text, error = false) {
  const el = document.getElementById(id);
  el.textContent = text;
  el.className = error ? "info error" : "info";
}

// series: [{x, y, color, bars}], optional log axes
function plot(canvasId, series, { logX = false, logY = false } = {}) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const pad = 40;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const fx = logX ? Math.log10 : (v) => v;
  const fy = logY ? Math.log10 : (v) => v;
  const xs = series.flatMap((s) => s.x.map(fx)).filter(Number.isFinite);
  const ys = series.flatMap((s) => s.y.map(fy)).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const px = (v) => pad + ((fx(v) - x0) / (x1 - x0)) * w;
  const py = (v) => pad + h - ((fy(v) - y0) / (y1 - y0)) * h;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  const label = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(label(y1, logY), 2, pad + 4);
  ctx.fillText(label(y0, logY), 2, pad + h);
  ctx.fillText(label(x0, logX), pad, pad + h + 14);
  ctx.fillText(label(x1, logX), pad + w - 30, pad + h + 14);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    if (s.bars) {
      const bw = w / s.x.length;
      s.x.forEach((x, i) => {
        const top = py(Math.max(s.y[i], y0));
        ctx.globalAlpha = 0.35;
        ctx.fillRect(px(x) - bw / 2, top, bw, pad + h - top);
        ctx.globalAlpha = 1;
      });
      continue;
    }
    ctx.beginPath();
    s.x.forEach((x, i) => {
      const y = s.y[i];
      if (!Number.isFinite(fy(y))) return;
      i === 0 ? ctx.moveTo(px(x), py(y)) : ctx.lineTo(px(x), py(y));
    });
    ctx.stroke();
  }
}

function runDensity() {
  try {
    const v = JSON.parse(densityView(num("d-alpha"), num("d-draws"), num("d-seed")));
    plot("d-plot", [
      { x: v.bin_centers, y: v.histogram, color: COLORS[0], bars: true },
      { x: v.x, y: v.density, color: COLORS[1] },
    ]);
    show("d-info", `${v.draws} draws; bars: histogram, line: tabulated density; c_alpha = ${v.c_alpha.toFixed(6)}`);
  } catch (e) {
    show("d-info", String(e), true);
  }
}

function runPath() {
  try {
    const v = JSON.parse(pathView(num("p-alpha"), num("p-r"), num("p-modes"), num("p-amp"), num("p-dt"), num("p-seed")));
    plot("p-plot", v.modes.map((m, k) => ({ x: v.times, y: m, color: COLORS[k % COLORS.length] })));
    const [lo, hi] = v.admissible;
    show("p-info", `${v.modes.length} modes, ${v.big_jumps} big jumps; drift exponent ${v.drift_exponent.toFixed(4)} in (${lo.toFixed(4)}, ${hi.toFixed(4)})`);
  } catch (e) {
    show("p-info", String(e), true);
  }
}

function runLambda() {
  try {
    const v = JSON.parse(lambdaView(num("l-p"), num("l-alpha"), num("l-r")));
    plot("l-plot", [
      { x: v.times, y: v.lambda_t, color: COLORS[0] },
      { x: v.times, y: v.envelope, color: COLORS[1] },
    ], { logX: true, logY: true });
    const [rlo, rhi] = v.r_range;
    const [blo, bhi] = v.beta_range;
    show("l-info", `blue: Lambda_t, red: envelope; r range (${rlo.toFixed(4)}, ${rhi.toFixed(4)}), gamma ${v.gamma_exponent.toFixed(4)}, beta range (${blo.toFixed(4)}, ${bhi.toFixed(4)})`);
  } catch (e) {
    show("l-info", String(e), true);
  }
}

// keep r inside the admissible range when p or alpha change
function clampR(p, alphaId, rId) {
  const [lo, hi] = rRange(p, num(alphaId));
  const r = document.getElementById(rId);
  r.min = lo;
  r.max = hi;
  if (!(num(rId) > lo && num(rId) < hi)) r.value = ((lo + hi) / 2).toFixed(3);
}

await init();
document.getElementById("d-run").onclick = runDensity;
document.getElementById("p-run").onclick = runPath;
document.getElementById("l-run").onclick = runLambda;
document.getElementById("p-alpha").onchange = () => clampR(1, "p-alpha", "p-r");
document.getElementById("l-alpha").onchange = () => clampR(num("l-p"), "l-alpha", "l-r");
document.getElementById("l-p").onchange = () => clampR(num("l-p"), "l-alpha", "l-r");
runDensity();
runPath();
runLambda();
