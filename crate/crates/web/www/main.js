import init, { lp_picture, phase_heatmap, amplification_curve } from "./pkg/convrelax_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const list = (id) => $(id).value.split(",").map((s) => Number(s.trim())).filter((v) => v > 0);

function guard(fn) {
  return () => {
    $("status").textContent = "";
    try {
      fn();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

// feasible region of x_i·w ≤ y_i, clipped to a square view
function drawLp() {
  const p = lp_picture(num("lp-n"), num("lp-seed"));
  const rows = p.rows, ys = p.labels, ws = p.w_star, wh = p.w_hat, r = p.r;
  const c = $("lp-canvas"), g = c.getContext("2d");
  const span = 2.5 * Math.max(1, Math.hypot(ws[0], ws[1]));
  const px = (v) => ((v + span) / (2 * span)) * c.width;
  const py = (v) => c.height - ((v + span) / (2 * span)) * c.height;
  g.clearRect(0, 0, c.width, c.height);

  const img = g.createImageData(c.width, c.height);
  for (let j = 0; j < c.height; j++) {
    for (let i = 0; i < c.width; i++) {
      const w0 = (i / c.width) * 2 * span - span;
      const w1 = ((c.height - j) / c.height) * 2 * span - span;
      let ok = true;
      for (let s = 0; s < ys.length && ok; s++) ok = rows[2 * s] * w0 + rows[2 * s + 1] * w1 <= ys[s];
      const k = 4 * (j * c.width + i);
      img.data[k] = ok ? 220 : 255;
      img.data[k + 1] = ok ? 228 : 255;
      img.data[k + 2] = ok ? 245 : 255;
      img.data[k + 3] = 255;
    }
  }
  g.putImageData(img, 0, 0);

  g.strokeStyle = "#bbb";
  g.beginPath();
  g.moveTo(px(0), 0); g.lineTo(px(0), c.height);
  g.moveTo(0, py(0)); g.lineTo(c.width, py(0));
  g.stroke();

  const dot = (w, color, rad) => {
    g.fillStyle = color;
    g.beginPath();
    g.arc(px(w[0]), py(w[1]), rad, 0, 2 * Math.PI);
    g.fill();
  };
  dot(ws, "#2a2", 7);
  if (p.optimal) dot(wh, "#22c", 4);

  const len = 0.35 * span / Math.max(1e-12, Math.hypot(r[0], r[1]));
  const [x0, y0] = [px(ws[0]), py(ws[1])];
  const [x1, y1] = [px(ws[0] - len * r[0]), py(ws[1] - len * r[1])];
  g.strokeStyle = "#c33";
  g.lineWidth = 2;
  g.beginPath(); g.moveTo(x0, y0); g.lineTo(x1, y1); g.stroke();
  const a = Math.atan2(y1 - y0, x1 - x0);
  g.beginPath();
  g.moveTo(x1, y1);
  g.lineTo(x1 - 9 * Math.cos(a - 0.4), y1 - 9 * Math.sin(a - 0.4));
  g.lineTo(x1 - 9 * Math.cos(a + 0.4), y1 - 9 * Math.sin(a + 0.4));
  g.closePath(); g.fillStyle = "#c33"; g.fill();
  g.lineWidth = 1;

  const active = ys.filter((y) => y > 0).length;
  const fmt = (w) => `(${w[0].toFixed(3)}, ${w[1].toFixed(3)})`;
  $("lp-text").textContent = !p.optimal
    ? `LP unbounded along −r (${active} active samples); no recovery.`
    : `${p.recovered ? "Recovered" : "Not recovered"}: ŵ = ${fmt(wh)}, w* = ${fmt(ws)}, ${active} active samples.`;
}

function drawPhase() {
  const ns = list("ph-n"), ds = list("ph-d");
  const rates = phase_heatmap(Uint32Array.from(ns), Uint32Array.from(ds), num("ph-trials"), 7);
  const c = $("ph-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const left = 50, bottom = 30;
  const cw = (c.width - left) / ds.length, ch = (c.height - bottom) / ns.length;
  g.font = "12px sans-serif";
  g.textAlign = "center";
  ns.forEach((n, a) => {
    const row = ns.length - 1 - a;
    ds.forEach((d, b) => {
      const v = rates[a * ds.length + b];
      const shade = Math.round(255 * (1 - v));
      g.fillStyle = `rgb(${shade},${shade},${shade})`;
      g.fillRect(left + b * cw, row * ch, cw - 1, ch - 1);
      g.fillStyle = v > 0.5 ? "#fff" : "#000";
      g.fillText(v.toFixed(2), left + (b + 0.5) * cw, (row + 0.5) * ch + 4);
    });
    g.fillStyle = "#000";
    g.textAlign = "right";
    g.fillText(`n=${n}`, left - 6, (row + 0.5) * ch + 4);
    g.textAlign = "center";
  });
  ds.forEach((d, b) => g.fillText(`d=${d}`, left + (b + 0.5) * cw, c.height - 10));
}

function drawAmplification() {
  const t = num("am-t");
  const curve = amplification_curve(num("am-n"), num("am-d"), t, num("am-reps"), 11);
  const c = $("am-canvas"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const left = 40, bottom = 25, top = 10;
  const x = (k) => left + ((k - 1) / Math.max(1, t - 1)) * (c.width - left - 10);
  const y = (v) => top + (1 - v) * (c.height - top - bottom);
  g.strokeStyle = "#999";
  g.beginPath(); g.moveTo(left, top); g.lineTo(left, y(0)); g.lineTo(c.width - 10, y(0)); g.stroke();
  g.font = "12px sans-serif";
  g.fillStyle = "#000";
  for (const v of [0, 0.5, 1]) g.fillText(v.toFixed(1), 8, y(v) + 4);
  for (let k = 1; k <= t; k++) g.fillText(String(k), x(k) - 3, c.height - 6);

  const p1 = curve[0];
  g.setLineDash([5, 4]);
  g.strokeStyle = "#888";
  g.beginPath();
  for (let k = 1; k <= t; k++) {
    const v = 1 - Math.pow(1 - p1, k);
    k === 1 ? g.moveTo(x(k), y(v)) : g.lineTo(x(k), y(v));
  }
  g.stroke();
  g.setLineDash([]);
  g.strokeStyle = "#22c";
  g.lineWidth = 2;
  g.beginPath();
  curve.forEach((v, i) => (i === 0 ? g.moveTo(x(i + 1), y(v)) : g.lineTo(x(i + 1), y(v))));
  g.stroke();
  g.lineWidth = 1;
}

await init();
$("status").textContent = "";
$("lp-run").onclick = guard(drawLp);
$("lp-next").onclick = guard(() => {
  $("lp-seed").value = num("lp-seed") + 1;
  drawLp();
});
$("ph-run").onclick = guard(drawPhase);
$("am-run").onclick = guard(drawAmplification);
guard(drawLp)();
