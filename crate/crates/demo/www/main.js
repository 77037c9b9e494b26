import init, { psi_curve, solve_1d, solve_2d } from "./pkg/fracsparse_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(40, 10, w - 50, h - 40);
}

// Polyline of ys over xs in the frame drawn by axes().
function line(ctx, w, h, xs, ys, [x0, x1, y0, y1], style, dash = []) {
  const px = (x) => 40 + ((x - x0) / (x1 - x0)) * (w - 50);
  const py = (y) => 10 + (1 - (y - y0) / (y1 - y0 || 1)) * (h - 40);
  ctx.strokeStyle = style;
  ctx.setLineDash(dash);
  ctx.beginPath();
  xs.forEach((x, k) => (k ? ctx.lineTo(px(x), py(ys[k])) : ctx.moveTo(px(x), py(ys[k]))));
  ctx.stroke();
  ctx.setLineDash([]);
}

function labels(ctx, h, text) {
  ctx.fillStyle = "#333";
  ctx.fillText(text, 44, h - 12);
}

// Diverging colours: blue negative, white zero, red positive.
function colour(v, vmax) {
  const a = Math.min(1, Math.abs(v) / (vmax || 1));
  const c = Math.round(255 * (1 - a));
  return v >= 0 ? `rgb(255,${c},${c})` : `rgb(${c},${c},255)`;
}

// Row-major grid with row 0 at the bottom, as both the time axis and y run.
function flipRows(values, rows, cols) {
  const out = new Float64Array(rows * cols);
  for (let r = 0; r < rows; r++) out.set(values.subarray(r * cols, (r + 1) * cols), (rows - 1 - r) * cols);
  return out;
}

function heatmap(canvas, values, rows, cols, vmax) {
  const ctx = canvas.getContext("2d");
  const cw = canvas.width / cols, ch = canvas.height / rows;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let r = 0; r < rows; r++)
    for (let c = 0; c < cols; c++) {
      ctx.fillStyle = colour(values[r * cols + c], vmax);
      ctx.fillRect(c * cw, r * ch, Math.ceil(cw), Math.ceil(ch));
    }
}

function drawPsi() {
  const p = num("psi-p"), eps = num("psi-eps");
  const canvas = $("psi-plot"), ctx = canvas.getContext("2d");
  let data;
  try {
    data = psi_curve(p, eps, 4 * eps * eps, 400);
  } catch (e) {
    axes(ctx, canvas.width, canvas.height);
    labels(ctx, canvas.height, String(e));
    return;
  }
  const t = [], psi = [], exact = [], dpsi = [];
  for (let k = 0; k < data.length; k += 4) {
    t.push(data[k]); psi.push(data[k + 1]); exact.push(data[k + 2]); dpsi.push(data[k + 3]);
  }
  const ymax = Math.max(...psi, ...exact);
  const dmax = Math.max(...dpsi);
  const box = [0, t[t.length - 1], 0, ymax];
  axes(ctx, canvas.width, canvas.height);
  line(ctx, canvas.width, canvas.height, t, exact, box, "#aaa");
  line(ctx, canvas.width, canvas.height, t, psi, box, "#000");
  line(ctx, canvas.width, canvas.height, t, dpsi.map((d) => (d / dmax) * ymax), box, "#36c");
  line(ctx, canvas.width, canvas.height, [eps * eps, eps * eps], [0, ymax], box, "#c33", [4, 4]);
  labels(ctx, canvas.height, `t in [0, ${(4 * eps * eps).toPrecision(3)}]`);
}

function summary(s) {
  return [
    `${s.converged() ? "converged" : "not converged"} after ${s.iterations()} outer iterations`,
    `Phi_0 = ${s.phi0().toFixed(5)}`,
    `u = 0 on ${s.spacetime_pct().toFixed(1)}% of I x Omega, w = 0 on ${s.spatial_pct().toFixed(1)}% of Omega`,
  ].join("\n");
}

function run1d() {
  $("s1-out").textContent = "solving ...";
  setTimeout(() => {
    let s;
    try {
      s = solve_1d(num("s1-n"), num("s1-gamma"), num("s1-p"));
    } catch (e) {
      $("s1-out").textContent = String(e);
      return;
    }
    const n = s.n(), m = s.m(), w = s.w(), u = s.u(), ud = s.u_d();
    const xs = Array.from({ length: n }, (_, i) => -1 + (2 * i) / (n - 1));
    // max over time of |u_d|, for comparison with w
    const udmax = xs.map((_, i) => Math.max(...Array.from({ length: m }, (_, j) => Math.abs(ud[j * n + i]))));
    const cw = $("s1-w"), ctx = cw.getContext("2d");
    const top = Math.max(...w, ...udmax);
    axes(ctx, cw.width, cw.height);
    line(ctx, cw.width, cw.height, xs, udmax, [-1, 1, 0, top], "#aaa");
    line(ctx, cw.width, cw.height, xs, w, [-1, 1, 0, top], "#000");
    labels(ctx, cw.height, "w(x) (black), max_t |u_d| (grey)");
    heatmap($("s1-u"), flipRows(u, m, n), m, n, Math.max(...u.map(Math.abs)));
    $("s1-out").textContent = summary(s) + "\nright: u(t, x), time upwards, red > 0 > blue";
    s.free();
  }, 10);
}

function run2d() {
  $("s2-out").textContent = "solving ...";
  setTimeout(() => {
    let s;
    try {
      s = solve_2d(num("s2-n"), num("s2-gamma"), num("s2-p"));
    } catch (e) {
      $("s2-out").textContent = String(e);
      return;
    }
    const side = Math.round(Math.sqrt(s.n())), m = s.m(), u = s.u(), w = s.w();
    heatmap($("s2-w"), flipRows(w, side, side), side, side, Math.max(...w));
    const last = u.subarray((m - 1) * s.n(), m * s.n());
    heatmap($("s2-u"), flipRows(last, side, side), side, side, Math.max(...last.map(Math.abs)));
    $("s2-out").textContent = summary(s) + "\nleft: w, right: u at the final time";
    s.free();
  }, 10);
}

await init();
for (const id of ["psi-p", "psi-eps"]) $(id).addEventListener("input", drawPsi);
$("s1-run").addEventListener("click", run1d);
$("s2-run").addEventListener("click", run2d);
drawPsi();
