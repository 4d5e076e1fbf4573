import init, { growthCurves, treeDelta, magnetizationTail } from "./pkg/treeconc_wasm.js";

const PALETTE = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6c4f9e", "#00798c"];
const MARGIN = { left: 56, right: 16, top: 16, bottom: 36 };

function panel(id, run) {
  const root = document.getElementById(id);
  const error = root.querySelector(".error");
  const field = (name) => root.querySelector(`[name=${name}]`).value;
  const go = () => {
    error.textContent = "";
    try {
      run(field, root.querySelector("canvas"), root.querySelector(".stats"));
    } catch (e) {
      error.textContent = e.message ?? String(e);
    }
  };
  root.querySelector("button").addEventListener("click", go);
  go();
}

function axes(ctx, xs, ys, { logY = false } = {}) {
  const { width, height } = ctx.canvas;
  const fy = logY ? (y) => Math.log10(Math.max(y, 1e-300)) : (y) => y;
  const finite = ys.map(fy).filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...finite), Math.max(...finite)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const px = (x) => MARGIN.left + ((x - x0) / (x1 - x0 || 1)) * (width - MARGIN.left - MARGIN.right);
  const py = (y) => height - MARGIN.bottom - ((fy(y) - y0) / (y1 - y0)) * (height - MARGIN.top - MARGIN.bottom);
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.beginPath();
  ctx.moveTo(MARGIN.left, MARGIN.top);
  ctx.lineTo(MARGIN.left, height - MARGIN.bottom);
  ctx.lineTo(width - MARGIN.right, height - MARGIN.bottom);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const v = y0 + ((y1 - y0) * i) / 4;
    const y = height - MARGIN.bottom - (i / 4) * (height - MARGIN.top - MARGIN.bottom);
    ctx.fillText(logY ? `1e${v.toFixed(1)}` : v.toPrecision(3), 4, y + 4);
  }
  for (let i = 0; i <= 4; i++) {
    const v = x0 + ((x1 - x0) * i) / 4;
    ctx.fillText(v.toPrecision(3), px(v) - 8, height - MARGIN.bottom + 16);
  }
  return { px, py };
}

function polyline(ctx, xs, ys, px, py, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  let pen = false;
  xs.forEach((x, i) => {
    if (!Number.isFinite(ys[i])) { pen = false; return; }
    if (pen) ctx.lineTo(px(x), py(ys[i]));
    else ctx.moveTo(px(x), py(ys[i]));
    pen = true;
  });
  ctx.stroke();
  ctx.lineWidth = 1;
}

function legend(ctx, labels) {
  labels.forEach((label, i) => {
    ctx.fillStyle = PALETTE[i % PALETTE.length];
    ctx.fillRect(MARGIN.left + 12, MARGIN.top + 8 + 16 * i, 12, 3);
    ctx.fillStyle = "#222";
    ctx.fillText(label, MARGIN.left + 30, MARGIN.top + 12 + 16 * i);
  });
}

function drawGrowth(field, canvas) {
  const data = JSON.parse(growthCurves(field("family"), field("bs"), Number(field("kmax"))));
  const ctx = canvas.getContext("2d");
  const { px, py } = axes(ctx, data.k, data.curves.flatMap((c) => c.values));
  data.curves.forEach((c, i) => polyline(ctx, data.k, c.values, px, py, PALETTE[i % PALETTE.length]));
  legend(ctx, data.curves.map((c) => `b = ${c.b.replace("isqrt", "1/√")}`));
}

function drawTree(field, canvas, stats) {
  const data = JSON.parse(treeDelta(field("spec"), field("b")));
  const n = data.parents.length;
  const children = Array.from({ length: n }, () => []);
  data.parents.forEach((p, v) => p >= 0 && children[p].push(v));
  const x = new Array(n);
  let leaf = 0;
  const order = [];
  const stack = [0];
  while (stack.length) {
    const v = stack.pop();
    order.push(v);
    for (let i = children[v].length - 1; i >= 0; i--) stack.push(children[v][i]);
  }
  for (const v of order) if (children[v].length === 0) x[v] = leaf++;
  for (const v of order.reverse()) {
    if (children[v].length) x[v] = (x[children[v][0]] + x[children[v].at(-1)]) / 2;
  }
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const height0 = Math.max(...data.depth) || 1;
  const sx = (v) => MARGIN.left + (leaf > 1 ? (x[v] / (leaf - 1)) : 0.5) * (width - MARGIN.left - MARGIN.right);
  const sy = (v) => MARGIN.top + (data.depth[v] / height0) * (height - MARGIN.top - MARGIN.bottom);
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#bbb";
  for (let v = 1; v < n; v++) {
    ctx.beginPath();
    ctx.moveTo(sx(data.parents[v]), sy(data.parents[v]));
    ctx.lineTo(sx(v), sy(v));
    ctx.stroke();
  }
  const r = n > 500 ? 2 : 5;
  for (let v = 0; v < n; v++) {
    const t = (data.delta[v] - 1) / Math.max(data.max_delta - 1, 1e-12);
    ctx.fillStyle = `hsl(${220 - 220 * t}, 70%, 45%)`;
    ctx.beginPath();
    ctx.arc(sx(v), sy(v), r, 0, 2 * Math.PI);
    ctx.fill();
  }
  const d2 = data.big_delta ** 2;
  stats.textContent =
    `n = ${n}   Δ = ${data.big_delta.toPrecision(6)}   max δ = ${data.max_delta.toPrecision(6)}\n` +
    `S = ${data.pair_sum.toPrecision(6)} ≤ Δ² = ${d2.toPrecision(6)} ≤ S/(1−b²) = ${data.sandwich_upper.toPrecision(6)}`;
}

function drawTail(field, canvas, stats) {
  const data = JSON.parse(magnetizationTail(field("spec"), Number(field("p")), 200));
  const ctx = canvas.getContext("2d");
  const bound = data.bound.map((b) => Math.min(b, 1));
  const { px, py } = axes(ctx, data.epsilon, data.exact.concat(bound).filter((y) => y > 0), { logY: true });
  const visible = (ys) => ys.map((y) => (y > 0 ? y : NaN));
  polyline(ctx, data.epsilon, visible(data.exact), px, py, PALETTE[0]);
  polyline(ctx, data.epsilon, bound, px, py, PALETTE[1]);
  legend(ctx, ["exact P(|m − Em| ≥ ε)", "2 exp(−2n²ε²/Δ²)"]);
  stats.textContent = `n = ${data.n}   Δ = ${data.big_delta.toPrecision(6)}   Var f = ${data.variance.toPrecision(6)}`;
}

await init();
panel("growth", drawGrowth);
panel("tree", drawTree);
panel("tail", drawTail);
