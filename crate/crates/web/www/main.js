import init, { Session, methodLabels } from "./pkg/depthfill_web.js";

const $ = (id) => document.getElementById(id);
let session = null;

function status(text) {
  $("status").textContent = text;
}

function picture(rgba, w, h, caption) {
  const canvas = document.createElement("canvas");
  canvas.className = "img";
  canvas.width = w;
  canvas.height = h;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
  const fig = document.createElement("figure");
  const cap = document.createElement("figcaption");
  cap.textContent = caption;
  fig.append(canvas, cap);
  return fig;
}

function lambda() {
  return Math.pow(10, Number($("lambda").value));
}

// lets the status line paint before a long synchronous call
function later(fn) {
  return new Promise((resolve) => setTimeout(() => resolve(fn()), 20));
}

async function guarded(label, fn) {
  status(label + "...");
  try {
    const t0 = performance.now();
    await later(fn);
    status(`${label}: ${((performance.now() - t0) / 1000).toFixed(2)} s`);
  } catch (e) {
    status(`${label} failed: ${e.message ?? e}`);
  }
}

function load() {
  const name = `${$("kind").value}_${$("size").value}_${$("variant").value}`;
  return guarded(`render ${name}`, () => {
    if (session) session.free();
    session = new Session(name, Number($("noise").value), Number($("seed").value));
    const w = session.width(), h = session.height();
    $("inputs").replaceChildren(
      picture(session.rawRgba(), w, h, "raw depth"),
      picture(session.truthRgba(), w, h, "ground truth"),
      picture(session.normalsRgba(), w, h, "normals"),
      picture(session.boundaryRgba(), w, h, "boundary"),
    );
    $("result").replaceChildren();
    $("metrics").textContent = "";
    $("table").replaceChildren();
  });
}

function complete() {
  const method = $("method").value;
  return guarded(`complete ${method}`, () => {
    const out = session.complete(method, lambda());
    const w = session.width(), h = session.height();
    $("result").replaceChildren(
      picture(out.rgba(), w, h, method),
      picture(out.errorRgba(), w, h, "absolute error"),
    );
    $("metrics").textContent =
      `holes: ${out.nEval()} px, Rel ${out.rel().toFixed(4)}, RMSE ${out.rmse().toFixed(4)} m, ` +
      `within 1.25: ${out.d125().toFixed(1)}%`;
    out.free();
  });
}

function compare() {
  return guarded("compare", () => {
    const rows = [["method", "Rel", "RMSE (m)", "δ<1.25 (%)"]];
    for (const m of methodLabels()) {
      const out = session.complete(m, lambda());
      rows.push([m, out.rel().toFixed(4), out.rmse().toFixed(4), out.d125().toFixed(1)]);
      out.free();
    }
    $("table").replaceChildren(...rows.map((r, i) => {
      const tr = document.createElement("tr");
      for (const v of r) {
        const cell = document.createElement(i === 0 ? "th" : "td");
        cell.textContent = v;
        tr.append(cell);
      }
      return tr;
    }));
  });
}

function drawCurve(points) {
  const c = $("chart"), g = c.getContext("2d");
  const pad = 45, w = c.width - 2 * pad, h = c.height - 2 * pad;
  g.clearRect(0, 0, c.width, c.height);
  const lx = points.map((p) => Math.log10(p.n));
  const ly = points.map((p) => Math.log10(Math.max(p.rel, 1e-6)));
  const [x0, x1] = [Math.min(...lx), Math.max(...lx) + 1e-9];
  const [y0, y1] = [Math.min(...ly) - 0.1, Math.max(...ly) + 0.1];
  const X = (x) => pad + ((x - x0) / (x1 - x0)) * w;
  const Y = (y) => pad + h - ((y - y0) / (y1 - y0)) * h;
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, h);
  g.fillStyle = "#222";
  g.font = "12px sans-serif";
  g.fillText("input samples (log)", pad + w / 2 - 50, c.height - 10);
  g.fillText("Rel on holes (log)", 5, pad - 10);
  g.strokeStyle = "#3b528b";
  g.lineWidth = 2;
  g.beginPath();
  lx.forEach((x, i) => (i ? g.lineTo(X(x), Y(ly[i])) : g.moveTo(X(x), Y(ly[i]))));
  g.stroke();
  points.forEach((p, i) => {
    g.beginPath();
    g.arc(X(lx[i]), Y(ly[i]), 3, 0, 2 * Math.PI);
    g.fill();
    g.fillText(`${p.n}: ${p.rel.toFixed(4)}`, X(lx[i]) + 4, Y(ly[i]) - 6);
  });
}

function sweep() {
  return guarded("sparsity sweep", () => {
    const counts = $("counts").value.split(",").map((s) => parseInt(s.trim(), 10)).filter((n) => n > 0);
    const flat = session.sparsity(Uint32Array.from(counts), Number($("seed").value));
    const points = [];
    for (let i = 0; i < flat.length; i += 3) points.push({ n: flat[i], rel: flat[i + 1], rmse: flat[i + 2] });
    drawCurve(points);
  });
}

await init();
$("method").replaceChildren(...methodLabels().map((m) => {
  const o = document.createElement("option");
  o.textContent = m;
  o.selected = m === "N_boundary";
  return o;
}));
const showLambda = () => ($("lambdaText").textContent = lambda().toExponential(0));
$("lambda").addEventListener("input", showLambda);
showLambda();
$("load").addEventListener("click", load);
$("complete").addEventListener("click", complete);
$("compare").addEventListener("click", compare);
$("sweep").addEventListener("click", sweep);
await load();
