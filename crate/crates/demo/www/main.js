// Plain-canvas front end for the wasm fitting module. No framework; the
// wasm package is expected at ./pkg (see the crate README for the build).
import init, { fit_preset, fit_csv } from "./pkg/stabaaa_demo.js";

const $ = (id) => document.getElementById(id);
const status = $("status");

function setStatus(text, cls) {
  status.textContent = text;
  status.className = cls || "";
}

$("preset").addEventListener("change", () => {
  $("csv-box").style.display = $("preset").value === "csv" ? "block" : "none";
});
$("eps").addEventListener("input", () => {
  $("eps-val").textContent = "1e" + $("eps").value;
});

function logTicks(min, max) {
  const ticks = [];
  for (let e = Math.ceil(Math.log10(min)); Math.pow(10, e) <= max * 1.001; e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

function drawMagnitude(canvas, curve, eps) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 56, B = 30, T = 12, R = 12;
  ctx.clearRect(0, 0, W, H);

  const fs = curve.map(p => p.freq);
  const mags = curve.flatMap(p => [p.data_mag, p.model_mag]).filter(v => v > 0);
  const errs = curve.map(p => p.error_mag).filter(v => v > 0);
  const fmin = Math.min(...fs), fmax = Math.max(...fs);
  let ymin = Math.min(...mags, ...(errs.length ? errs : [1e-16]), eps) / 3;
  let ymax = Math.max(...mags) * 3;
  ymin = Math.max(ymin, 1e-18);

  const x = f => L + (Math.log10(f) - Math.log10(fmin)) / (Math.log10(fmax) - Math.log10(fmin)) * (W - L - R);
  const y = v => H - B - (Math.log10(Math.max(v, ymin)) - Math.log10(ymin)) / (Math.log10(ymax) - Math.log10(ymin)) * (H - B - T);

  ctx.strokeStyle = "#e3e7ed";
  ctx.fillStyle = "#66707e";
  ctx.font = "11px system-ui";
  for (const t of logTicks(fmin, fmax)) {
    ctx.beginPath(); ctx.moveTo(x(t), T); ctx.lineTo(x(t), H - B); ctx.stroke();
    ctx.fillText(t.toExponential(0), x(t) - 12, H - B + 14);
  }
  for (const t of logTicks(ymin, ymax)) {
    ctx.beginPath(); ctx.moveTo(L, y(t)); ctx.lineTo(W - R, y(t)); ctx.stroke();
    ctx.fillText(t.toExponential(0), 4, y(t) + 3);
  }
  ctx.strokeStyle = "#9aa4b2";
  ctx.strokeRect(L, T, W - L - R, H - B - T);

  const polyline = (key, color, width) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.beginPath();
    let started = false;
    for (const p of curve) {
      const v = p[key];
      if (!(v > 0)) { continue; }
      const px = x(p.freq), py = y(v);
      if (!started) { ctx.moveTo(px, py); started = true; } else { ctx.lineTo(px, py); }
    }
    ctx.stroke();
    ctx.lineWidth = 1;
  };
  polyline("data_mag", "#8a93a0", 2.5);
  polyline("model_mag", "#2456b3", 1.4);
  polyline("error_mag", "#b33c3c", 1.2);

  // tolerance line
  ctx.strokeStyle = "#b33c3c";
  ctx.setLineDash([5, 4]);
  ctx.beginPath();
  ctx.moveTo(L, y(eps));
  ctx.lineTo(W - R, y(eps));
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawPoles(canvas, poles) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height;
  ctx.clearRect(0, 0, W, H);
  if (!poles.length) {
    ctx.fillStyle = "#66707e";
    ctx.fillText("constant model — no poles", 20, 20);
    return;
  }
  const maxAbs = Math.max(...poles.map(p => Math.max(Math.abs(p[0]), Math.abs(p[1])))) * 1.2 || 1;
  const reMax = Math.max(maxAbs / 8, Math.max(...poles.map(p => Math.abs(p[0]))) * 1.3);
  const x = re => W / 2 + (re / reMax) * (W / 2 - 20);
  const y = im => H / 2 - (im / maxAbs) * (H / 2 - 16);

  // left half plane
  ctx.fillStyle = "rgba(44,122,63,0.07)";
  ctx.fillRect(0, 0, W / 2, H);
  ctx.strokeStyle = "#9aa4b2";
  ctx.beginPath(); ctx.moveTo(W / 2, 0); ctx.lineTo(W / 2, H); ctx.stroke();
  ctx.beginPath(); ctx.moveTo(0, H / 2); ctx.lineTo(W, H / 2); ctx.stroke();
  ctx.fillStyle = "#66707e";
  ctx.font = "11px system-ui";
  ctx.fillText("Re", W - 20, H / 2 - 6);
  ctx.fillText("Im", W / 2 + 6, 12);

  for (const [re, im] of poles) {
    ctx.beginPath();
    ctx.arc(x(re), y(im), 5, 0, 2 * Math.PI);
    if (re < 0) {
      ctx.strokeStyle = "#2456b3";
      ctx.fillStyle = "rgba(36,86,179,0.25)";
    } else {
      ctx.strokeStyle = "#b33c3c";
      ctx.fillStyle = "rgba(179,60,60,0.45)";
    }
    ctx.fill();
    ctx.stroke();
  }
}

function runFit() {
  const eps = Math.pow(10, parseFloat($("eps").value));
  const algo = $("algorithm").value;
  const theta = parseFloat($("theta").value);
  const mmax = parseInt($("mmax").value, 10);
  setStatus("fitting…");
  // yield to the event loop so the status paints before the solve
  setTimeout(() => {
    let out;
    try {
      if ($("preset").value === "csv") {
        out = fit_csv($("csv").value, $("unit").value, algo, eps, theta, mmax);
      } else {
        out = fit_preset($("preset").value, algo, eps, theta, mmax);
      }
    } catch (e) {
      setStatus("fit failed: " + e, "bad");
      return;
    }
    const r = JSON.parse(out);
    const stable = r.stable === null ? "—" : (r.stable ? "yes" : "NO");
    $("summary").style.display = "table";
    $("summary-row").innerHTML =
      `<td>${r.order}</td><td>${stable}</td><td>${r.met_tolerance ? "yes" : "no"}</td>` +
      `<td>${r.sdp_calls}</td><td>${r.e_inf.toExponential(2)}</td>` +
      `<td>${r.e_2.toExponential(2)}</td><td>${r.e_rms.toExponential(2)}</td>`;
    setStatus(
      r.stable === false
        ? "fit has unstable poles — rerun with the stability-enforced algorithm"
        : "done",
      r.stable === false ? "bad" : "good"
    );
    drawMagnitude($("mag"), r.curve, eps);
    drawPoles($("poles"), r.poles);
    $("model-json").value = r.model_json;
  }, 16);
}

init().then(() => {
  setStatus("ready");
  $("run").addEventListener("click", runFit);
  runFit();
}).catch(e => setStatus("wasm load failed: " + e, "bad"));
