#include "metasim/teleop/server.hpp"

namespace metasim::teleop {

const std::string& builtin_index_page() {
  static const std::string page = R"html(<!doctype html>
<html>
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1">
<title>teleop</title>
<style>
body { font-family: sans-serif; margin: 1em; }
.pad { display: grid; grid-template-columns: repeat(3, 5em); gap: .4em; margin: 1em 0; }
.pad button { height: 3.5em; font-size: 1em; touch-action: none; }
.pad button.on { background: #8c8; }
label { display: block; margin: .3em 0; }
pre { background: #eee; padding: .5em; font-size: .75em; max-height: 20em; overflow: auto; }
</style>
</head>
<body>
<div id="status">connecting</div>
<div class="pad">
  <span></span><button data-axis="0" data-dir="1">+X</button><button data-axis="2" data-dir="1">+Z</button>
  <button data-axis="1" data-dir="1">+Y</button><span></span><button data-axis="1" data-dir="-1">-Y</button>
  <span></span><button data-axis="0" data-dir="-1">-X</button><button data-axis="2" data-dir="-1">-Z</button>
</div>
<label><input type="checkbox" id="ori"> orientation</label>
<label><input type="checkbox" id="grip" checked> gripper open</label>
<label>roll <input type="range" id="roll" min="-180" max="180" value="180"></label>
<label>pitch <input type="range" id="pitch" min="-90" max="90" value="0"></label>
<label>yaw <input type="range" id="yaw" min="-180" max="180" value="0"></label>
<pre id="state"></pre>
<script>
const held = new Set();
let ws = null, seq = 0, token = "", t0 = performance.now(), gripToggle = false, deviceQ = null;
for (const b of document.querySelectorAll(".pad button")) {
  const key = b.dataset.axis + ":" + b.dataset.dir;
  b.addEventListener("pointerdown", e => { held.add(key); b.classList.add("on"); e.preventDefault(); });
  for (const ev of ["pointerup", "pointerleave", "pointercancel"])
    b.addEventListener(ev, () => { held.delete(key); b.classList.remove("on"); });
}
document.getElementById("grip").addEventListener("change", () => { gripToggle = true; });
window.addEventListener("deviceorientation", e => {
  if (e.alpha === null) return;
  deviceQ = eulerToQuat(e.beta * Math.PI / 180, e.gamma * Math.PI / 180, e.alpha * Math.PI / 180);
});
function eulerToQuat(r, p, y) {
  const cr = Math.cos(r / 2), sr = Math.sin(r / 2), cp = Math.cos(p / 2), sp = Math.sin(p / 2);
  const cy = Math.cos(y / 2), sy = Math.sin(y / 2);
  return [cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy, cr * sp * cy + sr * cp * sy,
          cr * cp * sy - sr * sp * cy];
}
function sliderQuat() {
  const v = id => Number(document.getElementById(id).value) * Math.PI / 180;
  return eulerToQuat(v("roll"), v("pitch"), v("yaw"));
}
function frame() {
  const t = [0, 0, 0];
  for (const k of held) { const [a, d] = k.split(":"); t[Number(a)] += Number(d); }
  const ori = document.getElementById("ori").checked;
  const q = deviceQ || sliderQuat();
  const g = gripToggle ? 1 : 0;
  gripToggle = false;
  seq += 1;
  return ["CMD", seq, Math.round(performance.now() - t0), t[0], t[1], t[2], ori ? 1 : 0,
          q[0], q[1], q[2], q[3], g].join(" ");
}
function connect() {
  ws = new WebSocket((location.protocol === "https:" ? "wss://" : "ws://") + location.host + "/teleop");
  ws.onopen = () => { ws.send(token ? "HELLO " + token : "HELLO"); };
  ws.onmessage = e => {
    const kind = e.data.split(/[ \n]/)[0];
    if (kind === "SESSION") {
      const f = e.data.split(" ");
      token = f[1];
      seq = Math.max(seq, Number(f[2]));
      document.getElementById("status").textContent = "connected";
    } else if (kind === "STATE") {
      document.getElementById("state").textContent = e.data;
    } else if (kind === "ERR" || kind === "WARN") {
      document.getElementById("status").textContent = e.data;
    }
  };
  ws.onclose = () => {
    document.getElementById("status").textContent = "retrying";
    ws = null;
    setTimeout(connect, 1000);
  };
}
setInterval(() => { if (ws && ws.readyState === 1 && token) ws.send(frame()); }, 20);
connect();
</script>
</body>
</html>
)html";
  return page;
}

}  // namespace metasim::teleop
