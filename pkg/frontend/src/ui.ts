// DOM wiring. Controls are created per role — a control the role may not
// use is never rendered, so unauthorized commands cannot originate here.
// Everything displayed comes straight from the latest frame summary.

import { NudgeStreamer } from "./nudge.js";
import { FrameSummary, Role, SceneSummary } from "./protocol.js";
import { AckResult, ConsoleSession } from "./session.js";
import { StageMapView, drawStage } from "./stagemap.js";

const $ = (id: string) => document.getElementById(id) as HTMLElement;

export class ConsoleUi {
  private session: ConsoleSession;
  private view: StageMapView | null = null;
  private canvas: HTMLCanvasElement;
  private pendingGoal: { x: number; z: number } | null = null;
  private nudger: NudgeStreamer;
  private sliderMoved = new Map<string, number>();

  constructor(session: ConsoleSession) {
    this.session = session;
    this.canvas = $("stage-map") as HTMLCanvasElement;
    this.nudger = new NudgeStreamer((dx, dz, dyaw) => {
      if (this.session.canSend("puppeteer/refmove")) {
        this.session.sendNudge(dx, dz, dyaw);
      }
    });
    $("role-badge").textContent = session.role;
  }

  wireScene(scene: SceneSummary): void {
    this.view = new StageMapView(scene.stage, this.canvas.width, this.canvas.height);
    $("scene-name").textContent = scene.name;
    this.buildControls(scene);
    this.canvas.addEventListener("click", (ev) => this.onMapClick(ev));
    this.redraw();
  }

  onSummary(summary: FrameSummary): void {
    $("owner-badge").textContent = this.session.ownerBadge();
    $("owner-badge").className =
      summary.owner === "PathfinderLocomotion" ? "badge pathfinder" : "badge mocaptor";
    const d = summary.disposition;
    $("disposition").textContent =
      `x ${d.x.toFixed(2)}  z ${d.z.toFixed(2)}  yaw ${d.yaw.toFixed(1)}°`;
    $("mode-badge").textContent = summary.mode;
    this.renderHealth(summary);
    this.syncSliders(summary);
    this.redraw();
  }

  onAck(result: AckResult): void {
    const log = $("ack-log");
    const line = document.createElement("div");
    line.className = result.ok ? "ack ok" : "ack err";
    line.textContent = result.ok
      ? `#${result.seq} ${result.topic} ✓`
      : `#${result.seq} ${result.topic} ✗ ${result.error}`;
    log.prepend(line);
    while (log.childElementCount > 8) log.lastElementChild?.remove();
    if (!result.ok && result.topic === "pathfind/takeover") {
      this.pendingGoal = null;
      this.redraw();
    }
  }

  onError(error: string): void {
    $("conn-status").textContent = `error: ${error}`;
  }

  private onMapClick(ev: MouseEvent): void {
    if (!this.view || !this.session.canSend("pathfind/takeover")) return;
    const rect = this.canvas.getBoundingClientRect();
    const goal = this.view.canvasToWorld(ev.clientX - rect.left, ev.clientY - rect.top);
    if (!goal) return;
    this.pendingGoal = goal;
    this.session.sendTakeover(goal);
    this.redraw();
  }

  private buildControls(scene: SceneSummary): void {
    const pad = $("controls");
    pad.innerHTML = "";
    if (this.session.canSend("pathfind/release")) {
      pad.append(
        button("Release", () => this.session.sendRelease()),
        ...scene.presets.map((p) =>
          button(`Release → ${p.name}`, () => this.session.sendRelease(p.name)),
        ),
      );
      const nudges: [string, number, number, number][] = [
        ["▲", 0.1, 0, 0], ["▼", -0.1, 0, 0], ["◀", 0, 0.1, 0], ["▶", 0, -0.1, 0],
        ["⟲ 5°", 0, 0, 5], ["⟳ 5°", 0, 0, -5],
      ];
      for (const [label, dx, dzv, dyaw] of nudges) {
        pad.append(
          button(label, () => this.nudger.impulse(dx, dzv, dyaw, performance.now() / 1000)),
        );
      }
    }
    if (this.session.canSend("composition/mode")) {
      pad.append(
        button("Fixed", () => this.session.setMode("Fixed")),
        button("Manipulated", () => this.session.setMode("Manipulated")),
      );
    }
    if (this.session.canSend("composition/camera")) {
      const sliders = $("sliders");
      sliders.innerHTML = "";
      sliders.append(
        slider("camera yaw", -180, 180, (v, prev) =>
          this.session.moveCamera({ dyaw: v - prev }),
        ),
        slider("camera fov", 15, 165, (v, prev) =>
          this.session.moveCamera({ dfov: v - prev }),
        ),
        ...scene.lights.map((id) =>
          slider(`light ${id}`, 0, 2, (v, prev) =>
            this.session.adjustLight(id, v - prev),
          ),
        ),
      );
    }
  }

  private syncSliders(summary: FrameSummary): void {
    const enabled = this.session.slidersEnabled();
    document.querySelectorAll<HTMLInputElement>("#sliders input").forEach((el) => {
      el.disabled = !enabled;
    });
    $("sliders").classList.toggle("locked", !enabled);
  }

  private renderHealth(summary: FrameSummary): void {
    const box = $("health");
    box.innerHTML = "";
    for (const [id, state] of Object.entries(summary.health)) {
      const chip = document.createElement("span");
      chip.className = `chip ${state}`;
      chip.textContent = `${id}: ${state}`;
      box.append(chip);
    }
  }

  private redraw(): void {
    if (!this.view || !this.session.scene) return;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const latest = this.session.latest;
    drawStage(
      ctx,
      this.view,
      this.session.scene,
      latest ? latest.disposition : null,
      this.pendingGoal,
    );
  }
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = label;
  el.addEventListener("click", () => {
    try {
      onClick();
    } catch (err) {
      ($("conn-status") as HTMLElement).textContent = String(err);
    }
  });
  return el;
}

function slider(
  label: string,
  min: number,
  max: number,
  onChange: (value: number, previous: number) => void,
): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "slider";
  wrap.textContent = label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = "0.1";
  input.value = String((min + max) / 2);
  let previous = Number(input.value);
  input.addEventListener("input", () => {
    const value = Number(input.value);
    try {
      onChange(value, previous);
      previous = value;
    } catch {
      input.value = String(previous); // defensive: role/mode refused it
    }
  });
  wrap.append(input);
  return wrap;
}
