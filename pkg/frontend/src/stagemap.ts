// Top-down stage map geometry: digital-space meters <-> canvas pixels.
// x runs right, z runs up the screen (operators read floor plans with the
// stage's far side at the top). Clicking the map picks a takeover goal.

import { SceneSummary, StageRect } from "./protocol.js";

export type CanvasPoint = { px: number; py: number };
export type WorldPoint = { x: number; z: number };

export class StageMapView {
  readonly stage: StageRect;
  readonly widthPx: number;
  readonly heightPx: number;
  readonly margin: number;
  readonly scale: number; // pixels per meter, uniform

  constructor(stage: StageRect, widthPx: number, heightPx: number, margin = 16) {
    this.stage = stage;
    this.widthPx = widthPx;
    this.heightPx = heightPx;
    this.margin = margin;
    const spanX = stage.x1 - stage.x0;
    const spanZ = stage.z1 - stage.z0;
    this.scale = Math.min(
      (widthPx - 2 * margin) / spanX,
      (heightPx - 2 * margin) / spanZ,
    );
  }

  worldToCanvas(p: WorldPoint): CanvasPoint {
    return {
      px: this.margin + (p.x - this.stage.x0) * this.scale,
      py: this.heightPx - this.margin - (p.z - this.stage.z0) * this.scale,
    };
  }

  /** null when the pixel is outside the stage bounds. */
  canvasToWorld(px: number, py: number): WorldPoint | null {
    const x = this.stage.x0 + (px - this.margin) / this.scale;
    const z = this.stage.z0 + (this.heightPx - this.margin - py) / this.scale;
    if (x < this.stage.x0 || x > this.stage.x1 || z < this.stage.z0 || z > this.stage.z1) {
      return null;
    }
    return { x, z };
  }

  rectToCanvas(r: StageRect): { px: number; py: number; w: number; h: number } {
    const a = this.worldToCanvas({ x: r.x0, z: r.z1 });
    const b = this.worldToCanvas({ x: r.x1, z: r.z0 });
    return { px: a.px, py: a.py, w: b.px - a.px, h: b.py - a.py };
  }
}

export function drawStage(
  ctx: CanvasRenderingContext2D,
  view: StageMapView,
  scene: SceneSummary,
  marker: { x: number; z: number; yaw: number } | null,
  goal: WorldPoint | null,
): void {
  ctx.clearRect(0, 0, view.widthPx, view.heightPx);
  const stage = view.rectToCanvas(view.stage);
  ctx.fillStyle = "#1c2431";
  ctx.fillRect(stage.px, stage.py, stage.w, stage.h);
  ctx.strokeStyle = "#5b6b85";
  ctx.strokeRect(stage.px, stage.py, stage.w, stage.h);

  ctx.fillStyle = "#3a2f3f";
  ctx.strokeStyle = "#8a5a6a";
  for (const obstacle of scene.obstacles) {
    const r = view.rectToCanvas(obstacle);
    ctx.fillRect(r.px, r.py, r.w, r.h);
    ctx.strokeRect(r.px, r.py, r.w, r.h);
  }

  ctx.strokeStyle = "#4f8f6f";
  ctx.setLineDash([4, 3]);
  for (const zone of scene.zones) {
    const r = view.rectToCanvas(zone.d);
    ctx.strokeRect(r.px, r.py, r.w, r.h);
    ctx.fillStyle = "#6fbf8f";
    ctx.fillText(zone.id, r.px + 3, r.py + 12);
  }
  ctx.setLineDash([]);

  ctx.fillStyle = "#c9a227";
  for (const preset of scene.presets) {
    const p = view.worldToCanvas(preset);
    ctx.beginPath();
    ctx.arc(p.px, p.py, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillText(preset.name, p.px + 6, p.py + 3);
  }

  if (goal) {
    const g = view.worldToCanvas(goal);
    ctx.strokeStyle = "#e0e6f0";
    ctx.beginPath();
    ctx.moveTo(g.px - 6, g.py);
    ctx.lineTo(g.px + 6, g.py);
    ctx.moveTo(g.px, g.py - 6);
    ctx.lineTo(g.px, g.py + 6);
    ctx.stroke();
  }

  if (marker) {
    const m = view.worldToCanvas(marker);
    const yawRad = (marker.yaw * Math.PI) / 180;
    // +x right, +z up-screen: a positive yaw turns the heading counterclockwise
    const hx = Math.cos(yawRad);
    const hz = Math.sin(yawRad);
    ctx.fillStyle = "#62d0ff";
    ctx.beginPath();
    ctx.arc(m.px, m.py, 6, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "#62d0ff";
    ctx.beginPath();
    ctx.moveTo(m.px, m.py);
    ctx.lineTo(m.px + hx * 14, m.py - hz * 14);
    ctx.stroke();
  }
}
