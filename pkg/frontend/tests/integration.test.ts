// End-to-end against the real stage server: spawn a replay session with the
// console gateway, drive it exactly the way the UI does (map click -> world
// goal -> takeover), and watch the frame summaries. Skipped when python or
// the stagelink package is unavailable.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { FrameSummary } from "../src/protocol.js";
import { AckResult, ConsoleSession } from "../src/session.js";
import { StageMapView } from "../src/stagemap.js";

const PYTHON = process.env.STAGELINK_PYTHON ?? "python3";
const PORT = 7770 + Math.floor(Math.random() * 200);

function pythonHasStagelink(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import stagelink"], { timeout: 20000 });
  return probe.status === 0;
}

const available = pythonHasStagelink();
const suite = available ? describe : describe.skip;

suite("console against a live replay server", () => {
  let server: ChildProcess;
  let ws: WebSocket;
  let session: ConsoleSession;
  const summaries: FrameSummary[] = [];
  const acks: AckResult[] = [];

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "stagelink-console-"));
    spawnSync(PYTHON, ["-m", "stagelink.fixtures", dir], { timeout: 60000 });
    server = spawn(PYTHON, [
      "-m", "stagelink.cli",
      "--scene", join(dir, "demo.ini"),
      "--listen-console", `127.0.0.1:${PORT}`,
      "--max-ticks", "100000",
    ]);
    await new Promise<void>((resolve, reject) => {
      const deadline = setTimeout(() => reject(new Error("gateway never came up")), 20000);
      const tryConnect = () => {
        const probe = new WebSocket(`ws://127.0.0.1:${PORT}`);
        probe.on("open", () => {
          clearTimeout(deadline);
          ws = probe;
          resolve();
        });
        probe.on("error", () => setTimeout(tryConnect, 200));
      };
      tryConnect();
    });
    session = new ConsoleSession(
      { send: (d) => ws.send(d), close: () => ws.close() },
      "Manipulator",
      { onSummary: (s) => summaries.push(s), onAck: (a) => acks.push(a) },
    );
    ws.on("message", (data) => session.receive(data.toString()));
    await waitFor(() => session.scene !== null, 10000, "welcome");
  }, 60000);

  afterAll(() => {
    ws?.close();
    server?.kill("SIGINT");
  });

  it("welcome carries the stage map data", () => {
    expect(session.scene?.stage.x1).toBe(12);
    expect(session.scene?.presets.some((p) => p.name === "Dig2")).toBe(true);
  });

  it("summaries stream and the health chip shows the replay input", async () => {
    await waitFor(() => summaries.length >= 3, 10000, "three summaries");
    const latest = session.latest!;
    expect(latest.health["replayA"]).toBe("fresh");
    expect(latest.pose.joints).toBe(40);
  });

  it("a clicked map goal flips the owner badge within two summaries", async () => {
    const view = new StageMapView(session.scene!.stage, 620, 620);
    // the operator clicks the pixel for (9, 9); the click handler inverts it
    const px = view.worldToCanvas({ x: 9, z: 9 });
    const goal = view.canvasToWorld(px.px, px.py)!;
    expect(goal.x).toBeCloseTo(9, 6);
    expect(goal.z).toBeCloseTo(9, 6);

    await waitFor(() => session.latest !== null, 5000, "first summary");
    const seq = session.sendTakeover(goal);
    const sentAt = session.summaryCount;
    await waitFor(
      () => acks.some((a) => a.seq === seq) || session.summaryCount > sentAt + 2,
      10000,
      "takeover ack",
    );
    const ack = acks.find((a) => a.seq === seq)!;
    expect(ack.ok).toBe(true);
    await waitFor(
      () => session.ownerBadge() === "Pathfinder",
      10000,
      "owner badge flip",
    );
    // summaries[i] is the (i+1)-th summary; the flip must appear within the
    // two summaries displayed after the click went out
    const flippedAt = summaries.findIndex((s) => s.owner === "PathfinderLocomotion");
    expect(flippedAt + 1 - sentAt).toBeLessThanOrEqual(2);
  });

  it("release onto a preset lands the marker there", async () => {
    const seq = session.sendRelease("Dig2");
    await waitFor(() => acks.some((a) => a.seq === seq), 10000, "release ack");
    expect(acks.find((a) => a.seq === seq)!.ok).toBe(true);
    await waitFor(() => session.ownerBadge() === "Mocaptor", 10000, "owner back");
    await waitFor(() => {
      const d = session.latest!.disposition;
      return Math.abs(d.x - 9.0) < 0.2 && Math.abs(d.z - 2.0) < 0.2;
    }, 10000, "marker at Dig2");
  });

  it("an unreachable goal surfaces the error inline and keeps the owner", async () => {
    const before = session.ownerBadge();
    const seq = session.sendTakeover({ x: 6.0, z: 2.5 }); // inside the pillar
    await waitFor(() => acks.some((a) => a.seq === seq), 10000, "error ack");
    const ack = acks.find((a) => a.seq === seq)!;
    expect(ack.ok).toBe(false);
    expect(ack.error).toMatch(/Endpoint|NoPath/);
    expect(session.ownerBadge()).toBe(before);
  });

  it("manipulator has no path to composition commands", () => {
    expect(session.canSend("composition/mode")).toBe(false);
    expect(() => session.setMode("Manipulated")).toThrow();
  });
});

function waitFor(cond: () => boolean, ms: number, what: string): Promise<void> {
  return new Promise((resolve, reject) => {
    const start = Date.now();
    const poll = () => {
      if (cond()) return resolve();
      if (Date.now() - start > ms) return reject(new Error(`timeout waiting for ${what}`));
      setTimeout(poll, 50);
    };
    poll();
  });
}
