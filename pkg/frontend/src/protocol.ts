// Wire types for the stage-server WebSocket gateway. Messages are JSON
// objects {topic, seq, payload} in both directions, mirroring bus envelopes.

export type Role = "Manipulator" | "Director" | "DigitalArtist" | "Console";

export type Message = {
  topic: string;
  seq: number;
  payload: Record<string, unknown>;
};

export type StageRect = { x0: number; z0: number; x1: number; z1: number };

export type SceneSummary = {
  name: string;
  stage: StageRect;
  obstacles: StageRect[];
  zones: { id: string; d: StageRect; yaw: number }[];
  presets: { name: string; x: number; z: number; yaw: number }[];
  lights: string[];
  decimation: number;
};

export type Welcome = {
  station_id: number;
  role: Role;
  scene: SceneSummary;
};

export type Health = "fresh" | "stale" | "missing";

export type FrameSummary = {
  tick: number;
  owner: "MocaptorFull" | "PathfinderLocomotion";
  disposition: { x: number; z: number; yaw: number };
  mode: "Fixed" | "Manipulated";
  camera: { pos: number[]; yaw: number; pitch: number; fov: number };
  lights: Record<string, { pos: number[]; intensity: number }>;
  health: Record<string, Health>;
  regions: Record<string, string>;
  pose: { joints: number };
};

export type Ack = { for_seq: number; ok: boolean; error?: string };

// Which command topics each role may emit. The UI hides or disables
// anything outside this table, so an unauthorized command cannot be sent
// from the rendered controls at all.
const CAPABILITIES: Record<Role, readonly string[]> = {
  Manipulator: [
    "pathfind/takeover",
    "pathfind/release",
    "preset/apply",
    "puppeteer/refmove",
  ],
  Director: ["composition/mode", "composition/camera", "composition/light", "preset/apply"],
  DigitalArtist: ["composition/mode", "composition/camera", "composition/light"],
  Console: [],
};

export function roleAllows(role: Role, topic: string): boolean {
  return CAPABILITIES[role].includes(topic);
}

export function parseMessage(raw: string): Message | null {
  try {
    const data = JSON.parse(raw);
    if (typeof data.topic !== "string") return null;
    return {
      topic: data.topic,
      seq: typeof data.seq === "number" ? data.seq : 0,
      payload: data.payload ?? {},
    };
  } catch {
    return null;
  }
}
