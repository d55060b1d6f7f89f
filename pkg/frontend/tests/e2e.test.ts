// End-to-end: drive a full game through the live server over HTTP and
// WebSocket, with the scripted human picking only mask-legal actions —
// exactly what the browser client does.

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";
import { SessionStore, renderModel, actionForClick } from "../src/state.js";
import { Frame, Snapshot } from "../src/types.js";

const PORT = 8765 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/sessions/none`);
      if (response.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "sls.cli", "serve", "--port", String(PORT), "--host", "127.0.0.1"],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

async function createHumanVsRandoms(seed: number): Promise<Snapshot> {
  const response = await fetch(`${BASE}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({
      seats: [
        { type: "human" },
        { type: "random" },
        { type: "random" },
        { type: "random" },
      ],
      seed,
    }),
  });
  expect(response.status).toBe(200);
  return (await response.json()) as Snapshot;
}

describe("full game over the wire", () => {
  it("a scripted human completes a game with zero illegal submissions", async () => {
    const created = await createHumanVsRandoms(21);
    const store = new SessionStore();
    store.applySnapshot(created);

    const socket = new WebSocket(
      `ws://127.0.0.1:${PORT}/sessions/${created.session_id}/stream?since=-1`,
    );
    const received: Frame[] = [];
    const closed = new Promise<void>((resolve) => socket.on("close", () => resolve()));
    socket.on("message", (raw) => {
      const body = JSON.parse(String(raw));
      if (body.kind === "frame") {
        received.push(body as Frame);
        store.applyFrame(body as Frame);
      }
    });

    let submissions = 0;
    let rejections = 0;
    let pick = 0;
    while (!store.done && submissions < 300) {
      const snapshot = (await (
        await fetch(`${BASE}/sessions/${created.session_id}`)
      ).json()) as Snapshot;
      store.refreshMask(snapshot);
      if (store.done) break;
      expect(snapshot.current_player).toBe(0); // randoms were auto-played
      const model = renderModel(store, 0);
      const choices = [
        ...model.clickableRows.map((row) => ({ kind: "row" as const, index: row })),
        ...model.clickableColors.map((c) => ({ kind: "color" as const, index: c })),
      ];
      expect(choices.length).toBeGreaterThan(0);
      const choice = choices[pick % choices.length];
      pick += 3; // deterministic spread over the legal set
      const action = actionForClick(model, choice.kind, choice.index);
      expect(action).not.toBeNull();
      const response = await fetch(
        `${BASE}/sessions/${created.session_id}/moves`,
        {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({ seat: 0, action }),
        },
      );
      submissions += 1;
      if (response.status !== 200) {
        rejections += 1;
      } else {
        store.refreshMask((await response.json()) as Snapshot);
      }
    }

    expect(rejections).toBe(0); // mask-derived choices are never illegal
    expect(store.done).toBe(true);
    expect(store.state?.winner).not.toBeNull();

    await closed; // server closes the stream once the game finished
    const versions = received.map((f) => f.version);
    expect(versions[0]).toBe(0);
    for (let i = 1; i < versions.length; i += 1) {
      expect(versions[i]).toBe(versions[i - 1] + 1); // gapless
    }
    const finalVersion = (await (
      await fetch(`${BASE}/sessions/${created.session_id}`)
    ).json()) as Snapshot;
    expect(versions.at(-1)).toBe(finalVersion.version);
  }, 60_000);

  it("forced deepest-chip assignments render with their annotation", async () => {
    for (let seed = 0; seed < 40; seed += 1) {
      const response = await fetch(`${BASE}/sessions`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          seats: [
            { type: "random" },
            { type: "random" },
            { type: "random" },
            { type: "random" },
          ],
          seed,
          spectate: true,
        }),
      });
      const created = (await response.json()) as Snapshot;
      // replay the full backlog through the feed builder: frames only, so
      // the final-version snapshot cannot mark the backlog stale
      const store = new SessionStore();
      const socket = new WebSocket(
        `ws://127.0.0.1:${PORT}/sessions/${created.session_id}/stream?since=-1`,
      );
      await new Promise<void>((resolve, reject) => {
        socket.on("message", (raw) => {
          const body = JSON.parse(String(raw));
          if (body.kind === "frame") {
            store.applyFrame(body as Frame);
          }
        });
        socket.on("close", () => resolve());
        socket.on("error", reject);
      });
      const annotated = store.feed.filter((entry) =>
        entry.text.includes("deepest chip"),
      );
      if (annotated.length > 0) {
        expect(annotated[0].text).toMatch(/takes the turn \(deepest chip\)/);
        return;
      }
    }
    throw new Error("no forced deepest assignment found in the seed range");
  }, 60_000);
});
