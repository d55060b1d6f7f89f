// Application wiring: new-game form, WebSocket stream, move submission.

import { createSession, fetchSnapshot, streamUrl, submitMove } from "./api.js";
import { actionForClick, renderModel, SessionStore } from "./state.js";
import { paint } from "./render.js";
import { Frame, SeatRequest, Snapshot } from "./types.js";

const base = window.location.origin;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private store = new SessionStore();
  private mySeat: number | null = null;
  private socket: WebSocket | null = null;
  private inFlight = false;

  async start(): Promise<void> {
    const form = el<HTMLFormElement>("new-game");
    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      await this.newGame();
    });
  }

  private seatRequests(): SeatRequest[] {
    const mySeat = Number(el<HTMLSelectElement>("seat").value);
    this.mySeat = mySeat;
    const opponents = [0, 1, 2].map(
      (i) => el<HTMLSelectElement>(`opponent-${i}`).value,
    );
    const seats: SeatRequest[] = [];
    let nextOpponent = 0;
    for (let seat = 0; seat < 4; seat += 1) {
      if (seat === mySeat) {
        seats.push({ type: "human" });
      } else {
        const pick = opponents[nextOpponent];
        nextOpponent += 1;
        seats.push(
          pick === "random" ? { type: "random" } : { type: "agent", variant: pick },
        );
      }
    }
    return seats;
  }

  private async newGame(): Promise<void> {
    const error = el<HTMLElement>("error");
    error.textContent = "";
    const seedText = el<HTMLInputElement>("seed").value.trim();
    const request = {
      seats: this.seatRequests(),
      ...(seedText ? { seed: Number(seedText) } : {}),
    };
    try {
      const snapshot = await createSession(base, request);
      this.store = new SessionStore();
      this.store.applySnapshot(snapshot);
      this.subscribe(snapshot);
      this.repaint();
    } catch (exc) {
      error.textContent = String(exc);
    }
  }

  private subscribe(snapshot: Snapshot): void {
    this.socket?.close();
    const socket = new WebSocket(streamUrl(base, snapshot.session_id, snapshot.version));
    socket.onmessage = (message) => {
      const body = JSON.parse(message.data as string);
      if (body.kind === "snapshot") {
        this.store.applySnapshot(body as Snapshot);
      } else {
        this.store.applyFrame(body as Frame);
      }
      void this.afterUpdate();
    };
    this.socket = socket;
  }

  private async afterUpdate(): Promise<void> {
    // the legality mask only travels with snapshots; pull a fresh one when
    // the turn lands on the human seat
    const state = this.store.state;
    if (
      state &&
      !this.store.done &&
      this.mySeat !== null &&
      state.current_player === this.mySeat
    ) {
      const snapshot = await fetchSnapshot(base, this.store.sessionId);
      this.store.refreshMask(snapshot);
    }
    this.repaint();
  }

  private repaint(): void {
    if (!this.store.state) return;
    const model = renderModel(this.store, this.mySeat);
    paint(el("game"), model, {
      onRow: (row) => void this.act("row", row),
      onColor: (color) => void this.act("color", color),
    });
  }

  private async act(kind: "row" | "color", index: number): Promise<void> {
    if (this.inFlight || this.mySeat === null || !this.store.state) return;
    const model = renderModel(this.store, this.mySeat);
    const action = actionForClick(model, kind, index);
    if (action === null) return; // disabled control: inert
    this.inFlight = true;
    try {
      const outcome = await submitMove(base, this.store.sessionId, this.mySeat, action);
      if ("rejected" in outcome) {
        // out-of-date view: fall back to the authoritative snapshot
        const snapshot = await fetchSnapshot(base, this.store.sessionId);
        this.store.refreshMask(snapshot);
      } else {
        this.store.refreshMask(outcome);
      }
    } finally {
      this.inFlight = false;
      this.repaint();
    }
  }
}

void new App().start();
