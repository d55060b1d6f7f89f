// Client-side session state: version-ordered frame application and the
// pure derivations the renderer consumes. No rule logic lives here; the
// board, panels, and clickable choices all come from server data.

import {
  COLOR_NAMES,
  Frame,
  GameEventJson,
  GameStateJson,
  PhaseName,
  SeatInfo,
  Snapshot,
} from "./types.js";

export interface FeedEntry {
  version: number;
  text: string;
}

export interface PlayerPanel {
  player: number;
  name: string;
  reserve: number;
  prisoners: { color: number; count: number }[];
  eliminated: boolean;
  isCurrent: boolean;
  isWinner: boolean;
}

export interface RenderModel {
  board: number[][]; // bottom-first piles, straight from the server state
  panels: PlayerPanel[];
  phase: PhaseName | null;
  phaseLabel: string;
  currentPlayer: number;
  done: boolean;
  winner: number | null;
  clickableRows: number[];
  clickableColors: number[];
  feed: FeedEntry[];
  version: number;
}

const PHASE_LABELS: Record<PhaseName, string> = {
  choose_pile: "choose a pile",
  choose_chip: "choose a chip color to place",
  choose_next_player: "choose the next player",
  eliminate_chip: "choose a chip color to kill",
};

export function describeEvent(event: GameEventJson): string {
  const name = (p: number | undefined) =>
    p === undefined ? "someone" : COLOR_NAMES[p];
  switch (event.kind) {
    case "session_started":
      return `Game started (seed ${event.seed})`;
    case "move_applied":
      return `${name(event.player)} acted`;
    case "chip_placed":
      return `${name(event.player)} placed a ${name(event.color).toLowerCase()} chip on pile ${
        (event.row ?? 0) + 1
      }`;
    case "pile_captured":
      return `${name(event.player)} captured pile ${(event.row ?? 0) + 1}`;
    case "chip_killed":
      return `A ${name(event.color).toLowerCase()} chip was killed on pile ${
        (event.row ?? 0) + 1
      }`;
    case "pile_destroyed":
      return `Pile ${(event.row ?? 0) + 1} was destroyed`;
    case "player_eliminated":
      return `${name(event.player)} was eliminated`;
    case "turn_assigned":
      if (event.reason === "deepest") {
        return `${name(event.player)} takes the turn (deepest chip)`;
      }
      if (event.reason === "backtrack") {
        return `Turn backtracks to ${name(event.player)}`;
      }
      if (event.reason === "random") {
        return `Turn falls to ${name(event.player)} at random`;
      }
      if (event.reason === "capture") {
        return `${name(event.player)} plays on after the capture`;
      }
      return `${name(event.player)} was chosen to play next`;
    case "game_over":
      return `Game over: ${name(event.player)} wins`;
    case "max_steps_reached":
      return "Game stopped at the step limit";
    default:
      return event.kind;
  }
}

export class SessionStore {
  sessionId = "";
  version = -1;
  state: GameStateJson | null = null;
  mask: boolean[] = new Array(10).fill(false);
  seats: SeatInfo[] = [];
  done = false;
  feed: FeedEntry[] = [];
  private pending = new Map<number, Frame>();

  applySnapshot(snapshot: Snapshot): void {
    this.sessionId = snapshot.session_id;
    // a stale snapshot must never roll the client backwards
    if (snapshot.version >= this.version) {
      this.version = snapshot.version;
      this.state = snapshot.state;
      this.mask = snapshot.mask;
      this.done = snapshot.done;
    }
    this.seats = snapshot.seats;
    this.drainPending();
  }

  /** Apply a frame if it is next in line; buffer future frames, drop stale
   * ones. Returns true when the visible state advanced. */
  applyFrame(frame: Frame): boolean {
    if (frame.version <= this.version) {
      return false; // stale or duplicate
    }
    if (frame.version > this.version + 1) {
      this.pending.set(frame.version, frame);
      return false;
    }
    this.commit(frame);
    this.drainPending();
    return true;
  }

  /** The mask only travels with snapshots; refresh it after catching up. */
  refreshMask(snapshot: Snapshot): void {
    if (snapshot.version >= this.version) {
      this.applySnapshot(snapshot);
    }
  }

  private commit(frame: Frame): void {
    this.version = frame.version;
    this.state = frame.state;
    if (frame.event.kind === "game_over" || frame.event.kind === "max_steps_reached") {
      this.done = true;
    }
    this.feed.push({ version: frame.version, text: describeEvent(frame.event) });
  }

  private drainPending(): void {
    let next = this.pending.get(this.version + 1);
    while (next) {
      this.pending.delete(next.version);
      this.commit(next);
      next = this.pending.get(this.version + 1);
    }
  }
}

export function renderModel(store: SessionStore, mySeat: number | null): RenderModel {
  const state = store.state;
  if (!state) {
    throw new Error("no state yet");
  }
  const winner = state.winner;
  const panels: PlayerPanel[] = state.holdings.map((row, p) => ({
    player: p,
    name: COLOR_NAMES[p],
    reserve: row[p],
    prisoners: row
      .map((count, color) => ({ color, count }))
      .filter((entry) => entry.color !== p && entry.count > 0),
    eliminated: state.eliminated[p],
    isCurrent: !store.done && state.current_player === p,
    isWinner: winner === p,
  }));

  const myTurn =
    mySeat !== null && !store.done && state.current_player === mySeat;
  const clickableRows: number[] = [];
  const clickableColors: number[] = [];
  if (myTurn) {
    for (let action = 0; action < 6; action += 1) {
      if (store.mask[action]) clickableRows.push(action);
    }
    for (let action = 6; action < 10; action += 1) {
      if (store.mask[action]) clickableColors.push(action - 6);
    }
  }

  return {
    board: state.board,
    panels,
    phase: store.done ? null : state.phase,
    phaseLabel: store.done
      ? winner !== null
        ? `game over, ${COLOR_NAMES[winner]} wins`
        : "game over"
      : PHASE_LABELS[state.phase],
    currentPlayer: state.current_player,
    done: store.done,
    winner,
    clickableRows,
    clickableColors,
    feed: store.feed,
    version: store.version,
  };
}

/** Translate a click into the wire action id, or null if it is not allowed. */
export function actionForClick(
  model: RenderModel,
  kind: "row" | "color",
  index: number,
): number | null {
  if (kind === "row") {
    return model.clickableRows.includes(index) ? index : null;
  }
  return model.clickableColors.includes(index) ? 6 + index : null;
}
