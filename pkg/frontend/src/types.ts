// Wire types for the game server's HTTP/WebSocket API.

export type PhaseName =
  | "choose_pile"
  | "choose_chip"
  | "choose_next_player"
  | "eliminate_chip";

export interface GameStateJson {
  board: number[][];
  holdings: number[][];
  dead: number[];
  eliminated: boolean[];
  phase: PhaseName;
  current_player: number;
  step_count: number;
  selected_row: number | null;
  capture_row: number | null;
  choice_options: number[] | null;
  winner: number | null;
}

export interface SeatInfo {
  type: "human" | "agent" | "random";
  variant: string | null;
}

export interface Snapshot {
  session_id: string;
  version: number;
  state: GameStateJson;
  mask: boolean[];
  seats: SeatInfo[];
  current_player: number;
  done: boolean;
  winner: number | null;
}

export interface GameEventJson {
  kind: string;
  player?: number;
  color?: number;
  row?: number;
  reason?: string;
  payoff?: number[];
  action?: number;
  seed?: number;
}

export interface Frame {
  version: number;
  event: GameEventJson;
  state: GameStateJson;
}

export interface SeatRequest {
  type: "human" | "agent" | "random";
  variant?: string;
  checkpoint?: string;
}

export interface CreateSessionRequest {
  seats: SeatRequest[];
  seed?: number;
  spectate?: boolean;
}

export const COLOR_NAMES = ["Blue", "Green", "Red", "Yellow"] as const;
export const COLOR_CSS = ["#3a6ea8", "#3f8f4e", "#bf4040", "#c9a227"] as const;
