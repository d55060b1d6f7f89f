"""Rules engine for the four-player strategy game So Long Sucker.

This implements the sequential, negotiation-free variant with a winner-takes-
all payoff. Each player's color starts with a reserve of chips; on a turn the
mover places a chip of any color that still has reserve stock, drawn from
that reserve. Two consecutive chips of the same color capture the pile for
that color's player, who kills one chip and keeps the other colors' chips as
prisoner trophies (recovered chips of the capturer's own color are retired
from play). A player whose reserve is exhausted when their turn begins is
eliminated and every remaining chip of their color held as a prisoner dies
with them; the last player alive wins, even with nothing left in hand.

Everything here is deterministic and value-like: ``apply`` never mutates its
input state, and all randomness (starting player, fallback turn assignment)
flows through the seeded generator carried inside :class:`GameState`.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional


N_PLAYERS = 4

TURN_CHOSEN = "chosen"
TURN_DEEPEST = "deepest"
TURN_CAPTURE = "capture"
TURN_BACKTRACK = "backtrack"
TURN_RANDOM = "random"


class Phase(Enum):
    """Decision type the current player is facing."""

    CHOOSE_PILE = "choose_pile"
    CHOOSE_CHIP = "choose_chip"
    CHOOSE_NEXT_PLAYER = "choose_next_player"
    ELIMINATE_CHIP = "eliminate_chip"


PHASE_ORDER = (
    Phase.CHOOSE_PILE,
    Phase.CHOOSE_CHIP,
    Phase.CHOOSE_NEXT_PLAYER,
    Phase.ELIMINATE_CHIP,
)


class IllegalMoveError(ValueError):
    """A move that the rules reject; carries a machine-readable reason."""

    WRONG_PHASE = "wrong_phase"
    EMPTY_HAND = "empty_hand"
    COLOR_ABSENT = "color_absent"
    ROW_OUT_OF_RANGE = "row_out_of_range"
    NOT_ELIGIBLE = "not_eligible"
    GAME_OVER = "game_over"

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"illegal move ({reason})" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class GameConfig:
    """Immutable game parameters.

    The player count is fixed at four; chips per player, board rows, the
    winner's payoff, and the RNG seed are configurable.
    """

    n_players: int = 4
    n_chips: int = 5
    n_rows: int = 6
    payoff: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_players != N_PLAYERS:
            raise ValueError(f"n_players must be {N_PLAYERS}, got {self.n_players}")
        if self.n_chips < 1:
            raise ValueError("n_chips must be >= 1")
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        if self.payoff < 1:
            raise ValueError("payoff must be >= 1")

    @property
    def max_pile(self) -> int:
        """Upper bound on pile length: every chip in play on one pile."""
        return self.n_players * self.n_chips


@dataclass(frozen=True)
class Move:
    """A single decision: either a row (pile slot) or a color/player id."""

    kind: str  # "row" | "color"
    index: int

    @staticmethod
    def row(index: int) -> "Move":
        if index < 0:
            raise ValueError("row index must be >= 0")
        return Move("row", index)

    @staticmethod
    def color(index: int) -> "Move":
        if not 0 <= index < N_PLAYERS:
            raise ValueError(f"color id must be in [0, {N_PLAYERS})")
        return Move("color", index)


@dataclass(frozen=True)
class GameEvent:
    """Audit-trail record emitted by ``apply`` in causal order."""

    kind: str
    player: Optional[int] = None
    color: Optional[int] = None
    row: Optional[int] = None
    reason: Optional[str] = None
    payoff: Optional[tuple] = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for key in ("player", "color", "row", "reason"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.payoff is not None:
            out["payoff"] = list(self.payoff)
        return out


@dataclass(frozen=True)
class NextPlayerOptions:
    """Outcome of the next-player rule after a non-capturing placement.

    Exactly one of the two applies: ``forced`` is the owner of the deepest
    chip when every color appears in the pile, otherwise ``choices`` holds
    the alive players whose color is absent (possibly empty).
    """

    forced: Optional[int]
    choices: frozenset

    @property
    def is_forced(self) -> bool:
        return self.forced is not None


@dataclass
class GameState:
    """Authoritative snapshot of one game.

    ``board`` rows are bottom-first chip color lists. ``holdings[i][j]`` is
    the number of color-``j`` chips held by player ``i``: the diagonal is
    each color's playable reserve, off-diagonal entries are prisoner
    trophies taken in captures (not playable). ``step_count`` is owned by
    the environment layer and is never advanced by ``apply``.
    """

    config: GameConfig
    board: list
    holdings: list
    dead: list
    eliminated: list
    current_player: int
    phase: Phase
    selected_row: Optional[int]
    capture_row: Optional[int]
    choice_options: Optional[tuple]
    pass_history: list
    step_count: int
    rng: random.Random
    terminal: Optional[int]

    def clone(self) -> "GameState":
        rng = random.Random()
        rng.setstate(self.rng.getstate())
        return GameState(
            config=self.config,
            board=[list(pile) for pile in self.board],
            holdings=[list(row) for row in self.holdings],
            dead=list(self.dead),
            eliminated=list(self.eliminated),
            current_player=self.current_player,
            phase=self.phase,
            selected_row=self.selected_row,
            capture_row=self.capture_row,
            choice_options=self.choice_options,
            pass_history=list(self.pass_history),
            step_count=self.step_count,
            rng=rng,
            terminal=self.terminal,
        )

    def hand_total(self, player: int) -> int:
        return sum(self.holdings[player])

    def reserve(self, color: int) -> int:
        """Playable chips left in a color's reserve."""
        return self.holdings[color][color]

    def alive_players(self) -> list:
        return [p for p in range(self.config.n_players) if not self.eliminated[p]]

    @property
    def is_terminal(self) -> bool:
        return self.terminal is not None


def new_game(config: GameConfig) -> GameState:
    """Start a game: full hands, empty board, random first player."""
    rng = random.Random(config.seed)
    holdings = [[0] * config.n_players for _ in range(config.n_players)]
    for p in range(config.n_players):
        holdings[p][p] = config.n_chips
    starter = rng.randrange(config.n_players)
    return GameState(
        config=config,
        board=[[] for _ in range(config.n_rows)],
        holdings=holdings,
        dead=[0] * config.n_players,
        eliminated=[False] * config.n_players,
        current_player=starter,
        phase=Phase.CHOOSE_PILE,
        selected_row=None,
        capture_row=None,
        choice_options=None,
        pass_history=[],
        step_count=0,
        rng=rng,
        terminal=None,
    )


def legal_moves(state: GameState) -> set:
    """Enumerate the moves ``apply`` would accept in this state."""
    if state.is_terminal:
        return set()
    phase = state.phase
    if phase is Phase.CHOOSE_PILE:
        # Any row works: empty rows start a pile, occupied rows extend one.
        return {Move.row(r) for r in range(state.config.n_rows)}
    if phase is Phase.CHOOSE_CHIP:
        # A color is playable while its reserve has stock; elimination
        # empties the reserve, so dead colors drop out automatically.
        return {
            Move.color(c)
            for c in range(state.config.n_players)
            if state.reserve(c) > 0
        }
    if phase is Phase.CHOOSE_NEXT_PLAYER:
        return {Move.color(p) for p in state.choice_options}
    # ELIMINATE_CHIP: any color present in the captured pile.
    pile = state.board[state.capture_row]
    return {Move.color(c) for c in set(pile)}


def next_player_options(state: GameState, row: int) -> NextPlayerOptions:
    """Who may be handed the turn after a non-capturing placement on ``row``.

    If the pile shows all four colors the turn is forced onto the owner of
    the bottom (deepest) chip. Otherwise any alive player whose color is
    absent from the pile and whose reserve is not exhausted is eligible,
    the mover included.
    """
    pile = state.board[row]
    if not pile:
        raise ValueError(f"row {row} is empty; no placement to resolve")
    colors_present = set(pile)
    if len(colors_present) == state.config.n_players:
        return NextPlayerOptions(forced=pile[0], choices=frozenset())
    eligible = frozenset(
        p
        for p in range(state.config.n_players)
        if not state.eliminated[p]
        and p not in colors_present
        and state.reserve(p) > 0
    )
    return NextPlayerOptions(forced=None, choices=eligible)


def winner(state: GameState):
    """The sole survivor and payoff vector, or ``None`` while 2+ are alive."""
    alive = state.alive_players()
    if len(alive) != 1:
        return None
    payoffs = [0] * state.config.n_players
    payoffs[alive[0]] = state.config.payoff
    return alive[0], tuple(payoffs)


def apply(state: GameState, move: Move) -> tuple:
    """Apply one legal move, returning ``(next_state, events)``.

    Raises :class:`IllegalMoveError` (with the input state untouched) when
    the move is not in ``legal_moves(state)``.
    """
    _validate(state, move)
    nxt = state.clone()
    events: list = []

    if state.phase is Phase.CHOOSE_PILE:
        nxt.selected_row = move.index
        nxt.phase = Phase.CHOOSE_CHIP
        return nxt, events

    if state.phase is Phase.CHOOSE_CHIP:
        _place_chip(nxt, move.index, events)
        return nxt, events

    if state.phase is Phase.CHOOSE_NEXT_PLAYER:
        mover = nxt.current_player
        nxt.pass_history.append(mover)
        nxt.current_player = move.index
        nxt.choice_options = None
        events.append(GameEvent("turn_assigned", player=move.index, reason=TURN_CHOSEN))
        _begin_turn(nxt, events)
        return nxt, events

    # ELIMINATE_CHIP: kill one chip of the chosen color, claim the rest.
    row = nxt.capture_row
    pile = nxt.board[row]
    kill_at = max(i for i, c in enumerate(pile) if c == move.index)
    pile.pop(kill_at)
    nxt.dead[move.index] += 1
    events.append(GameEvent("chip_killed", color=move.index, row=row))
    capturer = nxt.current_player
    for chip in pile:
        if chip == capturer:
            # Recovered chips of the capturer's own color are spent, not
            # returned to the reserve.
            nxt.dead[chip] += 1
        else:
            nxt.holdings[capturer][chip] += 1
    nxt.board[row] = []
    nxt.capture_row = None
    _begin_turn(nxt, events)
    return nxt, events


def _validate(state: GameState, move: Move) -> None:
    if state.is_terminal:
        raise IllegalMoveError(IllegalMoveError.GAME_OVER)
    phase = state.phase
    if phase is Phase.CHOOSE_PILE:
        if move.kind != "row":
            raise IllegalMoveError(IllegalMoveError.WRONG_PHASE, "expected a row")
        if not 0 <= move.index < state.config.n_rows:
            raise IllegalMoveError(IllegalMoveError.ROW_OUT_OF_RANGE, f"row {move.index}")
        return
    if move.kind != "color":
        raise IllegalMoveError(IllegalMoveError.WRONG_PHASE, "expected a color")
    if phase is Phase.CHOOSE_CHIP:
        if state.reserve(move.index) == 0:
            raise IllegalMoveError(
                IllegalMoveError.EMPTY_HAND,
                f"color {move.index} has no chips left in its reserve",
            )
    elif phase is Phase.CHOOSE_NEXT_PLAYER:
        if move.index not in state.choice_options:
            raise IllegalMoveError(
                IllegalMoveError.NOT_ELIGIBLE, f"player {move.index} not eligible"
            )
    else:  # ELIMINATE_CHIP
        if move.index not in state.board[state.capture_row]:
            raise IllegalMoveError(
                IllegalMoveError.COLOR_ABSENT, f"color {move.index} not in captured pile"
            )


def _place_chip(nxt: GameState, color: int, events: list) -> None:
    """Resolve a chip placement: capture check, then turn assignment."""
    mover = nxt.current_player
    row = nxt.selected_row
    nxt.selected_row = None
    nxt.holdings[color][color] -= 1  # chips are drawn from the color's reserve
    pile = nxt.board[row]
    pile.append(color)
    events.append(GameEvent("chip_placed", player=mover, color=color, row=row))

    if len(pile) >= 2 and pile[-1] == pile[-2]:
        captured_color = color
        if nxt.eliminated[captured_color]:
            # A dead player's color cannot claim the pile: every chip dies
            # and the mover keeps the turn. Unreachable through legal play
            # (elimination empties the reserve first) but kept as a guard
            # for synthetic states.
            for chip in pile:
                nxt.dead[chip] += 1
            nxt.board[row] = []
            events.append(GameEvent("pile_destroyed", row=row))
            events.append(GameEvent("turn_assigned", player=mover, reason=TURN_CAPTURE))
            _begin_turn(nxt, events)
        else:
            nxt.current_player = captured_color
            nxt.capture_row = row
            nxt.phase = Phase.ELIMINATE_CHIP
            events.append(GameEvent("pile_captured", player=captured_color, row=row))
            events.append(
                GameEvent("turn_assigned", player=captured_color, reason=TURN_CAPTURE)
            )
        return

    options = next_player_options(nxt, row)
    if options.is_forced and not nxt.eliminated[options.forced]:
        # No decision exists: the engine assigns the turn itself.
        nxt.current_player = options.forced
        events.append(
            GameEvent("turn_assigned", player=options.forced, reason=TURN_DEEPEST)
        )
        _begin_turn(nxt, events)
    elif not options.is_forced and options.choices:
        nxt.choice_options = tuple(sorted(options.choices))
        nxt.phase = Phase.CHOOSE_NEXT_PLAYER
    else:
        # Forced target already eliminated, or nobody is eligible.
        _fallback_turn(nxt, events)
        _begin_turn(nxt, events)


def _begin_turn(state: GameState, events: list) -> None:
    """Enter the choose-pile phase, eliminating broke players on the way.

    Elimination happens exactly when a player would start a turn with an
    exhausted reserve; every remaining chip of their color held prisoner
    dies with them. The turn then backtracks through the pass history and,
    if that runs dry, falls to a random alive player. Repeats until the
    turn lands on someone who can play or one player is left standing.
    """
    state.phase = Phase.CHOOSE_PILE
    while state.terminal is None:
        player = state.current_player
        if state.eliminated[player] or state.reserve(player) == 0:
            if not state.eliminated[player]:
                _eliminate(state, player, events)
            alive = state.alive_players()
            if len(alive) == 1:
                champ = alive[0]
                state.terminal = champ
                state.current_player = champ
                payoffs = [0] * state.config.n_players
                payoffs[champ] = state.config.payoff
                events.append(
                    GameEvent("game_over", player=champ, payoff=tuple(payoffs))
                )
                return
            _fallback_turn(state, events)
        else:
            return


def _eliminate(state: GameState, player: int, events: list) -> None:
    """Mark a player out and retire their color's chips still held in hands."""
    state.eliminated[player] = True
    for holder in range(state.config.n_players):
        captive = state.holdings[holder][player]
        if captive:
            state.dead[player] += captive
            state.holdings[holder][player] = 0
    events.append(GameEvent("player_eliminated", player=player))


def _fallback_turn(state: GameState, events: list) -> None:
    """Backtrack through the pass history; random alive player as last resort."""
    while state.pass_history:
        candidate = state.pass_history.pop()
        if not state.eliminated[candidate]:
            state.current_player = candidate
            events.append(
                GameEvent("turn_assigned", player=candidate, reason=TURN_BACKTRACK)
            )
            return
    alive = state.alive_players()
    pick = alive[state.rng.randrange(len(alive))]
    state.current_player = pick
    events.append(GameEvent("turn_assigned", player=pick, reason=TURN_RANDOM))


# --- canonical serialization ------------------------------------------------
#
# The JSON shape below is shared by the play server, replay files, and golden
# tests: board rows as bottom-first color-id arrays, the holdings matrix,
# per-color dead counts, per-player eliminated flags, the phase tag, current
# player, and step count. Phase-transient fields (selected_row, capture_row,
# choice_options) and the winner are included so mid-decision states render
# faithfully; they are null outside their phase.


def state_to_json(state: GameState) -> dict:
    return {
        "board": [list(pile) for pile in state.board],
        "holdings": [list(row) for row in state.holdings],
        "dead": list(state.dead),
        "eliminated": list(state.eliminated),
        "phase": state.phase.value,
        "current_player": state.current_player,
        "step_count": state.step_count,
        "selected_row": state.selected_row,
        "capture_row": state.capture_row,
        "choice_options": list(state.choice_options) if state.choice_options else None,
        "winner": state.terminal,
    }


def serialize_state(state: GameState) -> str:
    """Byte-stable JSON encoding used by golden and determinism tests."""
    return json.dumps(state_to_json(state), sort_keys=True, separators=(",", ":"))


def serialize_events(events) -> str:
    return json.dumps([e.to_json() for e in events], sort_keys=True, separators=(",", ":"))


def random_legal_playthrough(
    config: GameConfig, move_rng: random.Random, max_steps: int = 2000
) -> Iterator[tuple]:
    """Yield ``(state, move, next_state, events)`` for a uniformly random
    legal game; stops at game over or after ``max_steps`` moves.

    Test helper shared by the soundness and termination suites.
    """
    state = new_game(config)
    for _ in range(max_steps):
        if state.is_terminal:
            return
        moves = sorted(legal_moves(state), key=lambda m: (m.kind, m.index))
        move = moves[move_rng.randrange(len(moves))]
        nxt, events = apply(state, move)
        yield state, move, nxt, events
        state = nxt
