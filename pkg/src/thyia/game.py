"""Seeded forward model over GDF games.

GameState is a value: copy_state yields a fully independent state (including
the rng stream), so copies can be advanced on different threads with no
coordination.  advance() never mutates its input.  All stochasticity flows
through the state's own rng stream, so equal states advanced with equal
actions yield equal states, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from importlib import resources

from .gdf import (
    ALL_COLLECTED,
    AVATAR_DEAD,
    AVATAR_ON_GOAL,
    FLOOR,
    TIMEOUT,
    WIN,
    GameSpec,
    Kind,
    parse_gdf,
)


class Action(IntEnum):
    """Fixed, game-independent action ordering: policy vectors align on it."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    NIL = 4


ACTIONS = tuple(Action)
NUM_ACTIONS = len(ACTIONS)
_DELTAS = {Action.UP: (0, -1), Action.DOWN: (0, 1), Action.LEFT: (-1, 0), Action.RIGHT: (1, 0)}
_MOVE_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)  # chaser tie-break order

RUNNING = "running"


class TerminalStateError(RuntimeError):
    """advance() called on a state that is already win or loss."""


_MASK64 = (1 << 64) - 1


class GameRng:
    """xorshift64* stream with a single-integer state.

    Forward-model states are copied millions of times per planning run, so
    the rng state must be O(1) to clone and to persist; stream quality is
    ample for move-noise decisions.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.seed(seed)

    def seed(self, value: int) -> None:
        # splitmix64 scramble: nearby seeds give unrelated streams
        z = (int(value) + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        self.state = (z ^ (z >> 31)) or 1  # the all-zero state is absorbing

    def _next(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & _MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & _MASK64

    def random(self) -> float:
        return self._next() / 18446744073709551616.0  # 2**64

    def randrange(self, n: int) -> int:
        return self._next() % n  # modulo bias is negligible for tiny n

    def getstate(self) -> int:
        return self.state

    def setstate(self, state: int) -> None:
        self.state = int(state)

    def copy(self) -> "GameRng":
        clone = GameRng.__new__(GameRng)
        clone.state = self.state
        return clone


@dataclass(frozen=True)
class _Layout:
    """Static geometry shared by every state of one spec."""

    width: int
    height: int
    walls: frozenset[tuple[int, int]]
    lethals: dict[tuple[int, int], str]
    goals: dict[tuple[int, int], str]


def build_layout(spec: GameSpec) -> _Layout:
    walls = set()
    lethals = {}
    goals = {}
    for y, row in enumerate(spec.level):
        for x, ch in enumerate(row):
            if ch == FLOOR:
                continue
            kind = spec.sprite(ch).kind
            if kind is Kind.SOLID:
                walls.add((x, y))
            elif kind is Kind.LETHAL:
                lethals[(x, y)] = ch
            elif kind is Kind.GOAL:
                goals[(x, y)] = ch
    return _Layout(spec.width, spec.height, frozenset(walls), lethals, goals)


@dataclass
class GameState:
    spec: GameSpec
    tick: int
    score: int
    status: str  # RUNNING | WIN | LOSS
    avatar: tuple[int, int]
    avatar_alive: bool
    keys_held: int
    collectibles: dict[tuple[int, int], str]
    keys: dict[tuple[int, int], str]
    doors: dict[tuple[int, int], str]
    chasers: list[tuple[int, int, str]]
    rng: GameRng = field(repr=False)
    layout: _Layout = field(repr=False)  # derived from spec, shared across copies

    @property
    def running(self) -> bool:
        return self.status == RUNNING

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GameState):
            return NotImplemented
        return (
            self.spec is other.spec
            and self.tick == other.tick
            and self.score == other.score
            and self.status == other.status
            and self.avatar == other.avatar
            and self.avatar_alive == other.avatar_alive
            and self.keys_held == other.keys_held
            and self.collectibles == other.collectibles
            and self.keys == other.keys
            and self.doors == other.doors
            and self.chasers == other.chasers
            and self.rng.getstate() == other.rng.getstate()
        )

    def reseed(self, seed: int) -> None:
        """Replace the rng stream. Used by planners to branch imagined futures."""
        self.rng.seed(seed)


@dataclass(frozen=True)
class GridObservation:
    """W×H bit-set matrix: cells[y][x] has bit (1 << kind) set per kind present."""

    width: int
    height: int
    cells: tuple[tuple[int, ...], ...]

    def kinds_at(self, x: int, y: int) -> set[Kind]:
        mask = self.cells[y][x]
        return {k for k in Kind if mask & (1 << k)}

    def to_lists(self) -> list[list[int]]:
        return [list(row) for row in self.cells]


@dataclass
class ScoreBounds:
    """Running min/max score seen for one game across the agent's lifetime."""

    low: int = 0
    high: int = 0

    def update(self, score: int) -> None:
        self.low = min(self.low, score)
        self.high = max(self.high, score)


def load_level(spec: GameSpec, seed: int) -> GameState:
    """Fresh episode state: tick 0, score 0, running, rng seeded from `seed`."""
    avatar = None
    collectibles: dict[tuple[int, int], str] = {}
    keys: dict[tuple[int, int], str] = {}
    doors: dict[tuple[int, int], str] = {}
    chasers: list[tuple[int, int, str]] = []
    for y, row in enumerate(spec.level):
        for x, ch in enumerate(row):
            if ch == FLOOR:
                continue
            kind = spec.sprite(ch).kind
            if kind is Kind.AVATAR:
                avatar = (x, y)
            elif kind is Kind.COLLECTIBLE:
                collectibles[(x, y)] = ch
            elif kind is Kind.KEY:
                keys[(x, y)] = ch
            elif kind is Kind.DOOR:
                doors[(x, y)] = ch
            elif kind is Kind.CHASER:
                chasers.append((x, y, ch))
    assert avatar is not None  # guaranteed by spec validation
    return GameState(
        spec=spec,
        tick=0,
        score=0,
        status=RUNNING,
        avatar=avatar,
        avatar_alive=True,
        keys_held=0,
        collectibles=collectibles,
        keys=keys,
        doors=doors,
        chasers=chasers,
        rng=GameRng(seed),
        layout=build_layout(spec),
    )


def copy_state(state: GameState) -> GameState:
    """Deep, independent copy; advancing the copy never alters the original."""
    return GameState(
        spec=state.spec,
        tick=state.tick,
        score=state.score,
        status=state.status,
        avatar=state.avatar,
        avatar_alive=state.avatar_alive,
        keys_held=state.keys_held,
        collectibles=dict(state.collectibles),
        keys=dict(state.keys),
        doors=dict(state.doors),
        chasers=list(state.chasers),
        rng=state.rng.copy(),
        layout=state.layout,
    )


def _blocked_for_avatar(state: GameState, layout: _Layout, pos: tuple[int, int]) -> bool:
    x, y = pos
    if not (0 <= x < layout.width and 0 <= y < layout.height):
        return True
    if pos in layout.walls:
        return True
    if pos in state.doors and state.keys_held == 0:
        return True
    return False


def _blocked_for_chaser(state: GameState, layout: _Layout, pos: tuple[int, int]) -> bool:
    x, y = pos
    if not (0 <= x < layout.width and 0 <= y < layout.height):
        return True
    return pos in layout.walls or pos in state.doors


def advance(state: GameState, action: Action) -> GameState:
    """One tick of the forward model; returns a new state, input untouched.

    Sub-step order is fixed: (1) avatar moves, (2) chasers move, (3)
    interactions resolve, (4) termination rules fire in declaration order,
    (5) tick increments.
    """
    if state.status != RUNNING:
        raise TerminalStateError(f"cannot advance a {state.status} state")
    spec = state.spec
    layout = state.layout
    s = copy_state(state)

    # 1. avatar move (blocked by solids and locked doors)
    if action != Action.NIL:
        dx, dy = _DELTAS[Action(action)]
        target = (s.avatar[0] + dx, s.avatar[1] + dy)
        if not _blocked_for_avatar(s, layout, target):
            if target in s.doors:
                door = s.doors.pop(target)
                s.keys_held -= 1
                s.score += spec.sprite(door).score
            s.avatar = target

    # 2. chasers: greedy Manhattan step toward the avatar, or a uniformly
    #    random step with probability noise; ties broken Up>Down>Left>Right
    for i, (cx, cy, sym) in enumerate(s.chasers):
        noise = spec.sprite(sym).noise
        step = None
        if noise > 0.0 and s.rng.random() < noise:
            step = _MOVE_ACTIONS[s.rng.randrange(4)]
            dx, dy = _DELTAS[step]
            target = (cx + dx, cy + dy)
            if _blocked_for_chaser(s, layout, target):
                target = (cx, cy)
        else:
            ax, ay = s.avatar
            dist = abs(ax - cx) + abs(ay - cy)
            target = (cx, cy)
            for cand in _MOVE_ACTIONS:
                dx, dy = _DELTAS[cand]
                nxt = (cx + dx, cy + dy)
                if abs(ax - nxt[0]) + abs(ay - nxt[1]) < dist and not _blocked_for_chaser(s, layout, nxt):
                    target = nxt
                    break
        s.chasers[i] = (target[0], target[1], sym)

    # 3. interactions at the avatar's cell
    pos = s.avatar
    if pos in s.collectibles:
        s.score += spec.sprite(s.collectibles.pop(pos)).score
    if pos in s.keys:
        s.score += spec.sprite(s.keys.pop(pos)).score
        s.keys_held += 1
    touched_lethal = pos in layout.lethals or any(c[0] == pos[0] and c[1] == pos[1] for c in s.chasers)
    if touched_lethal:
        s.avatar_alive = False
        s.status = "loss"
    elif pos in layout.goals:
        rule = spec.goal_rule()
        if rule is not None:
            s.score += spec.sprite(layout.goals[pos]).score
            s.status = rule.outcome

    # 4. termination rules, declaration order; first match wins
    if s.status == RUNNING:
        for rule in spec.terminations:
            fired = False
            if rule.condition == ALL_COLLECTED:
                fired = not s.collectibles
            elif rule.condition == AVATAR_ON_GOAL:
                fired = s.avatar_alive and s.avatar in layout.goals
            elif rule.condition == AVATAR_DEAD:
                fired = not s.avatar_alive
            elif rule.condition == TIMEOUT:
                fired = s.tick + 1 >= rule.ticks
            if fired:
                s.status = rule.outcome
                break

    # 5. clock
    s.tick += 1
    return s


def observe(state: GameState) -> GridObservation:
    """Pure snapshot of the grid as per-cell kind bit-sets."""
    layout = state.layout
    w, h = layout.width, layout.height
    grid = [[0] * w for _ in range(h)]
    for (x, y) in layout.walls:
        grid[y][x] |= 1 << Kind.SOLID
    for (x, y) in layout.lethals:
        grid[y][x] |= 1 << Kind.LETHAL
    for (x, y) in layout.goals:
        grid[y][x] |= 1 << Kind.GOAL
    for (x, y) in state.collectibles:
        grid[y][x] |= 1 << Kind.COLLECTIBLE
    for (x, y) in state.keys:
        grid[y][x] |= 1 << Kind.KEY
    for (x, y) in state.doors:
        grid[y][x] |= 1 << Kind.DOOR
    for (x, y, _) in state.chasers:
        grid[y][x] |= 1 << Kind.CHASER
    if state.avatar_alive:
        ax, ay = state.avatar
        grid[ay][ax] |= 1 << Kind.AVATAR
    return GridObservation(w, h, tuple(tuple(row) for row in grid))


def heuristic_value(state: GameState, bounds: ScoreBounds) -> float:
    """State value in [0,1]: win 1.0, loss 0.0, running mapped into [0.1, 0.9].

    Running states use 0.1 + 0.8 * (score-low)/(high-low), clamped, with
    degenerate bounds mapping to 0.5; terminal outcomes keep the extremes
    exclusively.
    """
    if state.status == WIN:
        return 1.0
    if state.status != RUNNING:
        return 0.0
    if bounds.high == bounds.low:
        return 0.5
    ratio = (state.score - bounds.low) / (bounds.high - bounds.low)
    return 0.1 + 0.8 * min(1.0, max(0.0, ratio))


# ---------------------------------------------------------------------------
# built-in suite

_BUILTIN_FILES = ("coin_corridor.gdf", "coin_maze.gdf", "dodge_runner.gdf", "key_door.gdf")
_builtins: dict[str, GameSpec] | None = None


def builtin_games() -> dict[str, GameSpec]:
    """Name → spec for the shipped suite, in stable order."""
    global _builtins
    if _builtins is None:
        loaded = {}
        for fname in _BUILTIN_FILES:
            text = resources.files("thyia.games").joinpath(fname).read_text(encoding="utf-8")
            spec = parse_gdf(text)
            loaded[spec.name] = spec
        _builtins = loaded
    return dict(_builtins)
