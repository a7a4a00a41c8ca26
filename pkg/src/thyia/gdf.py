"""Game Description Format (GDF): parsing, validation, canonical serialization.

A GDF file declares a grid game in four blocks::

    game <name>

    sprites
      <symbol> <name> <kind> [score=<int>] [noise=<float>]

    termination
      <condition> -> <outcome>

    level
    <grid rows>

'#' starts a comment everywhere except inside the level block, where every
character is a cell.  Blank lines are ignored.  The level block must be the
final block; its rows run to end of input.  Canonical serialization sorts
sprite declarations by symbol and keeps termination rules in declaration
order (order is semantically significant).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum

FLOOR = "."

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*$")


class Kind(IntEnum):
    """Sprite kinds. Values are the fixed, game-independent observation-plane ids."""

    AVATAR = 0
    SOLID = 1
    COLLECTIBLE = 2
    LETHAL = 3
    CHASER = 4
    KEY = 5
    DOOR = 6
    GOAL = 7


KIND_COUNT = len(Kind)
_KIND_BY_NAME = {k.name.lower(): k for k in Kind}

WIN = "win"
LOSS = "loss"
OUTCOMES = (WIN, LOSS)

ALL_COLLECTED = "all-collected"
AVATAR_ON_GOAL = "avatar-on-goal"
AVATAR_DEAD = "avatar-dead"
TIMEOUT = "timeout"
CONDITIONS = (ALL_COLLECTED, AVATAR_ON_GOAL, AVATAR_DEAD, TIMEOUT)


class GdfError(ValueError):
    """GDF parse or validation failure, with source position and a stable code.

    Codes are part of the public surface so callers (and tests) can identify
    the designated diagnostic without string matching.
    """

    def __init__(self, code: str, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message} [{code}]")
        self.code = code
        self.reason = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class SpriteDef:
    symbol: str
    name: str
    kind: Kind
    score: int = 0
    noise: float = 0.0


@dataclass(frozen=True)
class TerminationRule:
    condition: str
    outcome: str
    ticks: int = 0  # meaningful for timeout only

    def render(self) -> str:
        cond = f"{TIMEOUT} {self.ticks}" if self.condition == TIMEOUT else self.condition
        return f"{cond} -> {self.outcome}"


@dataclass(frozen=True)
class GameSpec:
    """Parsed, validated game: immutable and freely shareable across threads."""

    name: str
    sprites: tuple[SpriteDef, ...]  # sorted by symbol
    terminations: tuple[TerminationRule, ...]  # declaration order
    level: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.level[0])

    @property
    def height(self) -> int:
        return len(self.level)

    @property
    def timeout(self) -> int:
        for rule in self.terminations:
            if rule.condition == TIMEOUT:
                return rule.ticks
        raise AssertionError("validated spec always carries a timeout rule")

    @property
    def is_stochastic(self) -> bool:
        return any(s.noise > 0.0 for s in self.sprites)

    def sprite(self, symbol: str) -> SpriteDef:
        for s in self.sprites:
            if s.symbol == symbol:
                return s
        raise KeyError(symbol)

    def goal_rule(self) -> TerminationRule | None:
        for rule in self.terminations:
            if rule.condition == AVATAR_ON_GOAL:
                return rule
        return None


# ---------------------------------------------------------------------------
# parsing

def _err(code: str, message: str, line: int, col: int = 1) -> GdfError:
    return GdfError(code, message, line, col)


def _parse_sprite_line(text: str, line_no: int, col_base: int = 0) -> SpriteDef:
    parts = text.split()
    if len(parts) < 3:
        raise _err("bad-sprite", f"sprite line needs '<symbol> <name> <kind>': {text!r}", line_no)
    symbol, name, kind_word = parts[0], parts[1], parts[2]
    if len(symbol) != 1 or symbol == FLOOR:
        raise _err("bad-symbol", f"sprite symbol must be one character and not {FLOOR!r}", line_no)
    if not _NAME_RE.match(name):
        raise _err("bad-name", f"invalid sprite name {name!r}", line_no)
    if kind_word not in _KIND_BY_NAME:
        col = col_base + text.index(kind_word) + 1
        raise _err("unknown-kind", f"unknown sprite kind {kind_word!r}", line_no, col)
    kind = _KIND_BY_NAME[kind_word]

    score = 0
    noise = 0.0
    for extra in parts[3:]:
        key, sep, value = extra.partition("=")
        col = col_base + text.index(extra) + 1
        if not sep:
            raise _err("bad-attr", f"expected key=value, got {extra!r}", line_no, col)
        if key == "score":
            try:
                score = int(value)
            except ValueError:
                raise _err("bad-value", f"score must be an integer, got {value!r}", line_no, col) from None
        elif key == "noise":
            try:
                noise = float(value)
            except ValueError:
                raise _err("bad-value", f"noise must be a number, got {value!r}", line_no, col) from None
            if not 0.0 <= noise <= 1.0:
                raise _err("noise-range", f"noise must be in [0,1], got {value}", line_no, col)
        else:
            raise _err("bad-attr", f"unknown sprite attribute {key!r}", line_no, col)
    if noise > 0.0 and kind is not Kind.CHASER:
        raise _err("noise-kind", "noise only applies to chaser sprites", line_no)
    return SpriteDef(symbol, name, kind, score, noise)


def _parse_termination_line(text: str, line_no: int) -> TerminationRule:
    if "->" not in text:
        raise _err("bad-termination", f"termination rule needs '<condition> -> <outcome>': {text!r}", line_no)
    cond_text, _, outcome = (p.strip() for p in text.partition("->"))
    if outcome not in OUTCOMES:
        raise _err("bad-outcome", f"outcome must be one of {OUTCOMES}, got {outcome!r}", line_no)
    words = cond_text.split()
    if not words:
        raise _err("bad-termination", "empty termination condition", line_no)
    if words[0] == TIMEOUT:
        if len(words) != 2:
            raise _err("bad-termination", "timeout rule needs a tick count: 'timeout <N> -> <outcome>'", line_no)
        try:
            ticks = int(words[1])
        except ValueError:
            raise _err("bad-value", f"timeout ticks must be an integer, got {words[1]!r}", line_no) from None
        if ticks < 1:
            raise _err("bad-value", "timeout ticks must be >= 1", line_no)
        return TerminationRule(TIMEOUT, outcome, ticks)
    if len(words) != 1 or words[0] not in CONDITIONS:
        raise _err("bad-condition", f"unknown termination condition {cond_text!r}", line_no)
    return TerminationRule(words[0], outcome)


def parse_gdf(text: str) -> GameSpec:
    """Parse GDF source into a validated GameSpec.

    Raises GdfError with line/column and a stable diagnostic code on any
    malformed input; valid inputs always parse.
    """
    name: str | None = None
    sprites: list[tuple[SpriteDef, int]] = []
    terminations: list[TerminationRule] = []
    level_rows: list[tuple[str, int]] = []
    seen_blocks: set[str] = set()
    block: str | None = None

    lines = text.splitlines()
    for idx, raw in enumerate(lines):
        line_no = idx + 1
        if block == "level":
            row = raw.strip()
            if not row:
                continue
            if " " in row or "\t" in row:
                raise _err("bad-level-row", "level rows must not contain whitespace", line_no, row.index(" ") + 1 if " " in row else 1)
            level_rows.append((row, line_no))
            continue

        uncommented = raw.split("#", 1)[0]
        stripped = uncommented.strip()
        if not stripped:
            continue
        col_base = len(uncommented) - len(uncommented.lstrip())

        if name is None:
            words = stripped.split()
            if words[0] != "game" or len(words) != 2:
                raise _err("bad-header", "file must start with 'game <name>'", line_no)
            if not _NAME_RE.match(words[1]):
                raise _err("bad-name", f"invalid game name {words[1]!r}", line_no)
            name = words[1]
            continue

        if stripped in ("sprites", "termination", "level"):
            if stripped in seen_blocks:
                raise _err("duplicate-block", f"duplicate {stripped!r} block", line_no)
            seen_blocks.add(stripped)
            block = stripped
            continue

        if block == "sprites":
            sprite = _parse_sprite_line(stripped, line_no, col_base)
            if any(s.symbol == sprite.symbol for s, _ in sprites):
                raise _err("duplicate-symbol", f"duplicate sprite symbol {sprite.symbol!r}", line_no)
            sprites.append((sprite, line_no))
        elif block == "termination":
            terminations.append(_parse_termination_line(stripped, line_no))
        else:
            raise _err("bad-header", f"unexpected content outside any block: {stripped!r}", line_no)

    if name is None:
        raise _err("bad-header", "empty input: missing 'game <name>' header", max(len(lines), 1))
    for required in ("sprites", "termination", "level"):
        if required not in seen_blocks:
            raise _err("missing-block", f"missing {required!r} block", len(lines))

    return _validate(name, sprites, terminations, level_rows, len(lines))


def _validate(
    name: str,
    sprites: list[tuple[SpriteDef, int]],
    terminations: list[TerminationRule],
    level_rows: list[tuple[str, int]],
    last_line: int,
) -> GameSpec:
    if not sprites:
        raise _err("missing-block", "sprites block declares no sprites", last_line)
    if not terminations:
        raise _err("missing-block", "termination block declares no rules", last_line)
    if not any(r.condition == TIMEOUT for r in terminations):
        raise _err("missing-timeout", "a timeout rule is required (guarantees finite episodes)", last_line)
    if not level_rows:
        raise _err("empty-level", "level block has no rows", last_line)

    width = len(level_rows[0][0])
    for row, line_no in level_rows[1:]:
        if len(row) != width:
            raise _err("ragged-level", f"level row has length {len(row)}, expected {width}", line_no, len(row) + 1)
    height = len(level_rows)
    if width * height < 2:
        raise _err("level-too-small", "level needs at least two cells", level_rows[0][1])

    by_symbol = {s.symbol: s for s, _ in sprites}
    avatar_count = 0
    for row, line_no in level_rows:
        for col, ch in enumerate(row):
            if ch == FLOOR:
                continue
            sprite = by_symbol.get(ch)
            if sprite is None:
                raise _err("unknown-symbol", f"level character {ch!r} matches no declared sprite", line_no, col + 1)
            if sprite.kind is Kind.AVATAR:
                avatar_count += 1
    if avatar_count != 1:
        raise _err("avatar-count", f"level must contain exactly one avatar, found {avatar_count}", level_rows[0][1])

    return GameSpec(
        name=name,
        sprites=tuple(sorted((s for s, _ in sprites), key=lambda s: s.symbol)),
        terminations=tuple(terminations),
        level=tuple(row for row, _ in level_rows),
    )


# ---------------------------------------------------------------------------
# serialization

def serialize_gdf(spec: GameSpec) -> str:
    """Render the canonical text form. parse_gdf(serialize_gdf(s)) == s."""
    for s in spec.sprites:
        if s.symbol == "#":
            # '#' opens a comment outside the level block, so a '#' sprite
            # declaration could never parse back
            raise ValueError("'#' cannot be a sprite symbol")
    out = [f"game {spec.name}", "", "sprites"]
    for s in sorted(spec.sprites, key=lambda s: s.symbol):
        entry = f"  {s.symbol} {s.name} {s.kind.name.lower()}"
        if s.score != 0:
            entry += f" score={s.score}"
        if s.noise != 0.0:
            entry += f" noise={s.noise!r}"
        out.append(entry)
    out.append("")
    out.append("termination")
    out.extend(f"  {rule.render()}" for rule in spec.terminations)
    out.append("")
    out.append("level")
    out.extend(spec.level)
    out.append("")
    return "\n".join(out)
