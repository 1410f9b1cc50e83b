"""Seeded random games and the ``.lfg`` text format.

Random numbers come from xoshiro256** seeded through splitmix64, so other
implementations can reproduce instances bit-for-bit. Uniform reals use the
top 53 bits: ``(x >> 11) * 2**-53``. NF games draw tensor entries agent by
agent in row-major order; PM games draw matrices for ordered pairs ``(i, j)``
in lexicographic order, each in row-major order.

File layout (``#`` starts a comment, blank lines ignored)::

    kind nf
    n 3
    m 2 2 2
    leader 2
    U 0
      <m_n values>          # one row per prefix (a_1..a_{n-1}), row-major
    ...

PM files use pairwise blocks ``U i j`` holding ``m_i`` rows of ``m_j`` values.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ParseError, ResourceError
from .games import Game, LeaderFollowerInstance, NormalFormGame, PolymatrixGame

MASK64 = (1 << 64) - 1
DEFAULT_MAX_ENTRIES = 50_000_000
CLASSES = ("uniform-random-nf", "uniform-random-pm")


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator."""

    def __init__(self, seed: int):
        state = int(seed) & MASK64
        s = []
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float, size: int) -> np.ndarray:
        out = np.empty(size)
        for k in range(size):
            out[k] = self.random()
        return lo + (hi - lo) * out


@dataclass(frozen=True)
class GeneratorSpec:
    game_class: str
    n: int
    m: int
    payoff_lo: float = 0.0
    payoff_hi: float = 100.0
    seed: int = 1

    def __post_init__(self):
        cls = {"nf": CLASSES[0], "pm": CLASSES[1]}.get(self.game_class, self.game_class)
        object.__setattr__(self, "game_class", cls)
        if cls not in CLASSES:
            raise ValueError(f"unknown game class {self.game_class!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.payoff_lo <= self.payoff_hi:
            raise ValueError("payoff_lo must not exceed payoff_hi")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def generate(spec: GeneratorSpec, max_entries: int = DEFAULT_MAX_ENTRIES) -> Game:
    """Draw a uniform random NF or PM game; a pure function of ``spec``.

    A degenerate range ``payoff_lo == payoff_hi`` gives a constant game.
    """
    rng = Xoshiro256(spec.seed)
    n, m = spec.n, spec.m
    lo, hi = spec.payoff_lo, spec.payoff_hi
    if spec.game_class == CLASSES[0]:
        size = m ** n
        if size * n > max_entries:
            raise ResourceError(f"{n} tensors of {size} entries exceed the cap of {max_entries}")
        shape = (m,) * n
        return NormalFormGame([rng.uniform(lo, hi, size).reshape(shape) for _ in range(n)])
    if n * (n - 1) * m * m > max_entries:
        raise ResourceError(f"pairwise matrices exceed the cap of {max_entries} entries")
    pairwise = {}
    for i, j in itertools.permutations(range(n), 2):
        pairwise[(i, j)] = rng.uniform(lo, hi, m * m).reshape(m, m)
    return PolymatrixGame((m,) * n, pairwise)


def generate_instance(game_class: str, n: int, m: int, seed: int,
                      payoff_lo: float = 0.0, payoff_hi: float = 100.0) -> LeaderFollowerInstance:
    spec = GeneratorSpec(game_class, n, m, payoff_lo, payoff_hi, seed)
    return LeaderFollowerInstance(generate(spec))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_game(game: Game, leader: int | None = None) -> str:
    leader = game.n - 1 if leader is None else leader
    lines = [f"kind {game.kind}", f"n {game.n}", "m " + " ".join(str(k) for k in game.m),
             f"leader {leader}"]
    if isinstance(game, NormalFormGame):
        for i, tensor in enumerate(game.payoffs):
            lines.append(f"U {i}")
            for row in tensor.reshape(-1, game.m[-1]):
                lines.append("  " + " ".join(_fmt(v) for v in row))
    else:
        for (i, j), mat in game.pairwise.items():
            lines.append(f"U {i} {j}")
            for row in mat:
                lines.append("  " + " ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_game(game, path, leader: int | None = None) -> None:
    if isinstance(game, LeaderFollowerInstance):
        game, leader = game.game, game.leader
    Path(path).write_text(format_game(game, leader))


def _single_int(tokens, lineno, field):
    values = _ints(tokens, lineno, field)
    if len(values) != 1:
        raise ParseError(f"expected one integer, got {len(values)}", lineno, field)
    return values[0]


def _ints(tokens, lineno, field):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno, field) from None


def parse_game(text: str) -> LeaderFollowerInstance:
    """Parse ``.lfg`` text into an instance (game plus leader index)."""
    header: dict[str, list[str]] = {}
    blocks: list[tuple[int, list[int], list[tuple[int, list[str]]]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        key = tokens[0]
        if key == "U":
            blocks.append((lineno, _ints(tokens[1:], lineno, "U"), []))
        elif key in ("kind", "n", "m", "leader"):
            if blocks:
                raise ParseError(f"header field {key!r} after payload", lineno, key)
            if key in header:
                raise ParseError(f"duplicate field {key!r}", lineno, key)
            header[key] = tokens[1:]
            header[key + "@line"] = [str(lineno)]
        elif blocks:
            blocks[-1][2].append((lineno, tokens))
        else:
            raise ParseError(f"unknown field {key!r}", lineno, key)

    for key in ("kind", "n", "m"):
        if key not in header:
            raise ParseError(f"missing field {key!r}", None, key)
    kind = " ".join(header["kind"])
    if kind not in ("nf", "pm"):
        raise ParseError(f"unknown kind {kind!r}", int(header["kind@line"][0]), "kind")
    n_line = int(header["n@line"][0])
    n = _single_int(header["n"], n_line, "n")
    if n < 2:
        raise ParseError("n must be an integer >= 2", n_line, "n")
    m_line = int(header["m@line"][0])
    m = _ints(header["m"], m_line, "m")
    if len(m) != n or any(k < 1 for k in m):
        raise ParseError(f"m must list {n} positive action counts", m_line, "m")
    leader = n - 1
    if "leader" in header:
        l_line = int(header["leader@line"][0])
        leader = _single_int(header["leader"], l_line, "leader")
        if not 0 <= leader < n:
            raise ParseError(f"leader {leader} out of range", l_line, "leader")

    def rows_to_array(block, expected_rows, width, label):
        lineno, _, rows = block
        if len(rows) != expected_rows:
            raise ParseError(f"{label} has {len(rows)} rows, expected {expected_rows}", lineno, label)
        out = np.empty((expected_rows, width))
        for r, (row_line, tokens) in enumerate(rows):
            if len(tokens) != width:
                raise ParseError(
                    f"{label} row {r} has {len(tokens)} values, expected {width}", row_line, label)
            try:
                out[r] = [float(t) for t in tokens]
            except ValueError:
                raise ParseError(f"{label} row {r} has a non-numeric value", row_line, label) from None
            if not np.all(np.isfinite(out[r])):
                raise ParseError(f"{label} row {r} has a non-finite value", row_line, label)
        return out

    if kind == "nf":
        tensors = {}
        for block in blocks:
            lineno, idx, _ = block
            if len(idx) != 1:
                raise ParseError(f"nf payoff block needs one agent index, got {idx}", lineno, "U")
            (agent,) = idx
            label = f"U {agent}"
            if not 0 <= agent < n or agent in tensors:
                raise ParseError("agent index out of range or repeated", lineno, label)
            rows = int(np.prod(m[:-1]))
            tensors[agent] = rows_to_array(block, rows, m[-1], label).reshape(m)
        missing = [i for i in range(n) if i not in tensors]
        if missing:
            raise ParseError(f"missing payoff tensors for agents {missing}", None, "U")
        game = NormalFormGame([tensors[i] for i in range(n)])
    else:
        mats = {}
        for block in blocks:
            lineno, idx, _ = block
            if len(idx) != 2:
                raise ParseError(
                    f"pm payoff block needs a pair 'U i j', got a rank-{n} tensor block U {idx}",
                    lineno, "U")
            i, j = idx
            label = f"U {i} {j}"
            if not (0 <= i < n and 0 <= j < n) or i == j or (i, j) in mats:
                raise ParseError("pair index out of range, diagonal or repeated", lineno, label)
            mats[(i, j)] = rows_to_array(block, m[i], m[j], label)
        game = PolymatrixGame(m, mats)
    return LeaderFollowerInstance(game, leader)


def read_game(path) -> LeaderFollowerInstance:
    return parse_game(Path(path).read_text())
