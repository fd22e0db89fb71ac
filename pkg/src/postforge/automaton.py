"""Reversible probabilistic branching machine with exact dyadic acceptance.

The machine holds an m-bit configuration whose bit 0 is the accept flag.
Each step tosses a fair coin and applies one of two fixed permutations of
the configuration space, so after T steps the acceptance probability is
exactly a/2^T for an integer a.  All probability arithmetic is exact.

Text format::

    m <width>
    T <steps>
    init <config>
    perm0 <2^m integers>
    perm1 <2^m integers>
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import FormatError, HalfProbability


@dataclass(frozen=True)
class Dyadic:
    """Exact value num / 2^exp; never rounded."""

    num: int
    exp: int

    def __post_init__(self):
        if self.exp < 0:
            raise ValueError("exponent must be non-negative")

    def _pair(self, other) -> tuple[int, int, int]:
        if isinstance(other, int):
            other = Dyadic(other, 0)
        e = max(self.exp, other.exp)
        return (self.num << (e - self.exp), other.num << (e - other.exp), e)

    def __add__(self, other):
        a, b, e = self._pair(other)
        return Dyadic(a + b, e)

    def __sub__(self, other):
        a, b, e = self._pair(other)
        return Dyadic(a - b, e)

    def __mul__(self, other):
        if isinstance(other, int):
            return Dyadic(self.num * other, self.exp)
        return Dyadic(self.num * other.num, self.exp + other.exp)

    __rmul__ = __mul__

    def __neg__(self):
        return Dyadic(-self.num, self.exp)

    def __eq__(self, other):
        if isinstance(other, (Dyadic, int)):
            a, b, _ = self._pair(other)
            return a == b
        return NotImplemented

    def __hash__(self):
        return hash(self.reduced_pair())

    def __lt__(self, other):
        a, b, _ = self._pair(other)
        return a < b

    def __le__(self, other):
        a, b, _ = self._pair(other)
        return a <= b

    def __float__(self):
        return self.num / (1 << self.exp)

    def reduced_pair(self) -> tuple[int, int]:
        num, exp = self.num, self.exp
        while exp > 0 and num % 2 == 0:
            num //= 2
            exp -= 1
        return num, exp

    def __str__(self):
        return f"{self.num}/{1 << self.exp}" if self.exp else str(self.num)


HALF = Dyadic(1, 1)


@dataclass(frozen=True)
class Automaton:
    """Two permutations, a fair coin, a start configuration, a step budget."""

    m: int
    T: int
    init: int
    perm0: tuple[int, ...]
    perm1: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.m <= 10:
            raise ValueError("config width m must be in [1, 10]")
        if not 1 <= self.T <= 20:
            raise ValueError("step count T must be in [1, 20]")
        size = 1 << self.m
        for name, perm in (("perm0", self.perm0), ("perm1", self.perm1)):
            if sorted(perm) != list(range(size)):
                raise ValueError(f"{name} is not a permutation of 0..{size - 1}")
        if not 0 <= self.init < size:
            raise ValueError("initial configuration out of range")


def _path_counts(aut: Automaton, steps: int) -> list[int]:
    """Number of coin strings of the given length reaching each config."""
    counts = [0] * (1 << aut.m)
    counts[aut.init] = 1
    for _ in range(steps):
        nxt = [0] * len(counts)
        for conf, c in enumerate(counts):
            if c:
                nxt[aut.perm0[conf]] += c
                nxt[aut.perm1[conf]] += c
        counts = nxt
    return counts


def acceptance_count(aut: Automaton) -> int:
    """Exact number of accepting coin strings (flag bit set after T steps)."""
    return sum(c for conf, c in enumerate(_path_counts(aut, aut.T)) if conf & 1)


def accept_probability(aut: Automaton) -> Dyadic:
    """Exact acceptance probability a/2^T; refuses the undecidable a = 2^(T-1)."""
    a = acceptance_count(aut)
    p = Dyadic(a, aut.T)
    if p == HALF:
        raise HalfProbability(f"acceptance probability is exactly 1/2 ({a}/2^{aut.T})")
    return p


def step_distribution(aut: Automaton, t: int) -> tuple[Dyadic, ...]:
    """Exact configuration distribution after t steps; sums to 1 exactly."""
    if not 0 <= t <= aut.T:
        raise ValueError("step index out of range")
    return tuple(Dyadic(c, t) for c in _path_counts(aut, t))


def relabel(aut: Automaton, relabeling: tuple[int, ...]) -> Automaton:
    """Conjugate the machine by a configuration relabeling.

    If the relabeling preserves the flag bit (conf & 1 == relabeling[conf] & 1)
    the acceptance probability is unchanged.
    """
    size = 1 << aut.m
    if sorted(relabeling) != list(range(size)):
        raise ValueError("relabeling must be a permutation")
    inv = [0] * size
    for src, dst in enumerate(relabeling):
        inv[dst] = src
    conj = lambda perm: tuple(relabeling[perm[inv[c]]] for c in range(size))
    return Automaton(aut.m, aut.T, relabeling[aut.init], conj(aut.perm0), conj(aut.perm1))


def flip_flag(aut: Automaton) -> Automaton:
    """Complement the accept flag; acceptance probability becomes 1 - p."""
    return relabel(aut, tuple(c ^ 1 for c in range(1 << aut.m)))


def random_automaton(m: int, T: int, seed: int) -> Automaton:
    rng = random.Random(seed)
    size = 1 << m
    return Automaton(m, T, rng.randrange(size),
                     tuple(rng.sample(range(size), size)),
                     tuple(rng.sample(range(size), size)))


# ---------------------------------------------------------------------------
# Text format.

def serialize_automaton(aut: Automaton) -> str:
    return "\n".join([
        f"m {aut.m}",
        f"T {aut.T}",
        f"init {aut.init}",
        "perm0 " + " ".join(str(v) for v in aut.perm0),
        "perm1 " + " ".join(str(v) for v in aut.perm1),
    ]) + "\n"


def parse_automaton(text: str) -> Automaton:
    fields: dict[str, list[int]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        try:
            fields[toks[0]] = [int(t) for t in toks[1:]]
        except ValueError as exc:
            raise FormatError(f"bad automaton line {line!r}") from exc
    try:
        return Automaton(m=fields["m"][0], T=fields["T"][0], init=fields["init"][0],
                         perm0=tuple(fields["perm0"]), perm1=tuple(fields["perm1"]))
    except KeyError as exc:
        raise FormatError(f"automaton file missing field {exc}") from exc
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
