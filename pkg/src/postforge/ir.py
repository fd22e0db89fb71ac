"""Circuit intermediate representation and structural rewrites.

Conventions, fixed once and relied on everywhere:

* Qubit ``q`` is bit ``q`` of a basis-state index, so qubit 0 is the least
  significant bit of any counter register.
* Multi-qubit gates list their qubits most-significant-first: a gate on
  ``(a, b)`` with a 4x4 matrix acts with ``a`` as the high bit of the matrix
  index.  Permutation gates read their qubit tuple the same way, so a
  counter register spanning qubits ``[s, s+w)`` is passed as
  ``(s+w-1, ..., s)``.
* Control qubits carry an explicit polarity (0 or 1) in the IR; lowering
  negative polarities to X sandwiches happens only at synthesis time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Union

import numpy as np

from .errors import LayoutTooSmall, NonTerminalPostselect, NonUnitaryInput

POSTSELECT_TARGETS = ("0", "1", "+", "-")

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_STD_MATRICES = {
    "h": ((_SQRT2_INV, _SQRT2_INV), (_SQRT2_INV, -_SQRT2_INV)),
    "x": ((0.0, 1.0), (1.0, 0.0)),
    "t": ((1.0, 0.0), (0.0, complex(math.cos(math.pi / 4), math.sin(math.pi / 4)))),
    "tdg": ((1.0, 0.0), (0.0, complex(math.cos(math.pi / 4), -math.sin(math.pi / 4)))),
}
_STD_DAGGER = {"h": "h", "x": "x", "t": "tdg", "tdg": "t"}


@dataclass(frozen=True)
class Gate:
    """A primitive gate, an opaque unitary, or an opaque permutation.

    ``kind`` is one of ``"std"`` (h/x/t/tdg), ``"unitary"`` (explicit 2x2 or
    4x4 matrix with a label), or ``"perm"`` (explicit permutation table with
    a label).  Matrices and tables are stored as tuples so gates stay
    hashable and immutable.
    """

    kind: str
    name: str
    arity: int
    matrix: tuple = None
    perm: tuple = None

    def dagger(self) -> "Gate":
        if self.kind == "std":
            return std_gate(_STD_DAGGER[self.name])
        if self.kind == "unitary":
            mat = tuple(
                tuple(complex(self.matrix[c][r]).conjugate() for c in range(len(self.matrix)))
                for r in range(len(self.matrix))
            )
            return Gate("unitary", _toggle_dag(self.name), self.arity, matrix=mat)
        inv = [0] * len(self.perm)
        for src, dst in enumerate(self.perm):
            inv[dst] = src
        return Gate("perm", _toggle_dag(self.name), self.arity, perm=tuple(inv))

    def as_array(self) -> np.ndarray:
        """Dense matrix of the gate (permutations expand to 0/1 matrices)."""
        if self.kind == "std":
            return np.array(_STD_MATRICES[self.name], dtype=complex)
        if self.kind == "unitary":
            return np.array(self.matrix, dtype=complex)
        dim = len(self.perm)
        mat = np.zeros((dim, dim), dtype=complex)
        for src, dst in enumerate(self.perm):
            mat[dst, src] = 1.0
        return mat


def _toggle_dag(label: str) -> str:
    return label[: -len("_dag")] if label.endswith("_dag") else label + "_dag"


def std_gate(name: str) -> Gate:
    if name not in _STD_MATRICES:
        raise ValueError(f"unknown standard gate {name!r}")
    return Gate("std", name, 1)


def unitary_gate(label: str, matrix) -> Gate:
    mat = np.asarray(matrix, dtype=complex)
    if mat.shape not in ((2, 2), (4, 4)):
        raise ValueError("opaque unitaries must be 2x2 or 4x4")
    arity = 1 if mat.shape == (2, 2) else 2
    return Gate("unitary", label, arity, matrix=tuple(tuple(complex(v) for v in row) for row in mat))


def perm_gate(label: str, table: Iterable[int]) -> Gate:
    tab = tuple(int(v) for v in table)
    size = len(tab)
    arity = size.bit_length() - 1
    if size != 1 << arity or arity < 1:
        raise ValueError("permutation table length must be a power of two >= 2")
    return Gate("perm", label, arity, perm=tab)


H = std_gate("h")
X = std_gate("x")
T = std_gate("t")
TDG = std_gate("tdg")


@dataclass(frozen=True)
class ApplyGate:
    gate: Gate
    qubits: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()

    def touched(self) -> tuple[int, ...]:
        return self.qubits + tuple(q for q, _ in self.controls)


@dataclass(frozen=True)
class Postselect:
    qubit: int
    target: str = "1"


@dataclass(frozen=True)
class Measure:
    qubit: int
    label: str


Instruction = Union[ApplyGate, Postselect, Measure]


def cx(control: int, target: int) -> ApplyGate:
    return ApplyGate(X, (target,), ((control, 1),))


def ccx(c1: int, c2: int, target: int) -> ApplyGate:
    return ApplyGate(X, (target,), ((c1, 1), (c2, 1)))


def mcx(controls: Iterable[tuple[int, int]], target: int) -> ApplyGate:
    return ApplyGate(X, (target,), tuple(controls))


@dataclass(frozen=True)
class Register:
    name: str
    start: int
    size: int

    @property
    def qubits(self) -> range:
        return range(self.start, self.start + self.size)


@dataclass(frozen=True)
class Circuit:
    """Immutable circuit: qubit count, named register spans, instructions.

    ``unitary_then_terminal`` flags the discipline in which every marker
    (postselect/measure) sits after the last gate; the flag is checked by
    :func:`validate`, never assumed.
    """

    n_qubits: int
    registers: tuple[Register, ...] = ()
    instructions: tuple[Instruction, ...] = ()
    metadata: str = ""
    unitary_then_terminal: bool = False

    def register(self, name: str) -> Register:
        for reg in self.registers:
            if reg.name == name:
                return reg
        raise KeyError(f"no register named {name!r}")

    def has_markers(self) -> bool:
        return any(not isinstance(ins, ApplyGate) for ins in self.instructions)

    def postselects(self) -> list[Postselect]:
        return [ins for ins in self.instructions if isinstance(ins, Postselect)]

    def measures(self) -> list[Measure]:
        return [ins for ins in self.instructions if isinstance(ins, Measure)]

    def with_instructions(self, instructions: Iterable[Instruction]) -> "Circuit":
        return replace(self, instructions=tuple(instructions))


# ---------------------------------------------------------------------------
# Instruction-list utilities shared by the builders.

def add_controls(instructions: Iterable[Instruction],
                 controls: Iterable[tuple[int, int]]) -> tuple[Instruction, ...]:
    """Prepend control qubits (with polarities) to every gate instruction."""
    ctrl = tuple(controls)
    out = []
    for ins in instructions:
        if not isinstance(ins, ApplyGate):
            raise NonUnitaryInput("cannot add controls to postselect/measure markers")
        out.append(ApplyGate(ins.gate, ins.qubits, ctrl + ins.controls))
    return tuple(out)


def invert_instructions(instructions: Iterable[Instruction]) -> tuple[Instruction, ...]:
    """Adjoint of a gate-only instruction list (reversed order, daggered gates)."""
    out = []
    for ins in reversed(list(instructions)):
        if not isinstance(ins, ApplyGate):
            raise NonUnitaryInput("cannot invert postselect/measure markers")
        out.append(ApplyGate(ins.gate.dagger(), ins.qubits, ins.controls))
    return tuple(out)


def remap_instructions(instructions: Iterable[Instruction],
                       mapping: Union[dict, Callable[[int], int]]) -> tuple[Instruction, ...]:
    f = mapping.__getitem__ if isinstance(mapping, dict) else mapping
    out = []
    for ins in instructions:
        if isinstance(ins, ApplyGate):
            out.append(ApplyGate(ins.gate, tuple(f(q) for q in ins.qubits),
                                 tuple((f(q), p) for q, p in ins.controls)))
        elif isinstance(ins, Postselect):
            out.append(Postselect(f(ins.qubit), ins.target))
        else:
            out.append(Measure(f(ins.qubit), ins.label))
    return tuple(out)


def repeat_instructions(instructions: Iterable[Instruction], times: int) -> tuple[Instruction, ...]:
    body = tuple(instructions)
    return body * times


# ---------------------------------------------------------------------------
# Validation.

_UNITARITY_TOL = 1e-9


def validate(circuit: Circuit) -> list[str]:
    """Collect every structural violation; an empty list means valid.

    Violations are data, not failures: callers decide whether to raise.
    """
    bad = []
    n = circuit.n_qubits
    if n < 1:
        bad.append("circuit must have at least one qubit")

    if circuit.registers:
        seen = set()
        names = set()
        for reg in circuit.registers:
            if reg.name in names:
                bad.append(f"duplicate register name {reg.name!r}")
            names.add(reg.name)
            if reg.size < 1:
                bad.append(f"register {reg.name!r} has non-positive size")
            for q in reg.qubits:
                if q in seen:
                    bad.append(f"register {reg.name!r} overlaps another register at qubit {q}")
                if not 0 <= q < n:
                    bad.append(f"register {reg.name!r} extends past qubit count")
                seen.add(q)
        if seen != set(range(n)) and not any("extends" in b for b in bad):
            bad.append("register spans do not cover all declared qubits")

    labels_seen: dict[str, Gate] = {}
    checked_labels: set[str] = set()
    measure_labels = set()
    last_gate_pos = -1
    first_marker_pos = None
    for pos, ins in enumerate(circuit.instructions):
        if isinstance(ins, ApplyGate):
            last_gate_pos = pos
            touched = ins.touched()
            for q in touched:
                if not 0 <= q < n:
                    bad.append(f"qubit {q} out of range in instruction {pos}")
            if len(set(touched)) != len(touched):
                bad.append(f"duplicate qubit in instruction {pos}")
            if len(ins.qubits) != ins.gate.arity:
                bad.append(f"gate {ins.gate.name!r} arity mismatch in instruction {pos}")
            for _, p in ins.controls:
                if p not in (0, 1):
                    bad.append(f"control polarity must be 0 or 1 in instruction {pos}")
            gate = ins.gate
            if gate.kind != "std":
                prev = labels_seen.get(gate.name)
                if prev is not None and prev != gate:
                    bad.append(f"label {gate.name!r} bound to two different gates")
                labels_seen[gate.name] = gate
            if gate.kind == "unitary" and gate.name not in checked_labels:
                checked_labels.add(gate.name)
                mat = gate.as_array()
                dev = np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max()
                if dev > _UNITARITY_TOL:
                    bad.append(f"non-unitary opaque gate {gate.name!r} "
                               f"(instruction {pos}, deviation {dev:.3g})")
            if gate.kind == "perm" and sorted(gate.perm) != list(range(len(gate.perm))):
                bad.append(f"gate {gate.name!r} table is not a permutation (instruction {pos})")
        else:
            if first_marker_pos is None:
                first_marker_pos = pos
            if not 0 <= ins.qubit < n:
                bad.append(f"qubit {ins.qubit} out of range in instruction {pos}")
            if isinstance(ins, Postselect) and ins.target not in POSTSELECT_TARGETS:
                bad.append(f"postselect target {ins.target!r} invalid in instruction {pos}")
            if isinstance(ins, Measure):
                if ins.label in measure_labels:
                    bad.append(f"duplicate measure label {ins.label!r} in instruction {pos}")
                measure_labels.add(ins.label)

    if circuit.unitary_then_terminal and first_marker_pos is not None and last_gate_pos > first_marker_pos:
        bad.append("circuit flagged unitary-then-terminal but a gate follows a marker")
    return bad


# ---------------------------------------------------------------------------
# Structural rewrites.

def desugar_postselections(circuit: Circuit) -> Circuit:
    """Rewrite every postselect so its target is |1>.

    The basis change is applied right before the marker: target 0 becomes
    ``X; post 1``, target - becomes ``H; post 1``, target + becomes
    ``H; X; post 1``.  The qubit ends in |1> on the surviving branch, which
    is what the counter-insertion rewrite expects.
    """
    out: list[Instruction] = []
    for ins in circuit.instructions:
        if isinstance(ins, Postselect) and ins.target != "1":
            q = ins.qubit
            if ins.target == "0":
                out.append(ApplyGate(X, (q,)))
            elif ins.target == "-":
                out.append(ApplyGate(H, (q,)))
            else:  # "+"
                out.append(ApplyGate(H, (q,)))
                out.append(ApplyGate(X, (q,)))
            out.append(Postselect(q, "1"))
        else:
            out.append(ins)
    return circuit.with_instructions(out)


def aggregate_postselections(circuit: Circuit) -> Circuit:
    """Collapse k terminal target-1 postselects into one on a fresh ancilla.

    The ancilla receives the AND of the k postselect qubits via a
    multi-controlled X, so success probability and conditional outcome
    statistics are unchanged.
    """
    posts = []
    gates = []
    measures = []
    for pos, ins in enumerate(circuit.instructions):
        if isinstance(ins, Postselect):
            if ins.target != "1":
                raise ValueError("aggregate requires desugared (target-1) postselects")
            for later in circuit.instructions[pos + 1:]:
                if isinstance(later, ApplyGate) and ins.qubit in later.touched():
                    raise NonTerminalPostselect(
                        f"postselect on qubit {ins.qubit} precedes a gate acting on it")
            posts.append(ins)
        elif isinstance(ins, Measure):
            measures.append(ins)
        else:
            gates.append(ins)
    if not posts:
        raise ValueError("nothing to aggregate: circuit has no postselects")

    anc = circuit.n_qubits
    new_instrs = gates + [mcx(((p.qubit, 1) for p in posts), anc), Postselect(anc, "1")] + measures
    registers = circuit.registers
    if registers:
        registers = registers + (Register("PAGG", anc, 1),)
    return replace(circuit, n_qubits=anc + 1, registers=registers,
                   instructions=tuple(new_instrs))


def controlled_wrap(circuit: Circuit, controls: Iterable[int],
                    polarities: Iterable[int] | int = 1) -> Circuit:
    """Gate every instruction on the given control qubits.

    Where the control condition fails the wrapped circuit acts as identity
    on the original qubits; where it holds it acts as the original circuit.
    Controls must already be part of the circuit's qubit range and untouched
    by its instructions.
    """
    ctrl = tuple(controls)
    if not ctrl:
        return circuit
    if isinstance(polarities, int):
        pols = (polarities,) * len(ctrl)
    else:
        pols = tuple(polarities)
    if len(pols) != len(ctrl):
        raise ValueError("one polarity per control qubit")
    if circuit.has_markers():
        raise NonUnitaryInput("controlled_wrap requires a pure gate circuit")
    for ins in circuit.instructions:
        overlap = set(ins.touched()) & set(ctrl)
        if overlap:
            raise ValueError(f"control qubits {sorted(overlap)} are used by the circuit")
    for q in ctrl:
        if not 0 <= q < circuit.n_qubits:
            raise ValueError(f"control qubit {q} outside circuit")
    return circuit.with_instructions(add_controls(circuit.instructions, zip(ctrl, pols)))


# ---------------------------------------------------------------------------
# Accounting.

@dataclass(frozen=True)
class GateStats:
    counts: dict
    n_postselect: int
    n_measure: int
    n_qubits: int

    @property
    def total_gates(self) -> int:
        return sum(self.counts.values())

    def count(self, key: str) -> int:
        return self.counts.get(key, 0)


def _stat_key(ins: ApplyGate) -> str:
    gate = ins.gate
    prefix = "c" * len(ins.controls)
    if gate.kind == "std":
        return prefix + gate.name
    return f"{prefix}{gate.kind[0]}:{gate.name}"


def gate_stats(circuit: Circuit) -> GateStats:
    """Exact tallies per gate kind plus marker counts.

    Standard gates key as ``h``/``x``/..., each control level adds a ``c``
    prefix (so a CNOT counts under ``cx``), opaque gates key as
    ``u:<label>`` and permutations as ``p:<label>``.
    """
    counts: dict[str, int] = {}
    n_post = n_meas = 0
    for ins in circuit.instructions:
        if isinstance(ins, ApplyGate):
            key = _stat_key(ins)
            counts[key] = counts.get(key, 0) + 1
        elif isinstance(ins, Postselect):
            n_post += 1
        else:
            n_meas += 1
    return GateStats(counts, n_post, n_meas, circuit.n_qubits)


# ---------------------------------------------------------------------------
# Register layout for the automaton pipeline.

@dataclass(frozen=True)
class RegisterLayout:
    """Index map for the pipeline registers.

    Order in index space (builders only ever append):
    ``R1`` (flag qubit), ``R2`` (rest of the working register: automaton
    config bits plus the coin qubit, which is reused as the combiner's
    block-encoding ancilla once the coin rounds are done), ``K`` (round
    counter argument), ``C`` (postselection-failure counter), ``D``
    (bad-branch counter), ``A`` (three step ancillas), ``W`` (decision
    qubit, last).

    ``c_width`` must allow more counter values than there are postselects
    in one compiled circuit; ``d_width`` must allow more values than the
    2*(T+1)*r increments one accumulator stack can issue, otherwise the
    bad-branch counter could wrap back to zero and interfere with the good
    branch.  ``create`` picks both minimally; an explicit ``counter_width``
    overrides both (meant for overflow stress tests).
    """

    m: int
    T: int
    r: int
    ell: int
    k_width: int
    c_width: int
    d_width: int

    @classmethod
    def create(cls, m: int, T: int, r: int = 1, counter_width: int | None = None) -> "RegisterLayout":
        if m < 1 or T < 1 or r < 1:
            raise LayoutTooSmall("need m >= 1, T >= 1, r >= 1")
        ell = m + 2  # config bits + coin + combiner ancilla
        k_width = max(1, (T + 1 - 1).bit_length())
        if counter_width is not None:
            c_width = d_width = int(counter_width)
            if c_width < 1:
                raise LayoutTooSmall("counter width must be >= 1")
        else:
            post_count = T + m
            c_width = max(1, (post_count + 1).bit_length())  # 2^c - 1 > post_count
            d_width = max(1, (2 * (T + 1) * r).bit_length())  # 2^d - 1 >= 2(T+1)r
        return cls(m=m, T=T, r=r, ell=ell, k_width=k_width,
                   c_width=c_width, d_width=d_width)

    # -- index anatomy -----------------------------------------------------
    @property
    def r1_index(self) -> int:
        return 0

    @property
    def config_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.m))

    @property
    def coin_index(self) -> int:
        return self.m

    @property
    def combiner_anc_index(self) -> int:
        return self.m + 1

    @property
    def k_start(self) -> int:
        return self.ell

    @property
    def c_start(self) -> int:
        return self.ell + self.k_width

    @property
    def d_start(self) -> int:
        return self.c_start + self.c_width

    @property
    def anc_start(self) -> int:
        return self.d_start + self.d_width

    @property
    def w_index(self) -> int:
        return self.anc_start + 3

    def k_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.k_start, self.k_start + self.k_width))

    def c_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.c_start, self.c_start + self.c_width))

    def d_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.d_start, self.d_start + self.d_width))

    def qubits_for(self, stage: str) -> int:
        if stage == "qx":
            return self.ell + self.k_width
        if stage == "vx":
            return self.c_start + self.c_width
        if stage in ("uplus", "uminus", "acc"):
            return self.anc_start + 3
        if stage == "final":
            return self.w_index + 1
        raise ValueError(f"unknown stage {stage!r}")

    def registers_for(self, stage: str) -> tuple[Register, ...]:
        regs = [Register("R1", 0, 1), Register("R2", 1, self.ell - 1),
                Register("K", self.k_start, self.k_width)]
        if stage == "qx":
            return tuple(regs)
        regs.append(Register("C", self.c_start, self.c_width))
        if stage == "vx":
            return tuple(regs)
        regs.append(Register("D", self.d_start, self.d_width))
        regs.append(Register("A", self.anc_start, 3))
        if stage in ("uplus", "uminus", "acc"):
            return tuple(regs)
        if stage == "final":
            regs.append(Register("W", self.w_index, 1))
            return tuple(regs)
        raise ValueError(f"unknown stage {stage!r}")
