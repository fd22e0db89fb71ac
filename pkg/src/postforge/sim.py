"""Dense statevector execution with unnormalized postselection semantics.

A postselect marker projects without renormalizing, so the squared norm of
the state tracks the cumulative success probability and the final norm is
the circuit's ``p_post``.  Measures never collapse anything: they are
recorded and turned into conditional outcome probabilities at report time,
which is sound because every circuit in this package measures terminally.

Mixed inputs for the one-clean-qubit model are handled by enumerating the
2^m computational-basis states of the dirty qubits.  Branches whose state
is still a single basis vector are propagated classically (index + phase)
and only densify at the first non-monomial gate, so branches annihilated by
an early postselection cost O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonUnitaryInput, TooWide, ZeroOverlap
from .ir import ApplyGate, Circuit, Instruction, Measure, Postselect, H, X

MAX_QUBITS = 24          # 2^24 complex doubles = 256 MiB, the dense cap
_ZERO_NORM = 1e-300      # below this a postselection counts as annihilation

_PI4 = complex(np.cos(np.pi / 4), np.sin(np.pi / 4))


class StateVector:
    """Unnormalized complex amplitude vector over ``n`` qubits."""

    __slots__ = ("n", "amps")

    def __init__(self, n: int, index: int = 0, amps: np.ndarray | None = None):
        if n > MAX_QUBITS:
            raise TooWide(f"{n} qubits exceeds the dense cap of {MAX_QUBITS}")
        self.n = n
        if amps is not None:
            if amps.shape != (1 << n,):
                raise ValueError("amplitude vector has the wrong length")
            self.amps = np.array(amps, dtype=complex)
        else:
            self.amps = np.zeros(1 << n, dtype=complex)
            self.amps[index] = 1.0

    def copy(self) -> "StateVector":
        return StateVector(self.n, amps=self.amps)

    @property
    def squared_norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def bit_mass(self, qubit: int) -> float:
        """Amplitude mass on components with the given qubit set to 1."""
        view = self.amps.reshape(-1, 2, 1 << qubit)
        return float(np.vdot(view[:, 1, :], view[:, 1, :]).real)


# ---------------------------------------------------------------------------
# Gate application kernel.
#
# For each distinct (n, qubits, controls) we cache the flat indices of the
# components whose target bits are all zero and whose controls are
# satisfied, plus the offsets that flip the target bits to each value.
# Gates then become a gather, a small matmul or row permutation, and a
# scatter.

_IDX_CACHE: dict = {}
_IDX_CACHE_MAX = 512


def _selection(n: int, qubits: tuple[int, ...], controls: tuple[tuple[int, int], ...]):
    key = (n, qubits, controls)
    hit = _IDX_CACHE.get(key)
    if hit is not None:
        return hit
    idx = np.arange(1 << n, dtype=np.int64)
    mask = np.ones(idx.shape, dtype=bool)
    for q in qubits:
        mask &= (idx >> q) & 1 == 0
    for q, pol in controls:
        mask &= (idx >> q) & 1 == pol
    base = idx[mask]
    w = len(qubits)
    offs = np.zeros(1 << w, dtype=np.int64)
    for v in range(1 << w):
        off = 0
        for i, q in enumerate(qubits):
            if (v >> (w - 1 - i)) & 1:
                off += 1 << q
        offs[v] = off
    if len(_IDX_CACHE) >= _IDX_CACHE_MAX:
        _IDX_CACHE.clear()
    _IDX_CACHE[key] = (base, offs)
    return base, offs


def _apply_gate(state: StateVector, ins: ApplyGate) -> None:
    gate = ins.gate
    base, offs = _selection(state.n, ins.qubits, ins.controls)
    amps = state.amps
    if gate.kind == "perm":
        gather = base[None, :] + offs[:, None]
        block = amps[gather]
        scatter = base[None, :] + offs[np.asarray(gate.perm)][:, None]
        amps[scatter] = block
        return
    if gate.arity == 1:
        i0 = base
        i1 = base + offs[1]
        if gate.kind == "std":
            if gate.name == "x":
                s0 = amps[i0].copy()
                amps[i0] = amps[i1]
                amps[i1] = s0
                return
            if gate.name == "h":
                s0 = amps[i0]
                s1 = amps[i1]
                rt = 1.0 / np.sqrt(2.0)
                amps[i0], amps[i1] = rt * (s0 + s1), rt * (s0 - s1)
                return
            if gate.name == "t":
                amps[i1] *= _PI4
                return
            amps[i1] *= _PI4.conjugate()  # tdg
            return
        mat = gate.as_array()
        s0 = amps[i0]
        s1 = amps[i1]
        amps[i0], amps[i1] = mat[0, 0] * s0 + mat[0, 1] * s1, mat[1, 0] * s0 + mat[1, 1] * s1
        return
    gather = base[None, :] + offs[:, None]
    block = amps[gather]
    amps[gather] = gate.as_array() @ block
    return


def _project_one(state: StateVector, qubit: int) -> None:
    view = state.amps.reshape(-1, 2, 1 << qubit)
    view[:, 0, :] = 0.0


def apply_instruction(state: StateVector, ins: Instruction) -> StateVector:
    """Apply one instruction in place and return the same state.

    Gates multiply the amplitude vector; a postselect projects WITHOUT
    renormalizing (non-|1> targets are desugared on the fly, leaving the
    qubit in |1> on the surviving branch); measures are deferred and do
    nothing here.
    """
    if isinstance(ins, ApplyGate):
        _apply_gate(state, ins)
        return state
    if isinstance(ins, Measure):
        return state
    q = ins.qubit
    if ins.target == "0":
        _apply_gate(state, ApplyGate(X, (q,)))
    elif ins.target == "-":
        _apply_gate(state, ApplyGate(H, (q,)))
    elif ins.target == "+":
        _apply_gate(state, ApplyGate(H, (q,)))
        _apply_gate(state, ApplyGate(X, (q,)))
    _project_one(state, q)
    if state.squared_norm < _ZERO_NORM:
        raise ZeroOverlap(f"postselect on qubit {q} left zero overlap")
    return state


# ---------------------------------------------------------------------------
# Reports.

@dataclass
class SimulationReport:
    """Outcome of a run: success probability, conditional statistics, state.

    ``cond`` maps each measure label to ``(P[0|post], P[1|post])``.  For a
    pure run the final unnormalized state is kept so callers can take
    register-predicate masses; mixed-input runs aggregate over branches and
    carry no single state.
    """

    p_post: float
    cond: dict = field(default_factory=dict)
    state: np.ndarray | None = None
    circuit: Circuit | None = None

    def final_state(self) -> np.ndarray:
        if self.state is None:
            raise ValueError("no single final state (mixed-input run)")
        return self.state

    def mass(self, register: str, value: int | None = None, nonzero: bool = False) -> float:
        """Squared-amplitude mass where a named register holds/avoids a value."""
        if self.state is None or self.circuit is None:
            raise ValueError("register masses need a pure run with its circuit")
        reg = self.circuit.register(register)
        idx = np.arange(self.state.size)
        vals = (idx >> reg.start) & ((1 << reg.size) - 1)
        if nonzero:
            sel = vals != 0
        else:
            sel = vals == (0 if value is None else value)
        picked = self.state[sel]
        return float(np.vdot(picked, picked).real)

    def text(self) -> str:
        lines = [f"p_post {self.p_post:.17g}"]
        for label, (p0, p1) in self.cond.items():
            lines.append(f"cond {label} {p0:.17g} {p1:.17g}")
        if self.state is not None and self.circuit is not None:
            for reg in self.circuit.registers:
                lines.append(f"mass {reg.name}!=0 {self.mass(reg.name, nonzero=True):.17g}")
        return "\n".join(lines) + "\n"


def run(circuit: Circuit, initial: int | StateVector | None = None) -> SimulationReport:
    """Execute all instructions in order and collect the report."""
    if isinstance(initial, StateVector):
        if initial.n != circuit.n_qubits:
            raise ValueError("initial state width does not match circuit")
        state = initial.copy()
    else:
        state = StateVector(circuit.n_qubits, index=initial or 0)
    measures: list[Measure] = []
    for ins in circuit.instructions:
        if isinstance(ins, Measure):
            measures.append(ins)
        else:
            apply_instruction(state, ins)
    return _make_report(state, measures, circuit)


def _make_report(state: StateVector, measures: list[Measure], circuit: Circuit) -> SimulationReport:
    p_post = state.squared_norm
    cond = {}
    for m in measures:
        m1 = state.bit_mass(m.qubit)
        cond[m.label] = ((p_post - m1) / p_post, m1 / p_post)
    return SimulationReport(p_post=p_post, cond=cond, state=state.amps, circuit=circuit)


def unitary_of(circuit: Circuit) -> np.ndarray:
    """Dense matrix of a gate-only circuit, assembled column by column."""
    if circuit.has_markers():
        raise NonUnitaryInput("unitary_of requires a circuit without markers")
    n = circuit.n_qubits
    if n > 10:
        raise TooWide("unitary_of supports at most 10 qubits")
    dim = 1 << n
    mat = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        state = StateVector(n, index=col)
        for ins in circuit.instructions:
            _apply_gate(state, ins)
        mat[:, col] = state.amps
    return mat


# ---------------------------------------------------------------------------
# Mixed-input (one-clean-qubit) execution.

def _hoist_postselects(instructions: tuple[Instruction, ...]) -> list[Instruction]:
    """Move each postselect as early as commutation allows.

    A projection commutes with anything not acting on its qubit, so this is
    an observationally neutral rewrite; it lets dead branches die before
    paying for the gates behind them.
    """
    out = list(instructions)
    for i in range(len(out)):
        if not isinstance(out[i], Postselect):
            continue
        j = i
        q = out[i].qubit
        while j > 0:
            prev = out[j - 1]
            if isinstance(prev, ApplyGate):
                if q in prev.touched():
                    break
            elif prev.qubit == q:
                break
            out[j - 1], out[j] = out[j], out[j - 1]
            j -= 1
    return out


_MONOMIAL_STD = {"x", "t", "tdg"}


def _branch_run(instructions: list[Instruction], n: int, start: int):
    """Run one basis-state branch, densifying only when needed.

    Returns ``(p_post, {label: mass1})`` or ``None`` for an annihilated
    branch.  While the state is a single basis vector, classical gates
    (X, permutations, phases) and target-0/1 postselects are exact and
    cost O(1).
    """
    idx = start
    phase = 1.0 + 0.0j
    for pos, ins in enumerate(instructions):
        if isinstance(ins, ApplyGate):
            if any((idx >> q) & 1 != pol for q, pol in ins.controls):
                continue
            gate = ins.gate
            if gate.kind == "perm":
                w = len(ins.qubits)
                val = 0
                for i, q in enumerate(ins.qubits):
                    val |= ((idx >> q) & 1) << (w - 1 - i)
                val = gate.perm[val]
                for i, q in enumerate(ins.qubits):
                    bit = (val >> (w - 1 - i)) & 1
                    idx = (idx & ~(1 << q)) | (bit << q)
                continue
            if gate.kind == "std" and gate.name in _MONOMIAL_STD:
                q = ins.qubits[0]
                if gate.name == "x":
                    idx ^= 1 << q
                elif (idx >> q) & 1:
                    phase *= _PI4 if gate.name == "t" else _PI4.conjugate()
                continue
            state = StateVector(n, index=idx)
            state.amps[idx] = phase
            return _dense_tail(state, instructions[pos:])
        if isinstance(ins, Postselect):
            if ins.target == "1":
                if (idx >> ins.qubit) & 1 == 0:
                    return None
                continue
            if ins.target == "0":
                if (idx >> ins.qubit) & 1 == 1:
                    return None
                idx |= 1 << ins.qubit  # desugared X leaves the qubit at |1>
                continue
            state = StateVector(n, index=idx)
            state.amps[idx] = phase
            return _dense_tail(state, instructions[pos:])
        # Measure: defer; basis state means the outcome mass is 0 or 1
    masses = {}
    for ins in instructions:
        if isinstance(ins, Measure):
            masses[ins.label] = float(abs(phase) ** 2) if (idx >> ins.qubit) & 1 else 0.0
    return float(abs(phase) ** 2), masses


def _dense_tail(state: StateVector, instructions) :
    measures = []
    for ins in instructions:
        if isinstance(ins, Measure):
            measures.append(ins)
        else:
            try:
                apply_instruction(state, ins)
            except ZeroOverlap:
                return None
    masses = {m.label: state.bit_mass(m.qubit) for m in measures}
    return state.squared_norm, masses


def run_dqc1_mixed(circuit: Circuit, clean: int) -> SimulationReport:
    """Statistics of the circuit on |0><0| (clean) x (I/2) on every other qubit.

    Enumerates all 2^m basis states of the non-clean qubits with weight
    2^-m and aggregates success probability and conditional outcome masses.
    Raises ZeroOverlap only when every branch is annihilated.
    """
    n = circuit.n_qubits
    if not 0 <= clean < n:
        raise ValueError("clean qubit outside circuit")
    m = n - 1
    dirty = [q for q in range(n) if q != clean]
    instrs = _hoist_postselects(circuit.instructions)
    labels = [ins.label for ins in circuit.instructions if isinstance(ins, Measure)]

    weight = 2.0 ** (-m)
    total_post = 0.0
    total_mass = {label: 0.0 for label in labels}
    alive = False
    for b in range(1 << m):
        start = 0
        for i, q in enumerate(dirty):
            start |= ((b >> i) & 1) << q
        outcome = _branch_run(instrs, n, start)
        if outcome is None:
            continue
        alive = True
        p_post, masses = outcome
        total_post += weight * p_post
        for label, mass in masses.items():
            total_mass[label] += weight * mass
    if not alive or total_post < _ZERO_NORM:
        raise ZeroOverlap("every mixed-input branch has zero overlap")
    cond = {label: ((total_post - m1) / total_post, m1 / total_post)
            for label, m1 in total_mass.items()}
    return SimulationReport(p_post=total_post, cond=cond, state=None, circuit=circuit)
