"""Gate synthesis over the primitive set {H, X, T, T†, CNOT}.

Multi-controlled X uses a clean-ancilla Toffoli ladder (2k-3 Toffolis, each
expanded into the standard 7-T-gate network), multi-controlled gates route
through a single AND ancilla, and the counter increment is the descending
cascade of multi-controlled flips.  Every construction returns its ancillas
to |0> on computational-basis inputs; ``data_block_unitary`` checks both the
realized operator and that restoration.

Gate-count shapes (measured constants recorded in the README):
  mcx(k)               <= a*k + b           primitive gates
  controlled_inc(n, k) <= a*(k + n^2) + b   primitive gates
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnsupportedGate
from .ir import (ApplyGate, Circuit, Gate, H, Instruction, Register, T, TDG, X,
                 cx, invert_instructions, perm_gate)
from .sim import StateVector, _apply_gate


@dataclass(frozen=True)
class SynthResult:
    """A synthesized circuit plus which of its qubits are ancillas.

    ``restores_ancillas`` declares the contract that ancillas enter and
    leave at |0> on every computational-basis input of the data qubits.
    """

    circuit: Circuit
    ancillas: tuple[int, ...]
    restores_ancillas: bool = True

    @property
    def data_qubits(self) -> int:
        return self.circuit.n_qubits - len(self.ancillas)


def _toffoli(a: int, b: int, c: int) -> list[Instruction]:
    # Standard 7-T decomposition of the doubly-controlled X.
    return [
        ApplyGate(H, (c,)), cx(b, c), ApplyGate(TDG, (c,)), cx(a, c),
        ApplyGate(T, (c,)), cx(b, c), ApplyGate(TDG, (c,)), cx(a, c),
        ApplyGate(T, (b,)), ApplyGate(T, (c,)), ApplyGate(H, (c,)),
        cx(a, b), ApplyGate(T, (a,)), ApplyGate(TDG, (b,)), cx(a, b),
    ]


def _mcx_instrs(controls: Sequence[int], target: int, pool: Sequence[int],
                polarities: Sequence[int] | None = None) -> list[Instruction]:
    """Primitive-gate realization of a (possibly negated) multi-controlled X.

    ``pool`` supplies clean ancillas; len(controls) - 2 of them are used.
    """
    ctl = list(controls)
    k = len(ctl)
    if polarities is None:
        polarities = [1] * k
    dress = [ApplyGate(X, (q,)) for q, p in zip(ctl, polarities) if p == 0]

    if k == 0:
        core = [ApplyGate(X, (target,))]
    elif k == 1:
        core = [cx(ctl[0], target)]
    elif k == 2:
        core = _toffoli(ctl[0], ctl[1], target)
    else:
        need = k - 2
        anc = list(pool[:need])
        if len(anc) < need:
            raise ValueError("ancilla pool too small for this control count")
        compute: list[Instruction] = list(_toffoli(ctl[0], ctl[1], anc[0]))
        for i in range(1, need):
            compute += _toffoli(anc[i - 1], ctl[i + 1], anc[i])
        core = compute + _toffoli(anc[-1], ctl[-1], target) + list(invert_instructions(compute))
    return dress + core + list(dress)


def synth_mcx(k: int, polarities: Sequence[int] | None = None) -> SynthResult:
    """Flip one target iff k controls match their polarities (default all-1)."""
    if k < 0:
        raise ValueError("control count must be >= 0")
    if polarities is not None and len(polarities) != k:
        raise ValueError("one polarity per control")
    n_anc = max(k - 2, 0)
    target = k
    pool = list(range(k + 1, k + 1 + n_anc))
    instrs = _mcx_instrs(list(range(k)), target, pool, polarities)
    regs = [Register("TGT", target, 1)]
    if k:
        regs.insert(0, Register("CTL", 0, k))
    if n_anc:
        regs.append(Register("ANC", k + 1, n_anc))
    circuit = Circuit(n_qubits=k + 1 + n_anc, registers=tuple(regs),
                      instructions=tuple(instrs), metadata=f"mcx k={k}")
    return SynthResult(circuit, tuple(pool))


def _check_small_gate(g: Gate) -> None:
    if g.kind not in ("std", "unitary") or g.arity > 2:
        raise UnsupportedGate(f"gate {g.name!r} is not a 1- or 2-qubit primitive/opaque gate")


def _controlled_core(g: Gate, k: int, all_zero: bool) -> SynthResult:
    _check_small_gate(g)
    if k < 1:
        raise ValueError("control count must be >= 1")
    ar = g.arity
    and_anc = k + ar
    pool = list(range(k + ar + 1, k + ar + 1 + max(k - 2, 0)))
    targets = tuple(range(k + ar - 1, k - 1, -1))  # high index = high matrix bit
    if all_zero:
        # OR of the controls: X then an all-negative AND (de Morgan).
        compute = [ApplyGate(X, (and_anc,))] + _mcx_instrs(
            list(range(k)), and_anc, pool, polarities=[0] * k)
    else:
        compute = _mcx_instrs(list(range(k)), and_anc, pool)
    instrs = compute + [ApplyGate(g, targets, ((and_anc, 1),))] + list(invert_instructions(compute))
    regs = (Register("CTL", 0, k), Register("TGT", k, ar),
            Register("ANC", and_anc, 1 + len(pool)))
    circuit = Circuit(n_qubits=and_anc + 1 + len(pool), registers=regs,
                      instructions=tuple(instrs),
                      metadata=f"{'or' if all_zero else 'and'}_ctrl {g.name} k={k}")
    return SynthResult(circuit, (and_anc, *pool))


def synth_controlled_gate(g: Gate, k: int) -> SynthResult:
    """Apply g iff all k controls are one: AND into an ancilla, then one controlled g."""
    return _controlled_core(g, k, all_zero=False)


def synth_or_controlled_gate(g: Gate, k: int) -> SynthResult:
    """Apply g iff the k controls are not all zero."""
    return _controlled_core(g, k, all_zero=True)


def _inc_cascade(counter: Sequence[int], pool: Sequence[int],
                 extra_control: int | None = None) -> list[Instruction]:
    """Descending multi-controlled-X cascade = +1 on a little-endian counter."""
    n = len(counter)
    out: list[Instruction] = []
    for j in range(n - 1, 0, -1):
        ctl = list(counter[:j])
        if extra_control is not None:
            ctl = [extra_control] + ctl
        out += _mcx_instrs(ctl, counter[j], pool)
    if extra_control is not None:
        out.append(cx(extra_control, counter[0]))
    else:
        out.append(ApplyGate(X, (counter[0],)))
    return out


def synth_inc_pow2(n: int) -> SynthResult:
    """|j> -> |(j+1) mod 2^n> on an n-qubit counter (qubit 0 = low bit)."""
    if n < 1:
        raise ValueError("counter width must be >= 1")
    n_anc = max(n - 3, 0)
    pool = list(range(n, n + n_anc))
    instrs = _inc_cascade(list(range(n)), pool)
    regs = [Register("CNT", 0, n)]
    if n_anc:
        regs.append(Register("ANC", n, n_anc))
    circuit = Circuit(n_qubits=n + n_anc, registers=tuple(regs),
                      instructions=tuple(instrs), metadata=f"inc n={n}")
    return SynthResult(circuit, tuple(pool))


def synth_controlled_inc(n: int, k: int, mode: str = "and") -> SynthResult:
    """Increment an n-qubit counter iff k controls are all-one ('and') or
    not all-zero ('or')."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    if mode not in ("and", "or"):
        raise ValueError("mode must be 'and' or 'or'")
    and_anc = k + n
    pool = list(range(k + n + 1, k + n + 1 + max(n - 2, k - 2, 0)))
    counter = list(range(k, k + n))
    if mode == "or":
        compute = [ApplyGate(X, (and_anc,))] + _mcx_instrs(
            list(range(k)), and_anc, pool, polarities=[0] * k)
    else:
        compute = _mcx_instrs(list(range(k)), and_anc, pool)
    instrs = compute + _inc_cascade(counter, pool, extra_control=and_anc) \
        + list(invert_instructions(compute))
    regs = (Register("CTL", 0, k), Register("CNT", k, n),
            Register("ANC", and_anc, 1 + len(pool)))
    circuit = Circuit(n_qubits=and_anc + 1 + len(pool), registers=regs,
                      instructions=tuple(instrs), metadata=f"cinc n={n} k={k} {mode}")
    return SynthResult(circuit, (and_anc, *pool))


def synth_inc_mod(modulus: int, width: int) -> SynthResult:
    """|j> -> |(j+1) mod M> for j < M, identity on the j >= M tail.

    Emitted as one opaque permutation gate: the realization of a non-power
    modulus is unconstrained and opaque permutations simulate exactly.
    """
    if modulus < 2 or (1 << width) < modulus:
        raise ValueError("need 2 <= modulus <= 2^width")
    table = [(j + 1) % modulus if j < modulus else j for j in range(1 << width)]
    gate = perm_gate(f"incmod_{modulus}", table)
    qubits = tuple(range(width - 1, -1, -1))
    circuit = Circuit(n_qubits=width, registers=(Register("CNT", 0, width),),
                      instructions=(ApplyGate(gate, qubits),),
                      metadata=f"incmod M={modulus} width={width}")
    return SynthResult(circuit, ())


def gadget_w_basis() -> SynthResult:
    """Flip the target iff the source qubit is in |->; leaves |+> alone."""
    instrs = (ApplyGate(H, (0,)), cx(0, 1), ApplyGate(H, (0,)))
    circuit = Circuit(n_qubits=2, registers=(Register("SRC", 0, 1), Register("TGT", 1, 1)),
                      instructions=instrs, metadata="w_basis")
    return SynthResult(circuit, ())


def gadget_or3() -> SynthResult:
    """Set q3 := q1 OR q2 on basis states, leaving q1 and q2 unchanged."""
    instrs = (ApplyGate(X, (0,)), ApplyGate(X, (1,)),
              ApplyGate(X, (2,), ((0, 1), (1, 1))),
              ApplyGate(X, (2,)), ApplyGate(X, (0,)), ApplyGate(X, (1,)))
    circuit = Circuit(n_qubits=3, registers=(Register("IN", 0, 2), Register("OUT", 2, 1)),
                      instructions=instrs, metadata="or3")
    return SynthResult(circuit, ())


# ---------------------------------------------------------------------------
# Verification helpers: realized operator on the data qubits.

def data_block_unitary(result: SynthResult) -> tuple[np.ndarray, float]:
    """Operator realized on the data qubits with ancillas at |0>, plus leakage.

    Runs every data-basis input, requiring ancillas (placed above the data
    qubits) to return to |0>; the returned leakage is the largest amplitude
    mass found outside that subspace.
    """
    circuit = result.circuit
    data = result.data_qubits
    if sorted(result.ancillas) != list(range(data, circuit.n_qubits)):
        raise ValueError("ancillas must occupy the top qubit positions")
    dim = 1 << data
    block = np.empty((dim, dim), dtype=complex)
    leak = 0.0
    for col in range(dim):
        state = StateVector(circuit.n_qubits, index=col)
        for ins in circuit.instructions:
            _apply_gate(state, ins)
        block[:, col] = state.amps[:dim]
        if circuit.n_qubits > data:
            rest = state.amps[dim:]
            leak = max(leak, float(np.vdot(rest, rest).real))
    return block, leak


# Dense reference operators, used by the CLI to print equivalence residuals.

def reference_mcx(k: int, polarities: Sequence[int] | None = None) -> np.ndarray:
    if polarities is None:
        polarities = [1] * k
    dim = 1 << (k + 1)
    mat = np.zeros((dim, dim))
    for j in range(dim):
        fire = all((j >> q) & 1 == p for q, p in enumerate(polarities))
        mat[j ^ (fire << k), j] = 1.0
    return mat


def reference_controlled(g: Gate, k: int, mode: str = "and") -> np.ndarray:
    gm = g.as_array()
    ar = g.arity
    dim = 1 << (k + ar)
    mat = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        ctl = j & ((1 << k) - 1)
        fire = ctl == (1 << k) - 1 if mode == "and" else ctl != 0
        if not fire:
            mat[j, j] = 1.0
            continue
        v = j >> k
        for u in range(1 << ar):
            mat[ctl | (u << k), j] += gm[u, v]
    return mat


def reference_inc(n: int) -> np.ndarray:
    dim = 1 << n
    mat = np.zeros((dim, dim))
    for j in range(dim):
        mat[(j + 1) % dim, j] = 1.0
    return mat


def reference_inc_mod(modulus: int, width: int) -> np.ndarray:
    dim = 1 << width
    mat = np.zeros((dim, dim))
    for j in range(dim):
        mat[(j + 1) % modulus if j < modulus else j, j] = 1.0
    return mat


def reference_controlled_inc(n: int, k: int, mode: str = "and") -> np.ndarray:
    dim = 1 << (k + n)
    mat = np.zeros((dim, dim))
    for j in range(dim):
        ctl = j & ((1 << k) - 1)
        fire = ctl == (1 << k) - 1 if mode == "and" else ctl != 0
        val = j >> k
        out = ((val + 1) % (1 << n)) if fire else val
        mat[ctl | (out << k), j] = 1.0
    return mat


def reference_w_basis() -> np.ndarray:
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    x01 = np.array([[0, 1], [1, 0]])
    # Source qubit is index bit 0, target is bit 1 (kron order: target x source).
    return np.kron(np.eye(2), np.outer(plus, plus)) + np.kron(x01, np.outer(minus, minus))


def reference_or3() -> np.ndarray:
    dim = 8
    mat = np.zeros((dim, dim))
    for j in range(dim):
        q1, q2 = j & 1, (j >> 1) & 1
        mat[j ^ ((q1 | q2) << 2), j] = 1.0
    return mat
