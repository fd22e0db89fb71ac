"""Circuit builders for eliminating intermediate postselections.

The chain, for an automaton with exact acceptance probability p = a/2^T:

1. ``build_postselect_circuit`` emits a circuit with *intermediate*
   postselections.  A reusable coin qubit realizes the two-permutation
   average amplitude-exactly (H, coin-controlled permutations, H,
   postselect coin at 0, once per step); collapsing the non-flag config
   qubits onto the plus basis leaves the flag holding (1-p)|0> + p|1>;
   a round-indexed block-encoded combiner then maps that to
   (1/2+p)|0> + 2^(T-k)(1/2-p)|1> for the round index k held in K.
2. ``unitarize`` removes every postselect by incrementing counter C when
   the postselect qubit is in the non-selecting state; the C=0 component
   of the result reproduces the postselected state exactly because the
   counter can never wrap back to zero.
3. ``build_accumulator`` stacks T+1 rounds of run / tag bad branches on
   counter D / controlled un-run / tag nonzero leftovers, concentrating
   the product of squared plus-overlaps (sign "+") or minus-overlaps
   (sign "-") onto the all-zero amplitude.
4. ``build_decision_circuit`` runs the two accumulator stacks r times in
   the two halves of a decision qubit W, postselects D at zero, and
   measures W; the conditional W statistics decide p > 1/2 vs p < 1/2.
5. ``wrap_dqc1`` / ``bell_mixed_prep`` port the decision circuit to the
   one-clean-qubit input model.

W outcome 0 favors the plus products, i.e. p < 1/2 (reject); outcome 1
favors accept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .automaton import Automaton, Dyadic, HALF, accept_probability
from .errors import (CounterTooSmall, LayoutMismatch, LayoutTooSmall,
                     NonTerminalMarkers, NonUnitaryInput, ZeroMatrix)
from .ir import (ApplyGate, Circuit, Gate, H, Instruction, Measure, Postselect,
                 Register, RegisterLayout, X, add_controls, cx,
                 invert_instructions, mcx, perm_gate, remap_instructions,
                 repeat_instructions, unitary_gate)
from .oracle import Spectrum, measure_gamma, predicted_conditional_acceptance, spectrum_of
from .sim import SimulationReport, run, run_dqc1_mixed
from .synth import gadget_or3, gadget_w_basis


def block_encode_2x2(mat) -> tuple[np.ndarray, float]:
    """Embed a real 2x2 matrix as the top-left block of a 4x4 orthogonal gate.

    Returns (U, s) with U[0:2, 0:2] == mat / s and s = max(1, ||mat||_2).
    Applying U to (state, ancilla=|0>) and postselecting the ancilla at 0
    implements state -> (mat/s) state on unnormalized amplitudes.  The
    completion is the cosine-sine form built from the SVD.
    """
    m = np.asarray(mat, dtype=float)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise ValueError("block encoding expects a finite real 2x2 matrix")
    if np.all(m == 0.0):
        raise ZeroMatrix("cannot block-encode the zero matrix")
    p, sig, qt = np.linalg.svd(m)
    s = max(1.0, float(sig[0]))
    sig = sig / s
    cos = np.diag(sig)
    sin = np.diag(np.sqrt(np.maximum(0.0, 1.0 - sig * sig)))
    core = np.block([[cos, -sin], [sin, cos]])
    side_l = np.block([[p, np.zeros((2, 2))], [np.zeros((2, 2)), p]])
    side_r = np.block([[qt, np.zeros((2, 2))], [np.zeros((2, 2)), qt]])
    return side_l @ core @ side_r, s


def _inc_perm_gate(width: int) -> Gate:
    return perm_gate(f"inc{1 << width}", [(j + 1) % (1 << width) for j in range(1 << width)])


def _incmod_perm_gate(modulus: int, width: int) -> Gate:
    table = [(j + 1) % modulus if j < modulus else j for j in range(1 << width)]
    return perm_gate(f"incmod_{modulus}", table)


def _msb_first(qubits) -> tuple[int, ...]:
    return tuple(reversed(tuple(qubits)))


def build_postselect_circuit(aut: Automaton, layout: RegisterLayout) -> Circuit:
    """Stage "qx": the circuit with intermediate postselections.

    For every round index k in 0..T, running on |0...0>|k> and conditioning
    on all postselections leaves the flag qubit proportional to
    (1/2+p)|0> + 2^(T-k)(1/2-p)|1> with everything else at |0> and K
    unchanged.  Postselect count is T + (m-1) + 1.
    """
    p_a = accept_probability(aut)
    if layout.m != aut.m or layout.T != aut.T:
        raise LayoutTooSmall("layout was built for a different automaton shape")
    if (1 << layout.k_width) < aut.T + 1:
        raise LayoutTooSmall("K register cannot hold the round index")

    flag = layout.r1_index
    coin = layout.coin_index
    anc = layout.combiner_anc_index
    cfg = _msb_first(layout.config_qubits)
    kq = layout.k_qubits()
    T = aut.T

    pi0 = perm_gate("pi0", aut.perm0)
    pi1 = perm_gate("pi1", aut.perm1)

    instrs: list[Instruction] = []
    for j in layout.config_qubits:
        if (aut.init >> j) & 1:
            instrs.append(ApplyGate(X, (j,)))
    for _ in range(T):
        instrs.append(ApplyGate(H, (coin,)))
        instrs.append(ApplyGate(pi0, cfg, ((coin, 0),)))
        instrs.append(ApplyGate(pi1, cfg, ((coin, 1),)))
        instrs.append(ApplyGate(H, (coin,)))
        # postselect the coin at 0, then return it to |0> for the next round
        instrs.append(ApplyGate(X, (coin,)))
        instrs.append(Postselect(coin, "1"))
        instrs.append(ApplyGate(X, (coin,)))
    for q in layout.config_qubits[1:]:
        instrs.append(ApplyGate(H, (q,)))
        instrs.append(ApplyGate(X, (q,)))
        instrs.append(Postselect(q, "1"))
        instrs.append(ApplyGate(X, (q,)))
    instrs.append(ApplyGate(H, (flag,)))
    for k in range(T + 1):
        mat = np.array([[1.0, -0.5], [0.0, 2.0 ** (T - k - 1)]])
        enc, _scale = block_encode_2x2(mat)
        gate = unitary_gate(f"benc_{k}", enc)
        pattern = tuple((kq[j], (k >> j) & 1) for j in range(layout.k_width))
        instrs.append(ApplyGate(gate, (anc, flag), pattern))
    instrs.append(ApplyGate(X, (anc,)))
    instrs.append(Postselect(anc, "1"))
    instrs.append(ApplyGate(X, (anc,)))

    return Circuit(n_qubits=layout.qubits_for("qx"),
                   registers=layout.registers_for("qx"),
                   instructions=tuple(instrs),
                   metadata=f"stage=qx m={aut.m} T={aut.T} p_a={p_a}")


def unitarize(qx: Circuit, layout: RegisterLayout) -> Circuit:
    """Stage "vx": replace each postselect with a counter increment.

    Every ``post q 1`` becomes X(q), increment C controlled on q, X(q):
    the counter advances exactly on the non-selecting branch.  Needs
    2^c_width - 1 strictly greater than the postselect count so a branch
    that leaves C=0 can never return.
    """
    posts = qx.postselects()
    if (1 << layout.c_width) - 1 <= len(posts):
        raise CounterTooSmall(
            f"counter width {layout.c_width} cannot exceed {len(posts)} postselections")
    if any(p.target != "1" for p in posts):
        raise ValueError("unitarize requires desugared (target-1) postselections")
    if qx.measures():
        raise NonUnitaryInput("postselect-stage circuit must not measure")

    inc_c = _inc_perm_gate(layout.c_width)
    c_msb = _msb_first(layout.c_qubits())
    instrs: list[Instruction] = []
    for ins in qx.instructions:
        if isinstance(ins, Postselect):
            q = ins.qubit
            instrs.append(ApplyGate(X, (q,)))
            instrs.append(ApplyGate(inc_c, c_msb, ((q, 1),)))
            instrs.append(ApplyGate(X, (q,)))
        else:
            instrs.append(ins)
    return Circuit(n_qubits=layout.qubits_for("vx"),
                   registers=layout.registers_for("vx"),
                   instructions=tuple(instrs),
                   metadata=qx.metadata.replace("stage=qx", "stage=vx"),
                   unitary_then_terminal=True)


def build_accumulator(vx: Circuit, layout: RegisterLayout, sign: str) -> Circuit:
    """Accumulator stack: T+1 rounds concentrating the overlap products.

    Round body on registers (R, C, D, K):
      1. run the unitarized circuit;
      2. increment D if C is nonzero OR the flag qubit is in |-> (sign "+")
         / |+> (sign "-"), via three ancillas: an OR-controlled flip of q1
         from C, the plus/minus detector onto q2, their OR into q3, one
         increment of D controlled on q3, then full uncompute;
      3. if D is zero, invert step 1;
      4. increment D if (R, C) is not all-zero;
      5. advance K modulo T+1.
    The stack ends with T+1 inverse advances of K.  The all-zero amplitude
    of the result is gamma * prod_k alpha_k^2 (sign "+") or
    gamma * prod_k beta_k^2 (sign "-").
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if vx.n_qubits != layout.qubits_for("vx"):
        raise LayoutMismatch("unitarized circuit does not match the layout")
    T = layout.T
    flag = layout.r1_index
    q1 = layout.anc_start
    q2 = q1 + 1
    q3 = q1 + 2
    c_qubits = layout.c_qubits()
    d_msb = _msb_first(layout.d_qubits())
    rc_qubits = tuple(range(layout.ell)) + c_qubits
    inc_d = _inc_perm_gate(layout.d_width)
    inc_k = _incmod_perm_gate(T + 1, layout.k_width)
    k_msb = _msb_first(layout.k_qubits())

    compute: list[Instruction] = [ApplyGate(X, (q1,)),
                                  mcx(((c, 0) for c in c_qubits), q1)]
    if sign == "+":
        compute += remap_instructions(gadget_w_basis().circuit.instructions, {0: flag, 1: q2})
    else:
        compute += [ApplyGate(H, (flag,)), ApplyGate(X, (flag,)),
                    cx(flag, q2),
                    ApplyGate(X, (flag,)), ApplyGate(H, (flag,))]
    compute += remap_instructions(gadget_or3().circuit.instructions, {0: q1, 1: q2, 2: q3})

    step2 = tuple(compute) + (ApplyGate(inc_d, d_msb, ((q3, 1),)),) \
        + invert_instructions(compute)
    step3 = add_controls(invert_instructions(vx.instructions),
                         ((d, 0) for d in layout.d_qubits()))
    step4 = (ApplyGate(inc_d, d_msb),
             ApplyGate(inc_d.dagger(), d_msb, tuple((q, 0) for q in rc_qubits)))
    step5 = (ApplyGate(inc_k, k_msb),)

    body = tuple(vx.instructions) + step2 + step3 + step4 + step5
    instrs = body * (T + 1) + (ApplyGate(inc_k.dagger(), k_msb),) * (T + 1)
    stage = "uplus" if sign == "+" else "uminus"
    return Circuit(n_qubits=layout.qubits_for("acc"),
                   registers=layout.registers_for("acc"),
                   instructions=instrs,
                   metadata=vx.metadata.replace("stage=vx", f"stage={stage} r=1"),
                   unitary_then_terminal=True)


def build_decision_circuit(uplus: Circuit, uminus: Circuit,
                           layout: RegisterLayout, r: int) -> Circuit:
    """Final circuit: H on W, r-fold accumulators in the two W halves,
    terminal postselect of D at all-zero, terminal measure of W."""
    if r < 1:
        raise ValueError("repetition count must be >= 1")
    if uplus.n_qubits != uminus.n_qubits or uplus.registers != uminus.registers:
        raise LayoutMismatch("accumulators disagree on their register layout")
    if uplus.n_qubits != layout.qubits_for("acc"):
        raise LayoutMismatch("accumulators do not match the layout")
    w = layout.w_index
    instrs: list[Instruction] = [ApplyGate(H, (w,))]
    instrs += add_controls(repeat_instructions(uplus.instructions, r), ((w, 0),))
    instrs += add_controls(repeat_instructions(uminus.instructions, r), ((w, 1),))
    for d in layout.d_qubits():
        instrs.append(ApplyGate(X, (d,)))
    for d in layout.d_qubits():
        instrs.append(Postselect(d, "1"))
    instrs.append(Measure(w, "W"))
    meta = uplus.metadata.replace("stage=uplus r=1", f"stage=final r={r}")
    return Circuit(n_qubits=layout.qubits_for("final"),
                   registers=layout.registers_for("final"),
                   instructions=tuple(instrs), metadata=meta,
                   unitary_then_terminal=True)


@dataclass(frozen=True)
class BuildArtifacts:
    """Everything one automaton compiles into, plus measured branch scales."""

    automaton: Automaton
    p_a: Dyadic
    layout: RegisterLayout
    spectrum: Spectrum
    qx: Circuit
    vx: Circuit
    uplus: Circuit
    uminus: Circuit
    final: Circuit
    gamma_k: tuple[float, ...]
    gamma: float


def build_artifacts(aut: Automaton, r: int = 1,
                    counter_width: int | None = None) -> BuildArtifacts:
    p_a = accept_probability(aut)
    layout = RegisterLayout.create(aut.m, aut.T, r, counter_width)
    spectrum = spectrum_of(p_a, aut.T)
    qx = build_postselect_circuit(aut, layout)
    vx = unitarize(qx, layout)
    gammas = []
    for k in range(aut.T + 1):
        rep = run(vx, initial=k << layout.k_start)
        gammas.append(measure_gamma(rep, spectrum, k))
    uplus = build_accumulator(vx, layout, "+")
    uminus = build_accumulator(vx, layout, "-")
    final = build_decision_circuit(uplus, uminus, layout, r)
    gamma = float(np.prod([g * g for g in gammas]))
    return BuildArtifacts(aut, p_a, layout, spectrum, qx, vx, uplus, uminus,
                          final, tuple(gammas), gamma)


@dataclass(frozen=True)
class DecisionReport:
    verdict: str                  # "accept" or "reject"
    correct: bool                 # verdict agrees with the exact p_a
    p_a: Dyadic
    r: int
    p_post: float
    p_correct: float              # conditional probability of the correct outcome
    cond: tuple[float, float]     # (P[W=0 | post], P[W=1 | post])
    c: float                      # completeness threshold 1 - 2^-r
    d: float                      # soundness threshold 2^-r
    bound_ok: bool
    artifacts: BuildArtifacts
    report: SimulationReport

    def text(self) -> str:
        return "\n".join([
            f"verdict {self.verdict}",
            f"p_a {self.p_a}",
            f"p_post {self.p_post:.17g}",
            f"p_correct {self.p_correct:.17g}",
            f"bound {self.c:.17g}",
        ]) + "\n"


def decide(aut: Automaton, r: int = 1, counter_width: int | None = None,
           dqc1: bool = False) -> DecisionReport:
    """Build the full pipeline, simulate, and compare against ground truth."""
    art = build_artifacts(aut, r, counter_width)
    if dqc1:
        wrapped = wrap_dqc1(art.final)
        rep = run_dqc1_mixed(wrapped, clean=wrapped.n_qubits - 1)
    else:
        rep = run(art.final)
    p0, p1 = rep.cond["W"]
    accept = p1 > p0
    truth_accept = HALF < art.p_a
    p_correct = p1 if truth_accept else p0
    c = 1.0 - 2.0 ** (-r)
    return DecisionReport(
        verdict="accept" if accept else "reject",
        correct=accept == truth_accept,
        p_a=art.p_a, r=r, p_post=rep.p_post, p_correct=p_correct,
        cond=(p0, p1), c=c, d=2.0 ** (-r),
        bound_ok=p_correct > c, artifacts=art, report=rep)


def predicted_decision(aut: Automaton, r: int) -> tuple[float, float]:
    """Oracle counterpart of ``decide``: (P[W=0|post], P[W=1|post])."""
    return predicted_conditional_acceptance(accept_probability(aut), aut.T, r)


def wrap_dqc1(circuit: Circuit, postselect_qubits=None, output: int | None = None) -> Circuit:
    """Port a terminal-marker circuit to the one-clean-qubit input model.

    Adds one clean qubit (highest index), flips it when every original
    qubit is zero, runs the original gates, and postselects the clean qubit
    at 1 alongside the original postselections.  On the mixed input
    |0><0| x (I/2)^m only the all-zero branch survives, so conditional
    statistics match the pure all-zero run and p_post scales by exactly
    2^-m.
    """
    first_marker = None
    for pos, ins in enumerate(circuit.instructions):
        if not isinstance(ins, ApplyGate):
            if first_marker is None:
                first_marker = pos
        elif first_marker is not None:
            raise NonTerminalMarkers("gates appear after postselect/measure markers")
    gates = circuit.instructions if first_marker is None else circuit.instructions[:first_marker]
    markers = () if first_marker is None else circuit.instructions[first_marker:]

    post_qubits = [p.qubit for p in circuit.postselects()]
    if postselect_qubits is not None:
        wanted = [postselect_qubits] if isinstance(postselect_qubits, int) else list(postselect_qubits)
        if sorted(wanted) != sorted(post_qubits):
            raise ValueError("declared postselect qubits do not match the circuit")
    if output is not None and output not in [m.qubit for m in circuit.measures()]:
        raise ValueError("declared output qubit is not measured")

    m = circuit.n_qubits
    clean = m
    instrs = (mcx(((q, 0) for q in range(m)), clean),) + tuple(gates) \
        + (Postselect(clean, "1"),) + tuple(markers)
    registers = circuit.registers
    if registers:
        registers = registers + (Register("CLEAN", clean, 1),)
    return Circuit(n_qubits=m + 1, registers=registers, instructions=instrs,
                   metadata=(circuit.metadata + " dqc1").strip(),
                   unitary_then_terminal=True)


def bell_mixed_prep(m: int) -> Circuit:
    """m entangled pairs; the kept half alone behaves as (I/2)^m.

    Discarding the partner half reproduces the one-clean-qubit input
    statistics: every kept-half basis outcome has probability 2^-m.
    """
    if m < 1:
        raise ValueError("need at least one pair")
    instrs: list[Instruction] = []
    for i in range(m):
        instrs.append(ApplyGate(H, (i,)))
        instrs.append(cx(i, m + i))
    return Circuit(n_qubits=2 * m,
                   registers=(Register("KEPT", 0, m), Register("PART", m, m)),
                   instructions=tuple(instrs), metadata=f"bell_pairs m={m}",
                   unitary_then_terminal=True)
