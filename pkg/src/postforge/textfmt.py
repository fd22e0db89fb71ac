"""Line-oriented circuit text format.

Grammar (one construct per line, '#' starts a comment, blank lines ignored):

    # meta <free text>            optional, round-trips circuit metadata
    # unitary-then-terminal       optional, round-trips the discipline flag
    qubits N
    reg NAME START LEN
    matrix LABEL                  followed by 2 or 4 rows of re,im pairs
    perm LABEL: j0 j1 ...         permutation table, length a power of two
    h Q | x Q | t Q | tdg Q
    cx C T
    u LABEL Q [Q ...]             apply a defined matrix/permutation
    ctrl P Q : <gate line>        control (polarity P) wrapping, nestable
    post Q {0|1|+|-}
    measure Q LABEL

Numbers are decimal with 17 significant digits on emit, so serialize ->
parse -> serialize is byte-identical.  Definitions are emitted in first-use
order and must precede their first `u` reference.
"""

from __future__ import annotations

import re

from .errors import FormatError
from .ir import (ApplyGate, Circuit, Gate, Instruction, Measure, Postselect,
                 Register, perm_gate, std_gate, unitary_gate, X)

_LABEL_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")
_STD = {"h", "x", "t", "tdg"}


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _fmt_complex(z: complex) -> str:
    return f"{_fmt(z.real)},{_fmt(z.imag)}"


def _instruction_core(ins: ApplyGate) -> str:
    gate = ins.gate
    if gate.kind == "std":
        return f"{gate.name} {ins.qubits[0]}"
    return f"u {gate.name} " + " ".join(str(q) for q in ins.qubits)


def _instruction_line(ins: Instruction) -> str:
    if isinstance(ins, Postselect):
        return f"post {ins.qubit} {ins.target}"
    if isinstance(ins, Measure):
        return f"measure {ins.qubit} {ins.label}"
    if (ins.gate.kind == "std" and ins.gate.name == "x"
            and len(ins.controls) == 1 and ins.controls[0][1] == 1):
        return f"cx {ins.controls[0][0]} {ins.qubits[0]}"
    line = _instruction_core(ins)
    for q, p in reversed(ins.controls):
        line = f"ctrl {p} {q} : {line}"
    return line


def serialize(circuit: Circuit) -> str:
    """Canonical text for a circuit; stable byte-for-byte."""
    lines: list[str] = []
    if circuit.metadata:
        lines.append(f"# meta {circuit.metadata}")
    if circuit.unitary_then_terminal:
        lines.append("# unitary-then-terminal")
    lines.append(f"qubits {circuit.n_qubits}")
    for reg in circuit.registers:
        lines.append(f"reg {reg.name} {reg.start} {reg.size}")

    defs: dict[str, Gate] = {}
    for ins in circuit.instructions:
        if isinstance(ins, ApplyGate) and ins.gate.kind != "std":
            gate = ins.gate
            if not _LABEL_RE.match(gate.name):
                raise FormatError(f"gate label {gate.name!r} not serializable")
            prev = defs.get(gate.name)
            if prev is not None and prev != gate:
                raise FormatError(f"label {gate.name!r} bound to two different gates")
            defs.setdefault(gate.name, gate)
    for label, gate in defs.items():
        if gate.kind == "perm":
            lines.append(f"perm {label}: " + " ".join(str(v) for v in gate.perm))
        else:
            lines.append(f"matrix {label}")
            for row in gate.matrix:
                lines.append(" ".join(_fmt_complex(complex(z)) for z in row))

    for ins in circuit.instructions:
        lines.append(_instruction_line(ins))
    return "\n".join(lines) + "\n"


def _parse_complex(tok: str) -> complex:
    try:
        re_s, im_s = tok.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError as exc:
        raise FormatError(f"bad complex entry {tok!r}") from exc


def _parse_gate_line(toks: list[str], defs: dict[str, Gate],
                     controls: tuple = ()) -> ApplyGate:
    head = toks[0]
    if head == "ctrl":
        if len(toks) < 5 or toks[3] != ":":
            raise FormatError("ctrl line must be 'ctrl P Q : <gate>'")
        pol, q = int(toks[1]), int(toks[2])
        return _parse_gate_line(toks[4:], defs, controls + ((q, pol),))
    if head in _STD:
        if len(toks) != 2:
            raise FormatError(f"'{head}' takes exactly one qubit")
        return ApplyGate(std_gate(head), (int(toks[1]),), controls)
    if head == "cx":
        if len(toks) != 3:
            raise FormatError("'cx' takes control and target")
        return ApplyGate(X, (int(toks[2]),), controls + ((int(toks[1]), 1),))
    if head == "u":
        if len(toks) < 3:
            raise FormatError("'u' takes a label and at least one qubit")
        label = toks[1]
        gate = defs.get(label)
        if gate is None:
            raise FormatError(f"gate label {label!r} used before definition")
        qubits = tuple(int(t) for t in toks[2:])
        if len(qubits) != gate.arity:
            raise FormatError(f"gate {label!r} expects {gate.arity} qubits")
        return ApplyGate(gate, qubits, controls)
    raise FormatError(f"unknown instruction {head!r}")


def parse(text: str) -> Circuit:
    """Parse the canonical text format back into a circuit."""
    metadata = ""
    utt = False
    n_qubits = None
    registers: list[Register] = []
    defs: dict[str, Gate] = {}
    instructions: list[Instruction] = []

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        if raw.startswith("#"):
            body = raw[1:].strip()
            if body.startswith("meta "):
                metadata = body[len("meta "):]
            elif body == "unitary-then-terminal":
                utt = True
            continue
        toks = raw.split()
        head = toks[0]
        try:
            if head == "qubits":
                n_qubits = int(toks[1])
            elif head == "reg":
                registers.append(Register(toks[1], int(toks[2]), int(toks[3])))
            elif head == "matrix":
                label = toks[1]
                rows = []
                while i < len(lines) and lines[i].strip() and not lines[i].strip().startswith("#"):
                    probe = lines[i].split()
                    if "," not in probe[0]:
                        break
                    rows.append([_parse_complex(t) for t in probe])
                    i += 1
                    if rows and len(rows) == len(rows[0]):
                        break
                if len(rows) not in (2, 4) or any(len(r) != len(rows) for r in rows):
                    raise FormatError(f"matrix {label!r} must be 2x2 or 4x4")
                defs[label] = unitary_gate(label, rows)
            elif head == "perm":
                label = toks[1]
                if label.endswith(":"):
                    label = label[:-1]
                    table = [int(t) for t in toks[2:]]
                elif len(toks) > 2 and toks[2] == ":":
                    table = [int(t) for t in toks[3:]]
                else:
                    raise FormatError("perm line must be 'perm LABEL: j0 j1 ...'")
                defs[label] = perm_gate(label, table)
            elif head == "post":
                instructions.append(Postselect(int(toks[1]), toks[2]))
            elif head == "measure":
                instructions.append(Measure(int(toks[1]), toks[2]))
            else:
                instructions.append(_parse_gate_line(toks, defs))
        except (IndexError, ValueError) as exc:
            raise FormatError(f"bad line {i}: {raw!r}") from exc

    if n_qubits is None:
        raise FormatError("missing 'qubits' line")
    return Circuit(n_qubits=n_qubits, registers=tuple(registers),
                   instructions=tuple(instructions), metadata=metadata,
                   unitary_then_terminal=utt)
