"""Exception types shared across the package.

Each error maps to one failure mode of the compilation or simulation
contracts; the CLI translates the ones users can trigger into exit codes.
"""


class PostforgeError(Exception):
    """Base class for all package errors."""


class NonTerminalPostselect(PostforgeError):
    """A postselect marker is followed by a gate acting on the same qubit."""


class NonUnitaryInput(PostforgeError):
    """An operation that requires a pure gate circuit received markers."""


class NonTerminalMarkers(PostforgeError):
    """Postselect/measure markers are not confined to the circuit tail."""


class UnsupportedGate(PostforgeError):
    """Gate outside the primitive/opaque set accepted by a synthesizer."""


class ZeroOverlap(PostforgeError):
    """A postselection annihilated the state (success probability 0)."""


class TooWide(PostforgeError):
    """Qubit count exceeds a dense-simulation width cap."""


class HalfProbability(PostforgeError):
    """Automaton acceptance probability is exactly 1/2 and cannot be decided."""


class CounterTooSmall(PostforgeError):
    """Failure counter cannot exceed the number of postselections."""


class LayoutTooSmall(PostforgeError):
    """Register layout does not fit the automaton it is paired with."""


class LayoutMismatch(PostforgeError):
    """Two circuits expected to share a register layout do not."""


class ZeroMatrix(PostforgeError):
    """Block encoding requested for the all-zero matrix."""


class DegenerateBranch(PostforgeError):
    """The counter-zero branch carries no amplitude mass."""


class FormatError(PostforgeError):
    """Malformed circuit or automaton text."""
