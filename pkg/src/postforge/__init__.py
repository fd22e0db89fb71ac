"""postforge: compile intermediate postselections out of quantum circuits.

From a reversible probabilistic automaton with exact dyadic acceptance
probability, build the postselection circuit, its counter-based unitary
form, the plus/minus accumulators, the final decision circuit, and
one-clean-qubit wrappings; verify every state equation and probability
bound by dense statevector simulation.
"""

from .automaton import (Automaton, Dyadic, accept_probability, acceptance_count,
                        flip_flag, parse_automaton, random_automaton, relabel,
                        serialize_automaton, step_distribution)
from .errors import (CounterTooSmall, DegenerateBranch, FormatError,
                     HalfProbability, LayoutMismatch, LayoutTooSmall,
                     NonTerminalMarkers, NonTerminalPostselect,
                     NonUnitaryInput, PostforgeError, TooWide,
                     UnsupportedGate, ZeroMatrix, ZeroOverlap)
from .ir import (ApplyGate, Circuit, Gate, GateStats, H, Instruction, Measure,
                 Postselect, Register, RegisterLayout, T, TDG, X,
                 aggregate_postselections, controlled_wrap,
                 desugar_postselections, gate_stats, perm_gate, std_gate,
                 unitary_gate, validate)
from .oracle import (BranchCoeffs, Spectrum, branch_coefficients,
                     measure_gamma, predicted_conditional_acceptance,
                     spectrum_of)
from .pipeline import (BuildArtifacts, DecisionReport, bell_mixed_prep,
                       block_encode_2x2, build_accumulator, build_artifacts,
                       build_decision_circuit, build_postselect_circuit,
                       decide, unitarize, wrap_dqc1)
from .sim import (SimulationReport, StateVector, apply_instruction, run,
                  run_dqc1_mixed, unitary_of)
from .synth import (SynthResult, data_block_unitary, gadget_or3,
                    gadget_w_basis, synth_controlled_gate,
                    synth_controlled_inc, synth_inc_mod, synth_inc_pow2,
                    synth_mcx, synth_or_controlled_gate)
from .textfmt import parse, serialize

__version__ = "0.1.0"
