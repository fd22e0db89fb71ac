"""Closed-form ground truth for the pipeline's branch states and statistics.

For acceptance probability p and round index k the flag qubit's target state
has unnormalized coefficients

    c0 = 1/2 + p        on |0>
    c1 = 2^(T-k) (1/2 - p)   on |1>

with plus/minus-basis overlaps alpha = (c0+c1)/sqrt(2), beta = (c0-c1)/sqrt(2).
The decision circuit's conditional outcome statistics depend only on the
products of alpha^(4r) and beta^(4r) over k, so they are predictable here
without any simulation; products are taken in log space because they
underflow doubles already around T ~ 10, r ~ 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .automaton import Dyadic, HALF
from .errors import DegenerateBranch, HalfProbability
from .sim import SimulationReport

GAP_DELTA = 16.0 / 9.0  # slack constant in the decisive-index ratio bound

_SQRT2 = math.sqrt(2.0)


class BranchCoeffs(NamedTuple):
    c0: float
    c1: float
    alpha: float
    beta: float


def _exact_coeffs(p_a: Dyadic, T: int, k: int) -> tuple[Dyadic, Dyadic]:
    c0 = HALF + p_a
    c1 = (HALF - p_a) * (1 << (T - k))
    return c0, c1


def branch_coefficients(p_a: Dyadic, T: int, k: int) -> BranchCoeffs:
    """Exact flag-state coefficients and their +/- overlaps for round k."""
    if not 0 <= k <= T:
        raise ValueError("k must lie in [0, T]")
    if p_a == HALF:
        raise HalfProbability("coefficients undefined at p = 1/2")
    c0, c1 = _exact_coeffs(p_a, T, k)
    return BranchCoeffs(float(c0), float(c1),
                        (float(c0) + float(c1)) / _SQRT2,
                        (float(c0) - float(c1)) / _SQRT2)


@dataclass(frozen=True)
class Spectrum:
    """All per-k branch data for one (p_a, T) pair."""

    p_a: Dyadic
    T: int
    coeffs: tuple[BranchCoeffs, ...]
    delta: float = GAP_DELTA

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.coeffs])

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.coeffs])

    def norm_sq(self, k: int) -> float:
        c = self.coeffs[k]
        return c.c0 * c.c0 + c.c1 * c.c1


def spectrum_of(p_a: Dyadic, T: int) -> Spectrum:
    return Spectrum(p_a, T, tuple(branch_coefficients(p_a, T, k) for k in range(T + 1)))


def predicted_conditional_acceptance(p_a: Dyadic, T: int, r: int) -> tuple[float, float]:
    """(P[W=0 | post], P[W=1 | post]) for the r-fold decision circuit.

    Equal to A/(A+B) and B/(A+B) with A, B the products of alpha_k^(4r) and
    beta_k^(4r); evaluated from exact dyadic coefficients via log-space sums.
    """
    if r < 1:
        raise ValueError("repetition count must be >= 1")
    if p_a == HALF:
        raise HalfProbability("conditional statistics undefined at p = 1/2")
    log_u = 0.0
    log_v = 0.0
    for k in range(T + 1):
        c0, c1 = _exact_coeffs(p_a, T, k)
        u = (c0 + c1).reduced_pair()
        v = (c0 - c1).reduced_pair()
        if u[0] == 0:
            return (0.0, 1.0)
        if v[0] == 0:
            return (1.0, 0.0)
        log_u += math.log(abs(u[0])) - u[1] * math.log(2.0)
        log_v += math.log(abs(v[0])) - v[1] * math.log(2.0)
    s = 4.0 * r * (log_v - log_u)  # log(B/A)
    if s <= 0.0:
        ratio = math.exp(s)
        return (1.0 / (1.0 + ratio), ratio / (1.0 + ratio))
    ratio = math.exp(-s)  # A/B
    return (ratio / (1.0 + ratio), 1.0 / (1.0 + ratio))


def measure_gamma(report: SimulationReport, spectrum: Spectrum, k: int,
                  tol: float = 1e-9) -> float:
    """Good-branch scale factor of a counter-unitarized run at round k.

    Takes the report of running the unitarized circuit on |0...0>|k>,
    extracts the component with counter register C at zero, checks it is
    proportional to the predicted flag state (everything else at |0>), and
    returns gamma_k = ||C=0 component|| / ||flag state||.
    """
    state = report.final_state()
    circuit = report.circuit
    creg = circuit.register("C")
    if creg.start + creg.size != circuit.n_qubits:
        raise ValueError("expected counter register C in the top qubit positions")
    good = state[: 1 << creg.start]

    mass = float(np.vdot(good, good).real)
    if mass < 1e-300:
        raise DegenerateBranch(f"counter-zero branch carries no mass at k={k}")

    kreg = circuit.register("K")
    expected = np.zeros(good.size, dtype=complex)
    base = k << kreg.start
    coeff = spectrum.coeffs[k]
    expected[base] = coeff.c0
    expected[base + 1] = coeff.c1
    expected /= np.linalg.norm(expected)

    ghat = good / math.sqrt(mass)
    residual = np.linalg.norm(ghat - np.vdot(expected, ghat) * expected)
    if residual > tol:
        raise ValueError(f"counter-zero branch deviates from the predicted "
                         f"flag state at k={k} (residual {residual:.3g})")
    return math.sqrt(mass) / math.sqrt(spectrum.norm_sq(k))
