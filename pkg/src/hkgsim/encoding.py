"""Bosonic code states, the photon-count readout rule and time-bin qubits.

The logical basis comes from phase-rotation-symmetric superpositions of a
fiducial state. For the fiducial actually used, (|N> + |2N>)/sqrt(2), the
construction collapses to bare number states: bit 0 -> |2N>, bit 1 -> |N>.
Readout compares the likelihood of an observed count under the two
codewords after loss and dark counts; ties go to bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractError, InvalidFiducialError
from .fockmath import FockDensity, FockKet, basis_ket
from .numerics import TOL
from .channels import apply_dephasing, dark_prob, loss_prob

# Poisson index beyond which dark-count mass is ignored (tail < 1e-15 for
# any lambda of practical size; checked in tests via a geometric bound).
DARK_SUM_CUTOFF = 16


@dataclass(frozen=True)
class CodeParams:
    """Code order N: codewords are |2N> and |N>."""

    n_code: int

    def __post_init__(self) -> None:
        if self.n_code < 1:
            raise ContractError(f"n_code must be >= 1, got {self.n_code}")


@dataclass(frozen=True)
class TimeBinQubit:
    """Qubit spanned by two orthogonal pulse time bins."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (2,):
            raise ContractError("a time-bin qubit has exactly two amplitudes")
        if abs(float(np.vdot(amps, amps).real) - 1.0) > TOL.unit_norm:
            raise ContractError("time-bin qubit must be normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def to_density(self) -> FockDensity:
        return FockDensity(2, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TimeBinQubit) and np.array_equal(
            self.amplitudes, other.amplitudes
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class CountDistribution:
    """Distribution of detected photon counts m = 0 .. len(probs)-1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.size == 0 or np.any(p < -TOL.psd):
            raise ContractError("count probabilities must be nonnegative")
        total = float(p.sum())
        if not (1.0 - TOL.trace_deficit <= total <= 1.0 + TOL.trace_slack):
            raise ContractError(f"count probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def prob(self, m: int) -> float:
        return float(self.probs[m]) if 0 <= m < self.probs.size else 0.0


def rotation_code_basis(n_code: int, theta: FockKet) -> tuple[FockKet, FockKet]:
    """Logical (|0>, |1>) built from 2N phase rotations of the fiducial.

    The rotation by m*pi/N multiplies the level-j amplitude by
    exp(i*pi*m*j/N); summing over m keeps levels j = 0 mod 2N for the plus
    combination and j = N mod 2N for the alternating one. The fiducial must
    have support on both residue classes or the corresponding logical state
    would vanish.
    """
    if n_code < 1:
        raise ContractError(f"n_code must be >= 1, got {n_code}")
    levels = np.arange(theta.dim)
    zero = np.zeros(theta.dim, dtype=complex)
    one = np.zeros(theta.dim, dtype=complex)
    for m in range(2 * n_code):
        phase = np.exp(1j * math.pi * m * levels / n_code)
        zero += phase * theta.amplitudes
        one += (-1.0) ** m * phase * theta.amplitudes
    even_support = np.any(np.abs(zero) > TOL.support * 2 * n_code)
    odd_support = np.any(np.abs(one) > TOL.support * 2 * n_code)
    if not even_support or not odd_support:
        missing = "even" if not even_support else "odd"
        raise InvalidFiducialError(
            f"fiducial has no support on {missing} multiples of N={n_code}"
        )
    ket0 = FockKet(theta.dim, zero).normalize()
    ket1 = FockKet(theta.dim, one).normalize()
    return ket0, ket1


def code_ket(n_code: int, bit: int, dim: int) -> FockKet:
    """Codeword |2N> for bit 0, |N> for bit 1."""
    if bit not in (0, 1):
        raise ContractError(f"bit must be 0 or 1, got {bit}")
    level = 2 * n_code if bit == 0 else n_code
    if level >= dim:
        raise ContractError(
            f"dim {dim} too small: codeword |{level}> needs dim >= {level + 1}"
        )
    return basis_ket(dim, level)


def code_superposition_ket(n_code: int, xi: int, dim: int) -> FockKet:
    """Codeword superposition (|2N> + (-1)^xi |N>)/sqrt(2)."""
    if xi not in (0, 1):
        raise ContractError(f"xi must be 0 or 1, got {xi}")
    sign = 1.0 if xi == 0 else -1.0
    amps = (
        code_ket(n_code, 0, dim).amplitudes
        + sign * code_ket(n_code, 1, dim).amplitudes
    ) / math.sqrt(2.0)
    return FockKet(dim, amps)


def code_plus_ket(n_code: int, dim: int) -> FockKet:
    """Equal superposition (|2N> + |N>)/sqrt(2) of the two codewords."""
    return code_superposition_ket(n_code, 0, dim)


@lru_cache(maxsize=None)
def count_distribution(M: int, eta: float, lambda_dc: float) -> CountDistribution:
    """Detected-count distribution for M sent photons under loss and darks.

    probs[m] = sum over (i lost, j dark) with M - i + j = m of
    loss_prob(i, M, eta) * dark_prob(j, lambda_dc).
    """
    if M < 0:
        raise ContractError("photon number must be nonnegative")
    kept = np.array([loss_prob(M - m, M, eta) for m in range(M + 1)])
    dark = np.array([dark_prob(j, lambda_dc) for j in range(DARK_SUM_CUTOFF + 1)])
    return CountDistribution(np.convolve(kept, dark))


@lru_cache(maxsize=None)
def decision_table(n_code: int, eta: float, lambda_dc: float, length: int) -> tuple:
    """bit assigned to each count m < length; built once per channel setting."""
    p0 = count_distribution(2 * n_code, eta, lambda_dc)
    p1 = count_distribution(n_code, eta, lambda_dc)
    return tuple(0 if p0.prob(m) >= p1.prob(m) else 1 for m in range(length))


def readout_decision(m: int, n_code: int, eta: float, lambda_dc: float) -> int:
    """Bit read from count m: 0 whenever m is at least as likely under the
    bit-0 codeword as under the bit-1 codeword (equal priors; ties -> 0)."""
    if m < 0:
        raise ContractError("count must be nonnegative")
    table = decision_table(n_code, eta, lambda_dc, 2 * n_code + DARK_SUM_CUTOFF + 1)
    if m < len(table):
        return table[m]
    # beyond both supports: every extra count needs one more dark, which is
    # always cheaper starting from the higher codeword
    return 0


def expected_qber_fock(n_code: int, eta: float, lambda_dc: float) -> float:
    """Error rate of the count readout, averaged over equiprobable codewords.

    Dephasing plays no role: it never changes count statistics.
    """
    p0 = count_distribution(2 * n_code, eta, lambda_dc)
    p1 = count_distribution(n_code, eta, lambda_dc)
    length = max(p0.probs.size, p1.probs.size)
    err = 0.0
    for m in range(length):
        if readout_decision(m, n_code, eta, lambda_dc) == 1:
            err += p0.prob(m)
        else:
            err += p1.prob(m)
    return 0.5 * err


def timebin_state(which) -> TimeBinQubit:
    """|0>, |1>, or the (|0> +/- |1>)/sqrt(2) superpositions ("plus"/"minus")."""
    s = math.sqrt(0.5)
    if which in (0, 1):
        amps = [1.0, 0.0] if which == 0 else [0.0, 1.0]
    elif which == "plus":
        amps = [s, s]
    elif which == "minus":
        amps = [s, -s]
    else:
        raise ContractError(f"unknown time-bin state {which!r}")
    return TimeBinQubit(np.array(amps, dtype=complex))


def timebin_superposition(xi: int) -> TimeBinQubit:
    """(|0> + (-1)^xi |1>)/sqrt(2)."""
    if xi not in (0, 1):
        raise ContractError(f"xi must be 0 or 1, got {xi}")
    return timebin_state("plus" if xi == 0 else "minus")


_FLIP = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def apply_timebin_noise(
    q: FockDensity, gamma_tb: float, flip_prob: float
) -> FockDensity:
    """Qubit dephasing followed by a symmetric bit flip on a time-bin state."""
    if q.dim != 2:
        raise ContractError("time-bin noise acts on 2-dimensional states")
    if gamma_tb < 0:
        raise ContractError(f"gamma_tb must be nonnegative, got {gamma_tb}")
    if not 0.0 <= flip_prob <= 0.5:
        raise ContractError(f"flip_prob must lie in [0, 0.5], got {flip_prob}")
    out = apply_dephasing(q, gamma_tb)
    if flip_prob > 0.0:
        m = (1.0 - flip_prob) * out.matrix + flip_prob * (_FLIP @ out.matrix @ _FLIP)
        out = FockDensity(2, m, validate=q.validate)
    return out
