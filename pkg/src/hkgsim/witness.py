"""Coherence witnesses, reference states and the calibration cost function.

A witness is the difference between a state's dephased and undephased
projector; a negative expectation certifies that the measured ensemble
still carries superposition. The cost function chi evaluates the Fock-side
witness over the fiber output of the codeword superposition, in closed
form; an independent route through the Kraus pipeline must agree with it
to high precision, which is the central self-check of the whole library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import NoiseParams, apply_fiber, dark_prob, dephase_factor, loss_prob
from .encoding import TimeBinQubit, code_plus_ket, timebin_state
from .errors import ContractError, DimensionMismatchError, NumericConsistencyError
from .fockmath import (
    DARK_CUTOFF,
    FockDensity,
    FockKet,
    HermitianOp,
    expectation,
    full_dephase,
)
from .numerics import TOL

# Terms of the dark-count sum kept in the closed form; the Poisson tail
# beyond 10 is < 1e-15 for every lambda below ~0.5.
DEFAULT_M_CUTOFF = 10


@dataclass(frozen=True)
class WitnessOp:
    """Dephased-minus-plain projector of a source state."""

    op: HermitianOp
    source_state_label: str

    def __post_init__(self) -> None:
        tr = float(np.trace(self.op.matrix).real)
        if abs(tr) > TOL.hermitian:
            raise NumericConsistencyError(f"witness trace {tr!r} should vanish")


@dataclass(frozen=True)
class SwapTestTally:
    """Outcome counts of repeated swap tests against a reference."""

    trials: int
    zeros_observed: int

    def __post_init__(self) -> None:
        if self.trials < 0 or not 0 <= self.zeros_observed <= self.trials:
            raise ContractError("zeros_observed must lie in [0, trials]")

    @property
    def overlap_estimate(self) -> float:
        """Unbiased estimate of Tr[rho sigma] from the ancilla statistics."""
        if self.trials == 0:
            raise ContractError("no trials recorded")
        return 2.0 * self.zeros_observed / self.trials - 1.0


@dataclass(frozen=True)
class ChiPoint:
    """One evaluation of the cost function on the sweep grid."""

    n_code: int
    l: int
    noise: NoiseParams
    value: float

    def __post_init__(self) -> None:
        if not -0.5 - TOL.exact_anchor <= self.value <= 0.0 + TOL.exact_anchor:
            raise ContractError(f"chi value {self.value!r} outside [-1/2, 0]")


def witness_from_pure(sigma_ket: FockKet, label: str = "") -> WitnessOp:
    """Witness built from a pure source state: Delta(|s><s|) - |s><s|."""
    if abs(sigma_ket.norm_sq - 1.0) > TOL.unit_norm:
        raise ContractError("source ket must be normalized")
    sigma = sigma_ket.to_density()
    w = full_dephase(sigma).matrix - sigma.matrix
    return WitnessOp(HermitianOp(sigma_ket.dim, w), label or f"pure[{sigma_ket.dim}]")


def reference_timebin() -> TimeBinQubit:
    """Time-bin reference (|0> + |1>)/sqrt(2) Bob swap-tests against."""
    return timebin_state("plus")


def reference_fock(l: int, n_code: int, dim: int) -> FockKet:
    """Fock reference (|l + N> + |l>)/sqrt(2) for calibration level l."""
    if l < 0:
        raise ContractError(f"l must be nonnegative, got {l}")
    if l + n_code >= dim:
        raise ContractError(
            f"dim {dim} too small: reference needs level {l + n_code}"
        )
    amps = np.zeros(dim, dtype=complex)
    amps[l] = amps[l + n_code] = math.sqrt(0.5)
    return FockKet(dim, amps)


def witness_expectation_exact(rho: FockDensity, w: WitnessOp) -> float:
    """Tr[rho W]; always within [-1, 1] for a well-formed witness."""
    if rho.dim != w.op.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != witness dim {w.op.dim}")
    value = expectation(rho, w.op)
    if not -1.0 - TOL.trace_slack <= value <= 1.0 + TOL.trace_slack:
        raise NumericConsistencyError(f"witness expectation {value!r} outside [-1, 1]")
    return value


def swap_test_sample(overlap: float, trials: int, rng_seed: int) -> SwapTestTally:
    """Simulate swap tests: the ancilla reads 0 with probability (1+overlap)/2."""
    if not -TOL.trace_slack <= overlap <= 1.0 + TOL.trace_slack:
        raise ContractError(f"overlap {overlap!r} outside [0, 1]")
    if trials < 1:
        raise ContractError("trials must be positive")
    rng = np.random.default_rng(rng_seed)
    p_zero = 0.5 * (1.0 + min(max(overlap, 0.0), 1.0))
    zeros = int(rng.binomial(trials, p_zero))
    return SwapTestTally(trials=trials, zeros_observed=zeros)


def estimate_witness_mc(
    rho: FockDensity, sigma_ket: FockKet, trials: int, rng_seed: int
) -> float:
    """Monte-Carlo witness estimate combining two measurement primitives.

    Tr[rho sigma] comes from swap-test sampling. Tr[rho Delta(sigma)] is
    diagonal, so it comes from photon-count sampling of rho scored against
    the squared amplitudes of the source ket.
    """
    if rho.dim != sigma_ket.dim:
        raise DimensionMismatchError(
            f"state dim {rho.dim} != source dim {sigma_ket.dim}"
        )
    rng = np.random.default_rng(rng_seed)
    diag = np.clip(rho.matrix.diagonal().real, 0.0, None)
    diag = diag / diag.sum()
    scores = np.abs(sigma_ket.amplitudes) ** 2
    counts = rng.choice(rho.dim, size=trials, p=diag)
    dephased_est = float(scores[counts].mean())

    sigma = sigma_ket.to_density()
    overlap = expectation(rho, HermitianOp(rho.dim, sigma.matrix))
    tally = swap_test_sample(overlap, trials, int(rng.integers(2**63)))
    return dephased_est - tally.overlap_estimate


def chi_closed_form(
    n_code: int,
    l: int,
    noise: NoiseParams,
    m_cutoff: int = DEFAULT_M_CUTOFF,
) -> float:
    """Fock-witness expectation over the transmitted codeword superposition.

    chi(l) = -1/2 * dephase_factor(N) * sum over dark counts m of
    dark_prob(m) * sqrt(loss_prob(k, 2N) * loss_prob(k, N)) with k = N+m-l;
    terms with k < 0 vanish. The dark sum is truncated at m_cutoff, far
    past any mass worth counting.
    """
    if n_code < 1:
        raise ContractError(f"n_code must be >= 1, got {n_code}")
    if l < 0:
        raise ContractError(f"l must be nonnegative, got {l}")
    if m_cutoff < 1:
        raise ContractError("m_cutoff must be positive")
    total = 0.0
    for m in range(m_cutoff + 1):
        k = n_code + m - l
        if k < 0:
            continue
        term = loss_prob(k, 2 * n_code, noise.eta) * loss_prob(k, n_code, noise.eta)
        if term > 0.0:
            total += dark_prob(m, noise.lambda_dc) * math.sqrt(term)
    # the +0.0 turns -0.0 into plain 0.0 when every term vanished
    return -0.5 * dephase_factor(n_code, noise.gamma) * total + 0.0


def transmitted_plus_state(
    n_code: int, noise: NoiseParams, dim: int, k_cutoff: int = DARK_CUTOFF
) -> FockDensity:
    """Fiber output of the codeword superposition (|2N> + |N>)/sqrt(2);
    the ensemble Bob's Fock-side swap tests actually see."""
    if 2 * n_code >= dim:
        raise ContractError(f"dim {dim} too small for codewords of order {n_code}")
    rho = code_plus_ket(n_code, dim).to_density()
    return apply_fiber(rho, noise, k_cutoff)


def chi_via_pipeline(n_code: int, l: int, noise: NoiseParams, dim: int) -> float:
    """Independent evaluation of chi through the full Kraus/dephasing
    machinery; used as the oracle against the closed form."""
    theta = transmitted_plus_state(n_code, noise, dim)
    w = witness_from_pure(reference_fock(l, n_code, dim), f"fock-ref(l={l})")
    return witness_expectation_exact(theta, w)


def oracle_grid(
    n_max: int = 4,
    etas: tuple = (0.3, 0.5, 0.7, 0.9, 1.0),
    gammas: tuple = (0.0, 1e-4, 1e-2),
    lambdas: tuple = (0.0, 1e-3),
) -> dict:
    """Compare the two chi routes over the standard verification grid.

    Returns the worst absolute deviation, the grid point where it occurs
    and the number of points checked.
    """
    worst = 0.0
    worst_point = None
    points = 0
    for n_code in range(1, n_max + 1):
        dim = 4 * n_code + DARK_CUTOFF + 2
        for eta in etas:
            for gamma in gammas:
                for lam in lambdas:
                    noise = NoiseParams(eta=eta, gamma=gamma, lambda_dc=lam)
                    theta = transmitted_plus_state(n_code, noise, dim)
                    for l in range(3 * n_code + 1):
                        closed = chi_closed_form(n_code, l, noise)
                        w = witness_from_pure(
                            reference_fock(l, n_code, dim), f"fock-ref(l={l})"
                        )
                        piped = witness_expectation_exact(theta, w)
                        dev = abs(closed - piped)
                        points += 1
                        if dev > worst:
                            worst = dev
                            worst_point = {
                                "n_code": n_code,
                                "l": l,
                                "eta": eta,
                                "gamma": gamma,
                                "lambda_dc": lam,
                                "closed_form": closed,
                                "pipeline": piped,
                            }
    return {
        "max_abs_deviation": worst,
        "worst_point": worst_point,
        "points_checked": points,
        "tolerance": TOL.oracle_match,
        "passed": worst <= TOL.oracle_match,
    }
