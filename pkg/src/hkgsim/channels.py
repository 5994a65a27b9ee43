"""Fiber noise model: photon loss, dephasing and dark counts.

Each physical effect exists twice, on purpose: as a closed-form probability
helper and as a KrausSet acting on the truncated Fock space. The channel
composition applied to every transmitted pulse is loss, then dephasing,
then dark counts; loss and dephasing commute, so only the dark-count stage
actually fixes an ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractError
from .fockmath import DARK_CUTOFF, FockDensity, KrausSet, apply_kraus

DEFAULT_ALPHA_DB_PER_KM = 0.2
DEFAULT_LAMBDA_DC = 1e-3


def fiber_transmittance(distance_km: float, alpha_db_per_km: float) -> float:
    """Survival probability of a photon over distance_km of fiber."""
    if distance_km < 0 or alpha_db_per_km < 0:
        raise ContractError("distance and attenuation must be nonnegative")
    return 10.0 ** (-distance_km * alpha_db_per_km / 10.0)


@dataclass(frozen=True)
class NoiseParams:
    """One fiber scenario: transmittance, dephasing and dark-count mean."""

    eta: float
    gamma: float
    lambda_dc: float
    alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM
    distance_km: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ContractError(f"eta must lie in [0, 1], got {self.eta}")
        if self.gamma < 0 or self.lambda_dc < 0:
            raise ContractError("gamma and lambda_dc must be nonnegative")
        if self.distance_km is not None and self.distance_km < 0:
            raise ContractError("distance_km must be nonnegative")

    @classmethod
    def from_distance(
        cls,
        distance_km: float,
        gamma: float,
        lambda_dc: float,
        alpha_db_per_km: float = DEFAULT_ALPHA_DB_PER_KM,
    ) -> "NoiseParams":
        eta = fiber_transmittance(distance_km, alpha_db_per_km)
        return cls(eta, gamma, lambda_dc, alpha_db_per_km, distance_km)

    @property
    def is_noiseless(self) -> bool:
        return self.eta == 1.0 and self.gamma == 0.0 and self.lambda_dc == 0.0


NOISELESS = NoiseParams(eta=1.0, gamma=0.0, lambda_dc=0.0)


def loss_prob(k: int, M: int, eta: float) -> float:
    """Probability of losing exactly k of M independent photons."""
    if not 0.0 <= eta <= 1.0:
        raise ContractError(f"eta must lie in [0, 1], got {eta}")
    if k < 0 or M < 0:
        raise ContractError("photon numbers must be nonnegative")
    if k > M:
        return 0.0
    return math.comb(M, k) * (1.0 - eta) ** k * eta ** (M - k)


def dephase_factor(x: int, gamma: float) -> float:
    """Damping of a coherence between levels x apart; symmetric in x."""
    if gamma < 0:
        raise ContractError(f"gamma must be nonnegative, got {gamma}")
    return math.exp(-0.5 * gamma * x * x)


def dark_prob(k: int, lambda_dc: float) -> float:
    """Poisson mass of k spurious counts in the detection window."""
    if lambda_dc < 0:
        raise ContractError(f"lambda_dc must be nonnegative, got {lambda_dc}")
    if k < 0:
        raise ContractError("count must be nonnegative")
    if lambda_dc == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lambda_dc) - lambda_dc - math.lgamma(k + 1))


@lru_cache(maxsize=None)
def make_loss_channel(eta: float, dim: int) -> KrausSet:
    """Loss channel on the truncated space.

    Operator k maps |M> to sqrt(loss_prob(k, M, eta)) |M-k>. Because losing
    photons never leaves the truncation, the set is exactly complete.
    """
    if not 0.0 <= eta <= 1.0:
        raise ContractError(f"eta must lie in [0, 1], got {eta}")
    ops = []
    for k in range(dim):
        op = np.zeros((dim, dim), dtype=complex)
        for m in range(k, dim):
            op[m - k, m] = math.sqrt(loss_prob(k, m, eta))
        ops.append(op)
    return KrausSet(dim, tuple(ops))


@lru_cache(maxsize=None)
def make_dark_channel(lambda_dc: float, dim: int, k_cutoff: int = DARK_CUTOFF) -> KrausSet:
    """Dark-count channel on the truncated space.

    Operator k raises every level by k with amplitude sqrt(dark_prob(k)).
    The k index stops at k_cutoff (Poisson tails are astronomically small at
    realistic lambda) and levels pushed past the truncation are dropped, so
    the set is only complete on states supported below dim - k_cutoff.
    """
    if k_cutoff < 1:
        raise ContractError(f"k_cutoff must be positive, got {k_cutoff}")
    ops = []
    for k in range(min(k_cutoff, dim - 1) + 1):
        op = np.zeros((dim, dim), dtype=complex)
        amp = math.sqrt(dark_prob(k, lambda_dc))
        for m in range(dim - k):
            op[m + k, m] = amp
        ops.append(op)
    return KrausSet(dim, tuple(ops))


def apply_loss(rho: FockDensity, eta: float) -> FockDensity:
    return apply_kraus(rho, make_loss_channel(eta, rho.dim))


def apply_dephasing(rho: FockDensity, gamma: float) -> FockDensity:
    """Scale entry (r, t) by dephase_factor(r - t); diagonals are untouched."""
    if gamma < 0:
        raise ContractError(f"gamma must be nonnegative, got {gamma}")
    idx = np.arange(rho.dim)
    factors = np.exp(-0.5 * gamma * (idx[:, None] - idx[None, :]) ** 2)
    return FockDensity(rho.dim, rho.matrix * factors, validate=rho.validate)


def apply_dark(rho: FockDensity, lambda_dc: float, k_cutoff: int = DARK_CUTOFF) -> FockDensity:
    return apply_kraus(rho, make_dark_channel(lambda_dc, rho.dim, k_cutoff))


def apply_fiber(
    rho: FockDensity, p: NoiseParams, k_cutoff: int = DARK_CUTOFF
) -> FockDensity:
    """Loss, then dephasing, then dark counts."""
    out = apply_loss(rho, p.eta)
    out = apply_dephasing(out, p.gamma)
    return apply_dark(out, p.lambda_dc, k_cutoff)
