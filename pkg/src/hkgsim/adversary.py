"""Attack strategies plugged into protocol rounds.

Three families. Channel interceptors (straight man-in-the-middle, and
intercept-resend with an induced time delay) measure pulses in flight and
forward re-encodings to the real receiver. The receiver impersonator knows
a stale copy of F, guesses its update and answers the comparison itself;
no honest receiver exists in such a round. Sender forgers fabricate the
whole pulse train. Strategies see nothing of the honest parties' state
beyond their declared knowledge.

Measurement model throughout: photon-number readings sample the Fock
diagonal, time-bin readings sample the computational basis, and
re-encoding prepares the pure state matching the observed outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .encoding import apply_timebin_noise, decision_table
from .errors import ContractError
from .fockmath import FockDensity, basis_ket
from .protocol import (
    ProtocolConfig,
    PulseRecord,
    SharedSecret,
    fock_key_payload,
    fock_superposition_payload,
    timebin_key_payload,
    timebin_superposition_payload,
)

BLIND_MITM = "blind_mitm"
MITM_WITH_F = "mitm_with_f"
ALICE_FORGE_BLIND_BITS = "alice_forge_blind_bits"
ALICE_FORGE_BLIND_SUPERPOSITIONS = "alice_forge_blind_superpositions"
ALICE_FORGE_WITH_STALE_F = "alice_forge_with_stale_f"
INTERCEPT_RESEND_DELAY = "intercept_resend_delay"

ALL_KINDS = (
    BLIND_MITM,
    MITM_WITH_F,
    ALICE_FORGE_BLIND_BITS,
    ALICE_FORGE_BLIND_SUPERPOSITIONS,
    ALICE_FORGE_WITH_STALE_F,
    INTERCEPT_RESEND_DELAY,
)
_NEEDS_F = (MITM_WITH_F, ALICE_FORGE_WITH_STALE_F)
_FORGERS = (
    ALICE_FORGE_BLIND_BITS,
    ALICE_FORGE_BLIND_SUPERPOSITIONS,
    ALICE_FORGE_WITH_STALE_F,
)

# Induced (gamma_tb, flip_prob) modelling the physical-layer delay of an
# intercept-resend attack; a modelling choice, the scheme itself only
# assumes the delay perturbs the time-bin degree of freedom.
DEFAULT_DELAY_PARAMS = (1.0, 0.25)


@dataclass(frozen=True)
class AttackPlan:
    """Per-round attacker state, drawn once at round start."""

    update_guess: tuple | None = None
    effective_f: SharedSecret | None = None


@dataclass(frozen=True)
class AttackStrategy:
    """Attack kind plus exactly the knowledge that kind is entitled to."""

    kind: str
    knowledge: SharedSecret | None = None
    delay_params: tuple | None = None

    def __post_init__(self) -> None:
        if self.kind not in ALL_KINDS:
            raise ContractError(f"unknown attack kind {self.kind!r}")
        if (self.knowledge is not None) != (self.kind in _NEEDS_F):
            raise ContractError(
                f"{self.kind} {'requires' if self.kind in _NEEDS_F else 'forbids'}"
                " stale-F knowledge"
            )
        if self.kind == INTERCEPT_RESEND_DELAY:
            if self.delay_params is None:
                object.__setattr__(self, "delay_params", DEFAULT_DELAY_PARAMS)
        elif self.delay_params is not None:
            raise ContractError(f"{self.kind} takes no delay parameters")

    @property
    def forges_alice(self) -> bool:
        return self.kind in _FORGERS

    @property
    def impersonates_bob(self) -> bool:
        return self.kind == MITM_WITH_F

    @property
    def intercepts(self) -> bool:
        return self.kind in (BLIND_MITM, INTERCEPT_RESEND_DELAY)

    def begin_round(self, cfg: ProtocolConfig, rng: np.random.Generator) -> AttackPlan:
        if self.knowledge is None:
            return AttackPlan()
        guess = tuple(int(b) for b in rng.integers(0, 2, cfg.omega))
        return AttackPlan(
            update_guess=guess, effective_f=self.knowledge.flip_segments(guess)
        )

    def intercept(
        self,
        plan: AttackPlan,
        pulse: PulseRecord,
        cfg: ProtocolConfig,
        rng: np.random.Generator,
    ) -> PulseRecord:
        if self.kind == BLIND_MITM:
            return blind_mitm_intercept(pulse, cfg, rng)
        if self.kind == INTERCEPT_RESEND_DELAY:
            return intercept_resend_delay(pulse, self.delay_params, cfg, rng)
        raise ContractError(f"{self.kind} is not an intercepting strategy")

    def prepare_round(
        self, plan: AttackPlan, cfg: ProtocolConfig, rng: np.random.Generator
    ):
        if not self.forges_alice:
            raise ContractError(f"{self.kind} does not forge the sender")
        return forge_alice(self.kind, cfg, plan.effective_f, rng)

    def measure_as_bob(
        self,
        plan: AttackPlan,
        pulses,
        cfg: ProtocolConfig,
        rng: np.random.Generator,
    ) -> tuple:
        if not self.impersonates_bob:
            raise ContractError(f"{self.kind} does not impersonate the receiver")
        return tuple(
            mitm_with_stale_f(pulse, fb, cfg, rng)
            for pulse, fb in zip(pulses, plan.effective_f.bits)
        )


def simulate_leaked_f(f: SharedSecret, rng: np.random.Generator) -> SharedSecret:
    """Suite plumbing, not attacker capability: fabricate the stale F an
    eavesdropper would hold, i.e. the current F with one unknown update
    (uniform segment flips) undone."""
    actual_update = tuple(int(b) for b in rng.integers(0, 2, f.omega))
    return f.flip_segments(actual_update)


# ---------------------------------------------------------------------------
# measurement / re-encoding primitives

def measure_fock_count(rho: FockDensity, rng: np.random.Generator) -> int:
    """Sample a photon count from the diagonal of the state."""
    diag = np.clip(rho.matrix.diagonal().real, 0.0, None)
    cum = np.cumsum(diag / diag.sum())
    return int(np.searchsorted(cum, rng.random(), side="right"))


def measure_timebin_bit(rho: FockDensity, rng: np.random.Generator) -> int:
    """Computational-basis reading of a time-bin state."""
    p_one = float(np.clip(rho.matrix[1, 1].real, 0.0, 1.0))
    total = float(np.clip(rho.matrix.diagonal().real.sum(), 1e-300, None))
    return int(rng.random() < p_one / total)


@lru_cache(maxsize=None)
def _number_state_payload(m: int, dim: int) -> FockDensity:
    return basis_ket(dim, min(m, dim - 1)).to_density()


@lru_cache(maxsize=None)
def _delayed_timebin_payload(bit: int, gamma_tb: float, flip: float) -> FockDensity:
    return apply_timebin_noise(timebin_key_payload(bit), gamma_tb, flip)


def _readout_bit(count: int, cfg: ProtocolConfig) -> int:
    table = decision_table(
        cfg.n_code, cfg.noise.eta, cfg.noise.lambda_dc, cfg.space_dim
    )
    return table[count] if count < len(table) else 0


# ---------------------------------------------------------------------------
# attack operations

def blind_mitm_intercept(
    pulse: PulseRecord, cfg: ProtocolConfig, rng: np.random.Generator
) -> PulseRecord:
    """Guess which degree of freedom carries the key, measure it, and
    forward a fresh protocol-format pulse consistent with the guess."""
    dim = cfg.space_dim
    guess = int(rng.integers(0, 2))
    xi_hat = int(rng.integers(0, 2))
    if guess == 0:
        count = measure_fock_count(pulse.fock_payload, rng)
        bit = _readout_bit(count, cfg)
        fock = fock_key_payload(cfg.n_code, bit, dim)
        tb = timebin_superposition_payload(xi_hat)
    else:
        bit = measure_timebin_bit(pulse.timebin_payload, rng)
        fock = fock_superposition_payload(cfg.n_code, xi_hat, dim)
        tb = timebin_key_payload(bit)
    return replace(pulse, fock_payload=fock, timebin_payload=tb)


def mitm_with_stale_f(
    pulse: PulseRecord,
    effective_f_bit: int,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> int:
    """Read the degree of freedom the attacker's updated-F guess points at;
    the resulting bit is what the fake receiver answers comparisons with."""
    if effective_f_bit == 0:
        count = measure_fock_count(pulse.fock_payload, rng)
        return _readout_bit(count, cfg)
    return measure_timebin_bit(pulse.timebin_payload, rng)


def forge_alice(
    strategy_kind: str,
    cfg: ProtocolConfig,
    effective_f: SharedSecret | None,
    rng: np.random.Generator,
):
    """Fabricate a full pulse train in the sender's role.

    The bit-committing forger guesses per pulse where the key belongs,
    encodes a definite bit there and a sign superposition in the other
    slot. The superposition forger puts the same sign superposition in
    both slots (its claimed bits are never physically encoded). The
    stale-F forger encodes in honest format against its guessed update.
    Returns (claimed key bits, claimed xi bits, pulses).
    """
    if strategy_kind not in _FORGERS:
        raise ContractError(f"{strategy_kind} is not a sender forgery")
    if strategy_kind == ALICE_FORGE_WITH_STALE_F and effective_f is None:
        raise ContractError("stale-F forgery needs an updated-F guess")
    dim = cfg.space_dim
    n = cfg.beta
    key_bits = tuple(int(b) for b in rng.integers(0, 2, n))
    xi_bits = tuple(int(x) for x in rng.integers(0, 2, n))
    pulses = []
    for i in range(n):
        b, xi = key_bits[i], xi_bits[i]
        if strategy_kind == ALICE_FORGE_BLIND_BITS:
            slot = int(rng.integers(0, 2))
        elif strategy_kind == ALICE_FORGE_WITH_STALE_F:
            slot = effective_f.bits[i]
        else:
            slot = None  # both slots get superpositions
        if slot == 0:
            fock = fock_key_payload(cfg.n_code, b, dim)
            tb = timebin_superposition_payload(xi)
        elif slot == 1:
            fock = fock_superposition_payload(cfg.n_code, xi, dim)
            tb = timebin_key_payload(b)
        else:
            fock = fock_superposition_payload(cfg.n_code, xi, dim)
            tb = timebin_superposition_payload(xi)
        pulses.append(
            PulseRecord(
                index=i,
                f_bit=slot if slot is not None else int(rng.integers(0, 2)),
                key_bit=b,
                xi=xi,
                fock_payload=fock,
                timebin_payload=tb,
            )
        )
    return key_bits, xi_bits, pulses


def intercept_resend_delay(
    pulse: PulseRecord,
    delay_params,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> PulseRecord:
    """Measure both degrees of freedom, resend the observed outcomes, and
    pay the physical price: the resent pulse arrives late, which shows up
    as extra dephasing and flip noise on its time-bin state."""
    gamma_tb, flip = delay_params
    count = measure_fock_count(pulse.fock_payload, rng)
    bit = measure_timebin_bit(pulse.timebin_payload, rng)
    fock = _number_state_payload(count, cfg.space_dim)
    tb = _delayed_timebin_payload(bit, float(gamma_tb), float(flip))
    return replace(pulse, fock_payload=fock, timebin_payload=tb)
