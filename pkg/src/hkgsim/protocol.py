"""Five-phase key-growing round between Alice and Bob.

Phase 1 encodes a fresh key bitstring into pulses, each carrying a Fock
degree of freedom and a time-bin degree of freedom; the preshared secret F
decides which one holds the key bit, the other gets a sign superposition.
Phase 2 decodes and swap-tests. Phase 3 authenticates the receiver by a
public error-rate comparison and the sender by the witness average over
sign-0 pulses. Phase 4 is a pass-through distillation (matching raw bits
are the key; real reconciliation is out of scope). Phase 5 consumes a few
distilled bits to flip whole segments of F for the next round.

Every function is deterministic given its RNG streams; a round run twice
with the same inputs produces bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .channels import NOISELESS, NoiseParams, apply_fiber
from .encoding import (
    apply_timebin_noise,
    code_ket,
    code_superposition_ket,
    decision_table,
    timebin_state,
    timebin_superposition,
)
from .errors import (
    ContractError,
    DimensionMismatchError,
    InsufficientStatisticsError,
    UpdateInfeasibleError,
)
from .fockmath import FockDensity, default_dim
from .witness import SwapTestTally, reference_fock, reference_timebin

DEFAULT_NU = 16
DEFAULT_OMEGA = 4
DEFAULT_KAPPA = 0.25

PHASE_ENCODE = 1
PHASE_DECODE = 2
PHASE_CHECKS = 3
PHASE_DISTILL = 4
PHASE_UPDATE = 5


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything that determines one round, seeds included."""

    n_code: int
    l_ref: int
    mu: float
    tau: float
    nu: int = DEFAULT_NU
    omega: int = DEFAULT_OMEGA
    kappa: float = DEFAULT_KAPPA
    noise: NoiseParams = NOISELESS
    timebin_noise: tuple = (0.0, 0.0)
    rng_seed: int = 0
    exact_witness: bool = False
    swap_trials_per_pulse: int = 1
    dim: int | None = None

    def __post_init__(self) -> None:
        if self.n_code < 1:
            raise ContractError(f"n_code must be >= 1, got {self.n_code}")
        if self.nu <= self.omega:
            raise ContractError(f"nu ({self.nu}) must exceed omega ({self.omega})")
        if not 0.0 < self.kappa < 1.0:
            raise ContractError(f"kappa must lie in (0, 1), got {self.kappa}")
        if math.floor(self.kappa * self.nu) < 1:
            raise ContractError("kappa * nu must allow at least one compared bit")
        if not 0.0 < self.mu < 0.25:
            raise ContractError(f"mu must lie in (0, 1/4), got {self.mu}")
        if not -0.5 < self.tau < 0.0:
            raise ContractError(f"tau must lie in (-1/2, 0), got {self.tau}")
        if self.l_ref < 0:
            raise ContractError(f"l_ref must be nonnegative, got {self.l_ref}")
        if len(self.timebin_noise) != 2:
            raise ContractError("timebin_noise is a (gamma_tb, flip_prob) pair")
        if self.swap_trials_per_pulse < 1:
            raise ContractError("swap_trials_per_pulse must be positive")
        d = self.space_dim
        if 2 * self.n_code >= d or self.l_ref + self.n_code >= d:
            raise ContractError(
                f"dim {d} too small for codewords and reference at l={self.l_ref}"
            )

    @property
    def beta(self) -> int:
        return self.nu * self.omega

    @property
    def space_dim(self) -> int:
        return self.dim if self.dim is not None else default_dim(self.n_code)


@dataclass(frozen=True)
class SharedSecret:
    """Preshared bitstring F, read as omega segments of nu bits."""

    bits: tuple
    nu: int
    omega: int

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ContractError("F must be a bitstring")
        if len(bits) != self.nu * self.omega:
            raise ContractError(
                f"F has length {len(bits)}, expected nu*omega = {self.nu * self.omega}"
            )
        object.__setattr__(self, "bits", bits)

    @classmethod
    def random(cls, nu: int, omega: int, rng: np.random.Generator) -> "SharedSecret":
        return cls(tuple(int(b) for b in rng.integers(0, 2, nu * omega)), nu, omega)

    def segment(self, s: int) -> tuple:
        if not 0 <= s < self.omega:
            raise ContractError(f"segment index {s} out of range")
        return self.bits[s * self.nu : (s + 1) * self.nu]

    def flip_segments(self, control_bits) -> "SharedSecret":
        """Flip whole segments wherever the control bit is 1."""
        control = tuple(int(b) for b in control_bits)
        if len(control) != self.omega:
            raise ContractError(f"need {self.omega} control bits, got {len(control)}")
        out = list(self.bits)
        for s, c in enumerate(control):
            if c == 1:
                for i in range(s * self.nu, (s + 1) * self.nu):
                    out[i] ^= 1
        return SharedSecret(tuple(out), self.nu, self.omega)


def segment_slices(nu: int, omega: int) -> tuple:
    return tuple(slice(s * nu, (s + 1) * nu) for s in range(omega))


@dataclass(frozen=True)
class PulseRecord:
    """One pulse through its whole life: preparation, channel, decoding."""

    index: int
    f_bit: int
    key_bit: int
    xi: int
    fock_payload: FockDensity
    timebin_payload: FockDensity
    decoded_bit: int | None = None
    swap_tally: SwapTestTally | None = None
    witness_sample: float | None = None


@dataclass(frozen=True)
class Message:
    """One classical message of the transcript."""

    phase: int
    sender: str
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuthOutcome:
    accepted: bool
    compared_indices: tuple
    qbers: tuple


@dataclass(frozen=True)
class WitnessOutcome:
    accepted: bool
    w_hat: float
    w_hat_per_segment: tuple | None
    selection_sizes: tuple


@dataclass(frozen=True)
class DistillOutcome:
    key_indices: tuple
    key_bits: tuple
    mismatch_count: int


@dataclass(frozen=True)
class RoundResult:
    """Verdicts, keys and the full classical transcript of one round."""

    bob_accepted: bool
    alice_accepted: bool
    aborted_phase: int | None
    abort_reason: str | None
    raw_key_alice: tuple
    raw_key_bob: tuple
    per_segment_qber: tuple
    compared_qbers: tuple
    discarded_indices: tuple
    w_hat: float | None
    w_hat_per_segment: tuple | None
    f_next: "SharedSecret | None"
    final_key: tuple | None
    final_key_indices: tuple | None
    mismatch_count: int | None
    transcript: tuple

    @property
    def accepted(self) -> bool:
        return self.bob_accepted and self.alice_accepted

    def to_jsonable(self) -> dict:
        """Plain-types view of the result, ready for json.dumps."""
        return {
            "bob_accepted": self.bob_accepted,
            "alice_accepted": self.alice_accepted,
            "aborted_phase": self.aborted_phase,
            "abort_reason": self.abort_reason,
            "raw_key_alice": list(self.raw_key_alice),
            "raw_key_bob": list(self.raw_key_bob),
            "per_segment_qber": list(self.per_segment_qber),
            "compared_qbers": list(self.compared_qbers),
            "discarded_indices": list(self.discarded_indices),
            "w_hat": self.w_hat,
            "w_hat_per_segment": (
                None
                if self.w_hat_per_segment is None
                else list(self.w_hat_per_segment)
            ),
            "f_next": None if self.f_next is None else list(self.f_next.bits),
            "final_key": None if self.final_key is None else list(self.final_key),
            "final_key_indices": (
                None
                if self.final_key_indices is None
                else list(self.final_key_indices)
            ),
            "mismatch_count": self.mismatch_count,
            "transcript": [
                {
                    "phase": m.phase,
                    "sender": m.sender,
                    "kind": m.kind,
                    "payload": m.payload,
                }
                for m in self.transcript
            ],
        }


# ---------------------------------------------------------------------------
# cached pure-state payloads (shared across pulses and rounds)

@lru_cache(maxsize=None)
def fock_key_payload(n_code: int, bit: int, dim: int) -> FockDensity:
    return code_ket(n_code, bit, dim).to_density()


@lru_cache(maxsize=None)
def fock_superposition_payload(n_code: int, xi: int, dim: int) -> FockDensity:
    return code_superposition_ket(n_code, xi, dim).to_density()


@lru_cache(maxsize=None)
def timebin_key_payload(bit: int) -> FockDensity:
    return timebin_state(bit).to_density()


@lru_cache(maxsize=None)
def timebin_superposition_payload(xi: int) -> FockDensity:
    return timebin_superposition(xi).to_density()


# ---------------------------------------------------------------------------
# phase 1

def alice_prepare(
    cfg: ProtocolConfig,
    key_bits,
    f: SharedSecret,
    rng: np.random.Generator,
) -> list:
    """Encode each key bit in the degree of freedom selected by F; the other
    degree of freedom carries a sign superposition with a fresh random xi."""
    key_bits = tuple(int(b) for b in key_bits)
    if len(key_bits) != len(f.bits):
        raise ContractError(
            f"key length {len(key_bits)} != F length {len(f.bits)}"
        )
    dim = cfg.space_dim
    xis = rng.integers(0, 2, len(key_bits))
    pulses = []
    for i, (b, fb) in enumerate(zip(key_bits, f.bits)):
        xi = int(xis[i])
        if fb == 0:
            fock = fock_key_payload(cfg.n_code, b, dim)
            tb = timebin_superposition_payload(xi)
        else:
            fock = fock_superposition_payload(cfg.n_code, xi, dim)
            tb = timebin_key_payload(b)
        pulses.append(
            PulseRecord(
                index=i,
                f_bit=fb,
                key_bit=b,
                xi=xi,
                fock_payload=fock,
                timebin_payload=tb,
            )
        )
    return pulses


# ---------------------------------------------------------------------------
# channel (with optional interception)

def transmit(
    pulses,
    cfg: ProtocolConfig,
    adversary=None,
    plan=None,
    rng: np.random.Generator | None = None,
) -> list:
    """Push every pulse through the fiber and the time-bin noise channel.
    An intercepting adversary acts first, at the sender's side."""
    gamma_tb, flip = cfg.timebin_noise
    fiber_cache: dict = {}
    tb_cache: dict = {}
    out = []
    for rec in pulses:
        if adversary is not None:
            rec = adversary.intercept(plan, rec, cfg, rng)
        key = id(rec.fock_payload)
        fock = fiber_cache.get(key)
        if fock is None:
            fock = apply_fiber(rec.fock_payload, cfg.noise)
            fiber_cache[key] = fock
        key = id(rec.timebin_payload)
        tb = tb_cache.get(key)
        if tb is None:
            tb = apply_timebin_noise(rec.timebin_payload, gamma_tb, flip)
            tb_cache[key] = tb
        out.append(replace(rec, fock_payload=fock, timebin_payload=tb))
    return out


# ---------------------------------------------------------------------------
# phase 2

class _StateInfo:
    """Per-distinct-state measurement data, computed once per round."""

    __slots__ = ("cum", "diag", "overlap", "exact_w")

    def __init__(self, rho: FockDensity, ref_amplitudes: np.ndarray):
        diag = np.clip(rho.matrix.diagonal().real, 0.0, None)
        total = float(diag.sum())
        self.diag = diag
        self.cum = np.cumsum(diag / total)
        ref_scores = np.abs(ref_amplitudes) ** 2
        dephased = float(diag @ ref_scores)
        rv = rho.matrix @ ref_amplitudes
        self.overlap = float(np.vdot(ref_amplitudes, rv).real)
        self.exact_w = dephased - self.overlap


def bob_process(
    pulses,
    f: SharedSecret,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
) -> list:
    """Decode the keyed degree of freedom of every pulse and swap-test the
    other one against the matching reference state.

    The per-pulse witness sample combines one photon-count draw scored
    against the dephased reference (its diagonal) with the swap-test
    estimate of the plain overlap; with exact_witness set, the exact
    expectation is recorded instead and no ancilla is consumed.
    """
    if len(pulses) != len(f.bits):
        raise DimensionMismatchError("pulse count differs from F length")
    dim = cfg.space_dim
    table = np.asarray(
        decision_table(cfg.n_code, cfg.noise.eta, cfg.noise.lambda_dc, dim),
        dtype=np.int64,
    )
    psi = reference_fock(cfg.l_ref, cfg.n_code, dim)
    phi = reference_timebin()
    phi_amps = phi.amplitudes
    trials = cfg.swap_trials_per_pulse
    fock_info: dict = {}
    tb_info: dict = {}

    def info(cache, rho, ref):
        data = cache.get(id(rho))
        if data is None:
            data = _StateInfo(rho, ref)
            cache[id(rho)] = data
        return data

    out = []
    for rec, fb in zip(pulses, f.bits):
        fock = info(fock_info, rec.fock_payload, psi.amplitudes)
        tb = info(tb_info, rec.timebin_payload, phi_amps)
        if fb == 0:
            count = int(np.searchsorted(fock.cum, rng.random(), side="right"))
            decoded = int(table[count]) if count < table.size else 0
            witness_info = tb
            score = 0.5  # dephased time-bin reference is maximally mixed
        else:
            p_one = 1.0 - float(tb.cum[0])
            decoded = int(rng.random() < p_one)
            witness_info = fock
            count = int(np.searchsorted(fock.cum, rng.random(), side="right"))
            amp = psi.amplitudes[count] if count < dim else 0.0
            score = float(abs(amp) ** 2)
        if cfg.exact_witness:
            tally = None
            w = witness_info.exact_w
        else:
            p_zero = 0.5 * (1.0 + min(max(witness_info.overlap, 0.0), 1.0))
            zeros = int(rng.binomial(trials, p_zero))
            tally = SwapTestTally(trials=trials, zeros_observed=zeros)
            w = score - tally.overlap_estimate
        out.append(
            replace(rec, decoded_bit=decoded, swap_tally=tally, witness_sample=w)
        )
    return out


# ---------------------------------------------------------------------------
# phase 3

def authenticate_bob(
    alice_bits,
    bob_bits,
    kappa: float,
    mu: float,
    public_rng: np.random.Generator,
    segments=None,
) -> AuthOutcome:
    """Publicly compare a kappa-fraction of the raw key.

    First round: one uniformly drawn set over all indices. Later rounds
    (segments given): one set per segment, every one of which must show an
    error rate strictly below mu.
    """
    alice_bits = tuple(alice_bits)
    bob_bits = tuple(bob_bits)
    if len(alice_bits) != len(bob_bits):
        raise ContractError("raw keys differ in length")
    n = len(alice_bits)
    if segments is None:
        count = max(1, math.floor(kappa * n))
        index_sets = [np.sort(public_rng.choice(n, size=count, replace=False))]
    else:
        index_sets = []
        for seg in segments:
            seg_idx = np.arange(seg.start, seg.stop)
            count = max(1, math.floor(kappa * seg_idx.size))
            picked = public_rng.choice(seg_idx, size=count, replace=False)
            index_sets.append(np.sort(picked))
    qbers = []
    compared: list = []
    for idx in index_sets:
        errs = sum(1 for i in idx if alice_bits[i] != bob_bits[i])
        qbers.append(errs / idx.size)
        compared.extend(int(i) for i in idx)
    accepted = all(q < mu for q in qbers)
    return AuthOutcome(
        accepted=accepted, compared_indices=tuple(compared), qbers=tuple(qbers)
    )


def witness_selections(records, xi_bits, f: SharedSecret, indices) -> tuple:
    """Witness samples of sign-0 pulses among the given indices, split into
    selection 1 (time-bin tests of Fock-keyed pulses) and selection 2
    (Fock tests of time-bin-keyed pulses)."""
    sel1 = [
        records[i].witness_sample
        for i in indices
        if f.bits[i] == 0 and xi_bits[i] == 0
    ]
    sel2 = [
        records[i].witness_sample
        for i in indices
        if f.bits[i] == 1 and xi_bits[i] == 0
    ]
    return sel1, sel2


def check_eavesdropping(
    records,
    xi_bits,
    f: SharedSecret,
    tau: float,
    segments=None,
) -> WitnessOutcome:
    """Average the witness samples over sign-0 pulses of each selection.

    Selection 1 holds the time-bin tests of Fock-keyed pulses, selection 2
    the Fock tests of time-bin-keyed pulses; the verdict compares their
    mean (per segment in later rounds) against tau, strictly.
    """
    xi_bits = tuple(int(x) for x in xi_bits)
    if len(records) != len(xi_bits) or len(records) != len(f.bits):
        raise ContractError("records, xi disclosure and F must align")

    def w_hat_over(indices) -> tuple:
        sel1, sel2 = witness_selections(records, xi_bits, f, indices)
        if not sel1 or not sel2:
            raise InsufficientStatisticsError(
                "a witness selection has no sign-0 pulses"
            )
        return (
            0.5 * (float(np.mean(sel1)) + float(np.mean(sel2))),
            (len(sel1), len(sel2)),
        )

    all_idx = range(len(records))
    w_hat, sizes = w_hat_over(all_idx)
    if segments is None:
        return WitnessOutcome(
            accepted=w_hat < tau,
            w_hat=w_hat,
            w_hat_per_segment=None,
            selection_sizes=sizes,
        )
    per_segment = []
    for seg in segments:
        w_seg, _ = w_hat_over(range(seg.start, seg.stop))
        per_segment.append(w_seg)
    accepted = all(w < tau for w in per_segment)
    return WitnessOutcome(
        accepted=accepted,
        w_hat=w_hat,
        w_hat_per_segment=tuple(per_segment),
        selection_sizes=sizes,
    )


# ---------------------------------------------------------------------------
# phases 4 and 5

def distill(raw_alice, raw_bob, discarded_indices) -> DistillOutcome:
    """Pass-through distillation: keep positions where the raw keys agree,
    skipping publicly compared indices; report how many disagreed."""
    raw_alice = tuple(raw_alice)
    raw_bob = tuple(raw_bob)
    if len(raw_alice) != len(raw_bob):
        raise ContractError("raw keys differ in length")
    discarded = set(int(i) for i in discarded_indices)
    indices = []
    mismatches = 0
    for i, (a, b) in enumerate(zip(raw_alice, raw_bob)):
        if i in discarded:
            continue
        if a == b:
            indices.append(i)
        else:
            mismatches += 1
    bits = tuple(raw_alice[i] for i in indices)
    return DistillOutcome(
        key_indices=tuple(indices), key_bits=bits, mismatch_count=mismatches
    )


def update_f(f: SharedSecret, distilled_bits) -> SharedSecret:
    """Consume the first omega distilled bits as segment-flip controls."""
    distilled_bits = tuple(int(b) for b in distilled_bits)
    if len(distilled_bits) < f.omega:
        raise UpdateInfeasibleError(
            f"need {f.omega} distilled bits for the update, got {len(distilled_bits)}"
        )
    return f.flip_segments(distilled_bits[: f.omega])


def raw_segment_qbers(alice_bits, bob_bits, nu: int, omega: int) -> tuple:
    out = []
    for seg in segment_slices(nu, omega):
        a = alice_bits[seg]
        b = bob_bits[seg]
        out.append(sum(1 for x, y in zip(a, b) if x != y) / nu)
    return tuple(out)


# ---------------------------------------------------------------------------
# full round

def _abort(
    phase: int,
    reason: str,
    key_bits,
    bob_bits,
    cfg: ProtocolConfig,
    transcript,
    compared=(),
    compared_qbers=(),
    w_hat=None,
    w_hat_per_segment=None,
    bob_accepted=False,
) -> RoundResult:
    return RoundResult(
        bob_accepted=bob_accepted,
        alice_accepted=False,
        aborted_phase=phase,
        abort_reason=reason,
        raw_key_alice=tuple(key_bits),
        raw_key_bob=tuple(bob_bits),
        per_segment_qber=raw_segment_qbers(
            tuple(key_bits), tuple(bob_bits), cfg.nu, cfg.omega
        ),
        compared_qbers=tuple(compared_qbers),
        discarded_indices=tuple(compared),
        w_hat=w_hat,
        w_hat_per_segment=w_hat_per_segment,
        f_next=None,
        final_key=None,
        final_key_indices=None,
        mismatch_count=None,
        transcript=tuple(transcript),
    )


def run_round(
    cfg: ProtocolConfig,
    f: SharedSecret,
    round_index: int = 1,
    adversary=None,
) -> RoundResult:
    """Execute one round end to end, short-circuiting on any abort.

    round_index 1 uses the single global comparison; later rounds compare
    and witness-check per segment. The optional adversary either forges the
    sender, impersonates the receiver, or intercepts in the channel; it
    never sees honest private state beyond its declared knowledge.
    """
    if round_index < 1:
        raise ContractError("round_index counts from 1")
    if (f.nu, f.omega) != (cfg.nu, cfg.omega):
        raise ContractError("F segmentation does not match the configuration")
    ss = np.random.SeedSequence(
        (cfg.rng_seed & 0xFFFFFFFFFFFFFFFF, round_index)
    )
    alice_rng, bob_rng, adv_rng, public_rng = (
        np.random.default_rng(child) for child in ss.spawn(4)
    )
    segments = segment_slices(cfg.nu, cfg.omega) if round_index > 1 else None
    transcript: list = []

    plan = adversary.begin_round(cfg, adv_rng) if adversary is not None else None

    # phase 1
    if adversary is not None and adversary.forges_alice:
        key_bits, xi_bits, pulses = adversary.prepare_round(plan, cfg, adv_rng)
        sender = "attacker"
    else:
        key_bits = tuple(int(b) for b in alice_rng.integers(0, 2, cfg.beta))
        pulses = alice_prepare(cfg, key_bits, f, alice_rng)
        xi_bits = tuple(p.xi for p in pulses)
        sender = "alice"
    transcript.append(
        Message(PHASE_ENCODE, sender, "pulses_sent", {"count": len(pulses)})
    )

    # channel (+ interception)
    interceptor = (
        adversary if adversary is not None and adversary.intercepts else None
    )
    received = transmit(pulses, cfg, adversary=interceptor, plan=plan, rng=adv_rng)

    # phase 2
    impersonator = adversary is not None and adversary.impersonates_bob
    if impersonator:
        bob_bits = adversary.measure_as_bob(plan, received, cfg, adv_rng)
        processed = None
        receiver = "attacker"
    else:
        processed = bob_process(received, f, cfg, bob_rng)
        bob_bits = tuple(r.decoded_bit for r in processed)
        receiver = "bob"

    # phase 3: receiver authentication
    auth = authenticate_bob(key_bits, bob_bits, cfg.kappa, cfg.mu, public_rng, segments)
    transcript.append(
        Message(
            PHASE_CHECKS,
            sender,
            "compare_request",
            {"indices": list(auth.compared_indices)},
        )
    )
    transcript.append(
        Message(
            PHASE_CHECKS,
            receiver,
            "compare_bits",
            {"bits": [int(bob_bits[i]) for i in auth.compared_indices]},
        )
    )
    transcript.append(
        Message(
            PHASE_CHECKS,
            sender,
            "auth_verdict",
            {
                "accepted": auth.accepted,
                "qbers": list(auth.qbers),
                "mu": cfg.mu,
                "alice_bits": [int(key_bits[i]) for i in auth.compared_indices],
            },
        )
    )
    if not auth.accepted:
        return _abort(
            PHASE_CHECKS,
            "receiver authentication failed",
            key_bits,
            bob_bits,
            cfg,
            transcript,
            compared=auth.compared_indices,
            compared_qbers=auth.qbers,
        )

    # phase 3: sign disclosure and eavesdropping check
    transcript.append(
        Message(PHASE_CHECKS, sender, "xi_disclosure", {"xi": [int(x) for x in xi_bits]})
    )
    if impersonator:
        # the fake receiver simply claims the witness check passed
        w_hat = None
        w_hat_per_segment = None
        transcript.append(
            Message(
                PHASE_CHECKS,
                receiver,
                "witness_verdict",
                {"accepted": True, "forged": True, "tau": cfg.tau},
            )
        )
    else:
        try:
            wit = check_eavesdropping(processed, xi_bits, f, cfg.tau, segments)
        except InsufficientStatisticsError as exc:
            transcript.append(
                Message(
                    PHASE_CHECKS,
                    receiver,
                    "witness_verdict",
                    {"accepted": False, "error": str(exc), "tau": cfg.tau},
                )
            )
            return _abort(
                PHASE_CHECKS,
                f"insufficient statistics: {exc}",
                key_bits,
                bob_bits,
                cfg,
                transcript,
                compared=auth.compared_indices,
                compared_qbers=auth.qbers,
                bob_accepted=True,
            )
        w_hat = wit.w_hat
        w_hat_per_segment = wit.w_hat_per_segment
        transcript.append(
            Message(
                PHASE_CHECKS,
                receiver,
                "witness_verdict",
                {
                    "accepted": wit.accepted,
                    "w_hat": wit.w_hat,
                    "w_hat_per_segment": (
                        None
                        if wit.w_hat_per_segment is None
                        else list(wit.w_hat_per_segment)
                    ),
                    "tau": cfg.tau,
                },
            )
        )
        if not wit.accepted:
            return _abort(
                PHASE_CHECKS,
                "eavesdropping check failed",
                key_bits,
                bob_bits,
                cfg,
                transcript,
                compared=auth.compared_indices,
                compared_qbers=auth.qbers,
                w_hat=w_hat,
                w_hat_per_segment=w_hat_per_segment,
                bob_accepted=True,
            )

    # phase 4
    dist = distill(key_bits, bob_bits, auth.compared_indices)
    transcript.append(
        Message(
            PHASE_DISTILL,
            "both",
            "distilled",
            {"kept": len(dist.key_bits), "mismatches": dist.mismatch_count},
        )
    )

    # phase 5
    if len(dist.key_bits) < cfg.omega:
        return _abort(
            PHASE_UPDATE,
            "not enough distilled bits to refresh F",
            key_bits,
            bob_bits,
            cfg,
            transcript,
            compared=auth.compared_indices,
            compared_qbers=auth.qbers,
            w_hat=w_hat,
            w_hat_per_segment=w_hat_per_segment,
            bob_accepted=True,
        )
    f_next = update_f(f, dist.key_bits)
    control_indices = dist.key_indices[: cfg.omega]
    final_key = dist.key_bits[cfg.omega :]
    final_key_indices = dist.key_indices[cfg.omega :]
    transcript.append(
        Message(
            PHASE_UPDATE,
            "both",
            "f_update",
            {"control_indices": list(control_indices)},
        )
    )
    discarded = tuple(auth.compared_indices) + tuple(control_indices)
    return RoundResult(
        bob_accepted=True,
        alice_accepted=True,
        aborted_phase=None,
        abort_reason=None,
        raw_key_alice=tuple(key_bits),
        raw_key_bob=tuple(bob_bits),
        per_segment_qber=raw_segment_qbers(
            tuple(key_bits), tuple(bob_bits), cfg.nu, cfg.omega
        ),
        compared_qbers=auth.qbers,
        discarded_indices=discarded,
        w_hat=w_hat,
        w_hat_per_segment=w_hat_per_segment,
        f_next=f_next,
        final_key=final_key,
        final_key_indices=final_key_indices,
        mismatch_count=dist.mismatch_count,
        transcript=tuple(transcript),
    )
