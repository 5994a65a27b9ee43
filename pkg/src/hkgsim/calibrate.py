"""Channel calibration: pick the reference level and the decision thresholds.

The reference level L is the brute-force minimizer of the closed-form cost
over a small integer range. The thresholds mu (error-rate acceptance) and
tau (witness acceptance) are fitted to honest-run statistics: mean plus
five standard deviations at segment granularity, clamped into the open
intervals the protocol mandates, (0, 1/4) and (-1/2, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import NoiseParams
from .errors import CalibrationInfeasibleError, ContractError
from .witness import chi_closed_form

# Margin keeping thresholds strictly inside their open intervals, and the
# sigma multiple applied to honest statistics. Both are artifact choices;
# nothing in the underlying scheme prescribes how thresholds are fitted.
THRESHOLD_EPS = 1e-3
SIGMA_FACTOR = 5.0
QBER_CAP = 0.25
DEFAULT_L_MARGIN = 8


@dataclass(frozen=True)
class CalibrationResult:
    """Brute-force cost curve with its argmin, plus fitted thresholds."""

    l_opt: int
    chi_opt: float
    chi_curve: tuple
    mu: float | None = None
    tau: float | None = None

    def __post_init__(self) -> None:
        values = [c for _, c in self.chi_curve]
        if not values:
            raise ContractError("chi_curve must not be empty")
        best = min(values)
        if self.chi_opt != best:
            raise ContractError("chi_opt must equal the curve minimum")
        if self.l_opt != min(l for l, c in self.chi_curve if c == best):
            raise ContractError("l_opt must be the smallest argmin")
        if self.mu is not None and not 0.0 < self.mu < QBER_CAP:
            raise ContractError(f"mu {self.mu!r} outside (0, 1/4)")
        if self.tau is not None and not -0.5 < self.tau < 0.0:
            raise ContractError(f"tau {self.tau!r} outside (-1/2, 0)")

    @property
    def thresholds_set(self) -> bool:
        return self.mu is not None and self.tau is not None


def optimal_l(
    n_code: int, noise: NoiseParams, l_max: int | None = None
) -> CalibrationResult:
    """Minimize the cost over l = 0..l_max; smallest argmin wins ties."""
    if l_max is None:
        l_max = 2 * n_code + DEFAULT_L_MARGIN
    if l_max < 2 * n_code:
        raise ContractError(
            f"l_max {l_max} must cover the noiseless optimum (>= {2 * n_code})"
        )
    curve = tuple((l, chi_closed_form(n_code, l, noise)) for l in range(l_max + 1))
    chi_opt = min(c for _, c in curve)
    l_opt = min(l for l, c in curve if c == chi_opt)
    return CalibrationResult(l_opt=l_opt, chi_opt=chi_opt, chi_curve=curve)


def _clamped_threshold(raw: float, low: float, high: float) -> float:
    return min(max(raw, low), high)


def calibrate_thresholds(
    n_code: int,
    noise: NoiseParams,
    protocol_cfg_draft,
    honest_trials: int,
    rng_seed: int,
) -> CalibrationResult:
    """Fit (mu, tau) from honest protocol rounds at the given noise.

    Runs the encode/transmit/decode phases of honest rounds and collects
    statistics at segment granularity (the finest the protocol ever
    checks): compared-subset error rates and per-segment witness means.
    Raised when honest behaviour already violates the protocol's own
    bounds: either encoding route with a mean error rate at or above 1/4,
    or a witness mean at or above 0.
    """
    from . import protocol  # runtime import: calibration drives protocol phases

    if honest_trials < 1:
        raise ContractError("honest_trials must be positive")
    base = optimal_l(n_code, noise)
    cfg = replace(
        protocol_cfg_draft,
        n_code=n_code,
        noise=noise,
        l_ref=base.l_opt,
        mu=QBER_CAP - THRESHOLD_EPS,
        tau=-THRESHOLD_EPS,
        dim=None,
    )
    segments = protocol.segment_slices(cfg.nu, cfg.omega)
    seg_qbers: list[float] = []
    fock_errs: list[int] = []
    tb_errs: list[int] = []
    w_segs: list[float] = []
    ss = np.random.SeedSequence((rng_seed & 0xFFFFFFFFFFFFFFFF, 0xCA11B))
    for child in ss.spawn(honest_trials):
        alice_rng, bob_rng, public_rng = (
            np.random.default_rng(c) for c in child.spawn(3)
        )
        f = protocol.SharedSecret.random(cfg.nu, cfg.omega, alice_rng)
        key_bits = tuple(int(b) for b in alice_rng.integers(0, 2, cfg.beta))
        pulses = protocol.alice_prepare(cfg, key_bits, f, alice_rng)
        received = protocol.transmit(pulses, cfg)
        processed = protocol.bob_process(received, f, cfg, bob_rng)
        bob_bits = tuple(r.decoded_bit for r in processed)
        auth = protocol.authenticate_bob(
            key_bits, bob_bits, cfg.kappa, cfg.mu, public_rng, segments
        )
        seg_qbers.extend(auth.qbers)
        xi_bits = tuple(r.xi for r in processed)
        for seg in segments:
            # segments whose selections came out empty carry no statistics
            sel1, sel2 = protocol.witness_selections(
                processed, xi_bits, f, range(seg.start, seg.stop)
            )
            if sel1 and sel2:
                w_segs.append(0.5 * (float(np.mean(sel1)) + float(np.mean(sel2))))
        for rec in processed:
            wrong = int(rec.decoded_bit != rec.key_bit)
            (fock_errs if rec.f_bit == 0 else tb_errs).append(wrong)

    q_mean = float(np.mean(seg_qbers))
    q_std = float(np.std(seg_qbers))
    w_mean = float(np.mean(w_segs))
    w_std = float(np.std(w_segs))

    for label, errs in (("photon-number", fock_errs), ("time-bin", tb_errs)):
        if errs and float(np.mean(errs)) >= QBER_CAP - THRESHOLD_EPS:
            raise CalibrationInfeasibleError(
                f"honest {label} error rate {np.mean(errs):.4f} leaves no room "
                f"under the 1/4 bound; noise too high for this code order"
            )
    if q_mean >= QBER_CAP - THRESHOLD_EPS:
        raise CalibrationInfeasibleError(
            f"honest compared error rate {q_mean:.4f} leaves no room under 1/4"
        )
    if w_mean >= -THRESHOLD_EPS:
        raise CalibrationInfeasibleError(
            f"honest witness mean {w_mean:.4f} is not negative; coherence lost"
        )

    mu = _clamped_threshold(
        min(QBER_CAP - THRESHOLD_EPS, q_mean + SIGMA_FACTOR * q_std),
        THRESHOLD_EPS,
        QBER_CAP - THRESHOLD_EPS,
    )
    tau = _clamped_threshold(
        min(-THRESHOLD_EPS, w_mean + SIGMA_FACTOR * w_std),
        -0.5 + THRESHOLD_EPS,
        -THRESHOLD_EPS,
    )
    return CalibrationResult(
        l_opt=base.l_opt,
        chi_opt=base.chi_opt,
        chi_curve=base.chi_curve,
        mu=mu,
        tau=tau,
    )
