"""Hybrid key-growing simulator.

Fock-space noise channels, bipartite (photon-number x time-bin) key
encoding, coherence-witness estimation, channel calibration and a
five-phase protocol state machine with pluggable adversaries.
"""

from .channels import NOISELESS, NoiseParams, fiber_transmittance
from .calibrate import CalibrationResult, calibrate_thresholds, optimal_l
from .encoding import expected_qber_fock, readout_decision
from .fockmath import FockDensity, FockKet, HermitianOp, KrausSet, basis_ket
from .protocol import ProtocolConfig, RoundResult, SharedSecret, run_round
from .witness import chi_closed_form, oracle_grid, transmitted_plus_state

__all__ = [
    "NOISELESS",
    "NoiseParams",
    "fiber_transmittance",
    "CalibrationResult",
    "calibrate_thresholds",
    "optimal_l",
    "expected_qber_fock",
    "readout_decision",
    "FockDensity",
    "FockKet",
    "HermitianOp",
    "KrausSet",
    "basis_ket",
    "ProtocolConfig",
    "RoundResult",
    "SharedSecret",
    "run_round",
    "chi_closed_form",
    "oracle_grid",
    "transmitted_plus_state",
]

__version__ = "0.1.0"
