"""Centralized numeric tolerances shared by the library and the test suite."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericTolerances:
    """Every tolerance used by validation code, in one place."""

    hermitian: float = 1e-12          # max elementwise |A - A^dag|
    unit_norm: float = 1e-12          # |  ||psi||^2 - 1 |
    trace_deficit: float = 1e-9       # trace may sit in [1 - deficit, 1 + slack]
    trace_slack: float = 1e-9
    psd: float = 1e-9                 # min eigenvalue >= -psd
    kraus_completeness: float = 1e-9  # ||sum K^dag K - I||_max for lossless sets
    imag_residue: float = 1e-10       # imaginary part allowed when taking real traces
    witness_linearity: float = 1e-12
    commutation: float = 1e-10        # loss/dephasing order swap
    oracle_match: float = 1e-9        # closed form vs Kraus pipeline
    exact_anchor: float = 1e-12       # values the math fixes exactly
    support: float = 1e-12            # amplitude below this counts as zero


TOL = NumericTolerances()
