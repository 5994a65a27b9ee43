"""Dense complex-matrix engine over a truncated photon-number (Fock) space.

States, Hermitian operators, Kraus channel application, the full-dephasing
map and the traces/expectations everything else is built from. All values
are immutable after construction and every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionMismatchError, NumericConsistencyError
from .numerics import TOL

# Truncation headroom: initial support ends at |2N>, dark counts add at most
# DARK_CUTOFF photons (Poisson(1e-3) tail beyond 8 is < 1e-20), plus margin.
DARK_CUTOFF = 8
LOSS_MARGIN = 2


def default_dim(n_code: int) -> int:
    """Truncation dimension with enough headroom for codewords plus dark counts."""
    return 2 * n_code + DARK_CUTOFF + LOSS_MARGIN


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockKet:
    """Pure state on the truncated Fock space."""

    dim: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ContractError(f"dim must be >= 1, got {self.dim}")
        amps = _frozen_array(np.asarray(self.amplitudes).reshape(-1))
        if amps.shape != (self.dim,):
            raise DimensionMismatchError(
                f"amplitude vector has length {amps.shape[0]}, expected {self.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "FockKet":
        n = np.sqrt(self.norm_sq)
        if n <= 0.0:
            raise NumericConsistencyError("cannot normalize the zero vector")
        return FockKet(self.dim, self.amplitudes / n)

    def to_density(self) -> "FockDensity":
        m = np.outer(self.amplitudes, self.amplitudes.conj())
        return FockDensity(self.dim, m)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FockKet)
            and self.dim == other.dim
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class FockDensity:
    """Density matrix on the truncated space; trace may dip below one when
    truncation leaks probability mass."""

    dim: int
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = _frozen_array(np.asarray(self.matrix))
        if m.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"matrix has shape {m.shape}, expected ({self.dim}, {self.dim})"
            )
        object.__setattr__(self, "matrix", m)
        if self.validate:
            herm = np.max(np.abs(m - m.conj().T))
            if herm > TOL.hermitian:
                raise NumericConsistencyError(f"not Hermitian: defect {herm:.3e}")
            tr = self.trace
            if not (1.0 - TOL.trace_deficit <= tr <= 1.0 + TOL.trace_slack):
                raise NumericConsistencyError(f"trace {tr!r} outside [1-tol, 1]")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def leaked_mass(self) -> float:
        """Probability lost to truncation (1 - trace)."""
        return 1.0 - self.trace

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FockDensity)
            and self.dim == other.dim
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class HermitianOp:
    """Hermitian observable on the truncated space."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen_array(np.asarray(self.matrix))
        if m.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"matrix has shape {m.shape}, expected ({self.dim}, {self.dim})"
            )
        herm = np.max(np.abs(m - m.conj().T))
        if herm > TOL.hermitian:
            raise NumericConsistencyError(f"not Hermitian: defect {herm:.3e}")
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, HermitianOp)
            and self.dim == other.dim
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class KrausSet:
    """Channel in Kraus form. Completeness is reported, not enforced: maps
    that add photons are necessarily leaky near the top of the truncation."""

    dim: int
    operators: tuple

    def __post_init__(self) -> None:
        ops = tuple(_frozen_array(np.asarray(k)) for k in self.operators)
        if not ops:
            raise ContractError("a KrausSet needs at least one operator")
        for k in ops:
            if k.shape != (self.dim, self.dim):
                raise DimensionMismatchError(
                    f"Kraus operator has shape {k.shape}, expected ({self.dim}, {self.dim})"
                )
        object.__setattr__(self, "operators", ops)

    def completeness_defect(self) -> float:
        """Max-norm distance of sum_k K^dag K from the identity."""
        s = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.operators:
            s += k.conj().T @ k
        return float(np.max(np.abs(s - np.eye(self.dim))))


def basis_ket(dim: int, n: int) -> FockKet:
    """|n> on a dim-dimensional truncated space."""
    if not 0 <= n < dim:
        raise ContractError(f"basis index {n} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return FockKet(dim, amps)


def apply_kraus(rho: FockDensity, channel: KrausSet) -> FockDensity:
    """sum_k K_k rho K_k^dag. Hermiticity is preserved; trace never grows."""
    if rho.dim != channel.dim:
        raise DimensionMismatchError(
            f"state dim {rho.dim} != channel dim {channel.dim}"
        )
    out = np.zeros_like(rho.matrix)
    for k in channel.operators:
        out += k @ rho.matrix @ k.conj().T
    # exact symmetrization removes the ~1e-17 float asymmetry of the sum
    out = 0.5 * (out + out.conj().T)
    return FockDensity(rho.dim, out)


def full_dephase(x):
    """Diagonal part of a density or Hermitian operator; idempotent."""
    diag = np.diag(np.diag(x.matrix))
    if isinstance(x, FockDensity):
        return FockDensity(x.dim, diag, validate=x.validate)
    if isinstance(x, HermitianOp):
        return HermitianOp(x.dim, diag)
    raise ContractError(f"cannot dephase a {type(x).__name__}")


def expectation(rho: FockDensity, op: HermitianOp) -> float:
    """Tr[rho op]; the imaginary residue must be negligible and is dropped."""
    if rho.dim != op.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != operator dim {op.dim}")
    tr = complex(np.einsum("ij,ji->", rho.matrix, op.matrix))
    if abs(tr.imag) > TOL.imag_residue:
        raise NumericConsistencyError(
            f"expectation has imaginary residue {tr.imag:.3e}"
        )
    return float(tr.real)


def fidelity_pure(ket: FockKet, rho: FockDensity) -> float:
    """<ket| rho |ket>, clipped into [0, 1]."""
    if ket.dim != rho.dim:
        raise DimensionMismatchError(f"ket dim {ket.dim} != state dim {rho.dim}")
    v = complex(np.vdot(ket.amplitudes, rho.matrix @ ket.amplitudes))
    if abs(v.imag) > TOL.imag_residue:
        raise NumericConsistencyError(f"fidelity has imaginary residue {v.imag:.3e}")
    if v.real < -TOL.psd or v.real > 1.0 + TOL.trace_slack:
        raise NumericConsistencyError(f"fidelity {v.real!r} outside [0, 1]")
    return float(min(max(v.real, 0.0), 1.0))
