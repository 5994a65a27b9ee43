import math

import numpy as np
import pytest

from hkgsim.errors import (
    ContractError,
    DimensionMismatchError,
    NumericConsistencyError,
)
from hkgsim.channels import make_loss_channel
from hkgsim.fockmath import (
    FockDensity,
    FockKet,
    HermitianOp,
    KrausSet,
    apply_kraus,
    basis_ket,
    default_dim,
    expectation,
    fidelity_pure,
    full_dephase,
)

from conftest import random_complete_kraus, random_density, random_ket


def plus_ket(dim=2):
    return FockKet(dim, np.array([1.0, 1.0] + [0.0] * (dim - 2)) / math.sqrt(2))


class TestFockKet:
    def test_basis_ket_lowest(self):
        assert np.array_equal(basis_ket(3, 0).amplitudes, [1, 0, 0])

    def test_basis_ket_highest(self):
        assert np.array_equal(basis_ket(3, 2).amplitudes, [0, 0, 1])

    def test_basis_ket_out_of_range(self):
        with pytest.raises(ContractError):
            basis_ket(2, 2)

    def test_normalize(self, rng):
        ket = FockKet(4, rng.normal(size=4) + 1j * rng.normal(size=4))
        assert abs(ket.normalize().norm_sq - 1.0) <= 1e-12

    def test_normalize_zero_vector(self):
        with pytest.raises(NumericConsistencyError):
            FockKet(3, np.zeros(3)).normalize()

    def test_amplitudes_immutable(self):
        ket = basis_ket(3, 1)
        with pytest.raises(ValueError):
            ket.amplitudes[0] = 1.0

    def test_dim_must_be_positive(self):
        with pytest.raises(ContractError):
            FockKet(0, np.array([]))


class TestFockDensity:
    def test_rejects_non_hermitian(self):
        m = np.array([[1.0, 0.5], [0.0, 0.0]], dtype=complex)
        with pytest.raises(NumericConsistencyError):
            FockDensity(2, m)

    def test_rejects_bad_trace(self):
        with pytest.raises(NumericConsistencyError):
            FockDensity(2, 0.3 * np.eye(2, dtype=complex))

    def test_leaked_mass(self):
        rho = FockDensity(2, np.diag([0.7, 0.3 - 1e-10]).astype(complex))
        assert 0.0 < rho.leaked_mass < 1e-9

    def test_random_density_is_valid(self, rng):
        rho = random_density(5, rng)
        assert rho.min_eigenvalue() >= -1e-9
        assert abs(rho.trace - 1.0) <= 1e-12


class TestApplyKraus:
    def test_identity_channel(self, rng):
        rho = random_density(4, rng)
        ident = KrausSet(4, (np.eye(4, dtype=complex),))
        out = apply_kraus(rho, ident)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_lossless_channel_fixes_number_state(self):
        rho = basis_ket(5, 2).to_density()
        out = apply_kraus(rho, make_loss_channel(1.0, 5))
        assert np.allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_half_loss_on_single_photon(self):
        # losing the photon or not, each with probability 1/2
        rho = basis_ket(4, 1).to_density()
        out = apply_kraus(rho, make_loss_channel(0.5, 4))
        assert np.allclose(np.diag(out.matrix).real, [0.5, 0.5, 0, 0], atol=1e-15)
        assert np.allclose(out.matrix, np.diag(np.diag(out.matrix)), atol=1e-15)

    def test_dimension_mismatch(self, rng):
        rho = random_density(3, rng)
        with pytest.raises(DimensionMismatchError):
            apply_kraus(rho, make_loss_channel(0.5, 4))

    def test_complete_set_preserves_trace(self, rng):
        for _ in range(20):
            channel = random_complete_kraus(5, 3, rng)
            assert channel.completeness_defect() <= 1e-12
            rho = random_density(5, rng)
            out = apply_kraus(rho, channel)
            assert abs(out.trace - rho.trace) <= 1e-12

    def test_preserves_positivity(self, rng):
        for _ in range(20):
            channel = random_complete_kraus(6, 4, rng)
            out = apply_kraus(random_density(6, rng), channel)
            assert out.min_eigenvalue() >= -1e-9

    def test_preserves_hermiticity(self, rng):
        out = apply_kraus(random_density(5, rng), random_complete_kraus(5, 2, rng))
        assert np.max(np.abs(out.matrix - out.matrix.conj().T)) == 0.0


class TestFullDephase:
    def test_diagonal_fixed_point(self):
        rho = FockDensity(3, np.diag([0.2, 0.3, 0.5]).astype(complex))
        assert np.array_equal(full_dephase(rho).matrix, rho.matrix)

    def test_removes_coherence(self):
        rho = plus_ket().to_density()
        out = full_dephase(rho)
        assert np.allclose(out.matrix, 0.5 * np.eye(2), atol=1e-15)

    def test_idempotent_and_trace_preserving(self, rng):
        for _ in range(10):
            rho = random_density(5, rng)
            once = full_dephase(rho)
            assert np.array_equal(full_dephase(once).matrix, once.matrix)
            assert once.trace == rho.trace

    def test_acts_on_hermitian_ops(self, rng):
        ket = random_ket(4, rng)
        op = HermitianOp(4, np.outer(ket.amplitudes, ket.amplitudes.conj()))
        out = full_dephase(op)
        assert isinstance(out, HermitianOp)
        assert np.count_nonzero(out.matrix - np.diag(np.diag(out.matrix))) == 0


class TestExpectation:
    def test_identity_gives_trace(self, rng):
        rho = random_density(4, rng)
        ident = HermitianOp(4, np.eye(4, dtype=complex))
        assert abs(expectation(rho, ident) - rho.trace) <= 1e-12

    def test_projector_on_own_state(self):
        rho = basis_ket(3, 0).to_density()
        proj = HermitianOp(3, rho.matrix)
        assert abs(expectation(rho, proj) - 1.0) <= 1e-12

    def test_plus_state_witness_value(self):
        # dephased-minus-plain projector of |+> scored on |+> itself
        sigma = plus_ket().to_density()
        w = HermitianOp(2, full_dephase(sigma).matrix - sigma.matrix)
        assert abs(expectation(sigma, w) - (-0.5)) <= 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            expectation(random_density(3, rng), HermitianOp(4, np.eye(4)))

    def test_witness_linearity(self, rng):
        # <W_sigma> = <Delta(sigma)> - <sigma> for arbitrary rho, sigma
        for _ in range(10):
            rho = random_density(5, rng)
            sigma_m = random_density(5, rng).matrix
            sigma = HermitianOp(5, sigma_m)
            w = HermitianOp(5, full_dephase(sigma).matrix - sigma_m)
            lhs = expectation(rho, w)
            rhs = expectation(rho, full_dephase(sigma)) - expectation(rho, sigma)
            assert abs(lhs - rhs) <= 1e-12


class TestFidelityPure:
    def test_own_state(self):
        assert fidelity_pure(basis_ket(3, 1), basis_ket(3, 1).to_density()) == 1.0

    def test_orthogonal(self):
        assert fidelity_pure(basis_ket(3, 0), basis_ket(3, 1).to_density()) == 0.0

    def test_plus_against_maximally_mixed(self):
        mixed = FockDensity(2, 0.5 * np.eye(2, dtype=complex))
        assert abs(fidelity_pure(plus_ket(), mixed) - 0.5) <= 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            fidelity_pure(basis_ket(3, 0), random_density(4, rng))


def test_default_dim_headroom():
    # codewords end at |2N|; eight dark levels plus margin must fit
    for n in (1, 4, 9):
        assert default_dim(n) == 2 * n + 10
