import math

import numpy as np
import pytest

from hkgsim.channels import (
    NOISELESS,
    NoiseParams,
    apply_dark,
    apply_dephasing,
    apply_fiber,
    apply_loss,
    dark_prob,
    dephase_factor,
    fiber_transmittance,
    loss_prob,
    make_dark_channel,
    make_loss_channel,
)
from hkgsim.encoding import code_plus_ket
from hkgsim.errors import ContractError
from hkgsim.fockmath import FockDensity, basis_ket

from conftest import random_density


class TestClosedFormHelpers:
    def test_loss_prob_lossless(self):
        assert loss_prob(0, 3, 1.0) == 1.0

    def test_loss_prob_more_than_sent(self):
        assert loss_prob(4, 2, 0.5) == 0.0

    def test_loss_prob_half(self):
        assert abs(loss_prob(1, 2, 0.5) - 0.5) <= 1e-15

    def test_loss_prob_eta_out_of_range(self):
        with pytest.raises(ContractError):
            loss_prob(0, 1, 1.5)

    def test_dephase_factor_diagonal(self):
        assert dephase_factor(0, 3.7) == 1.0

    def test_dephase_factor_no_dephasing(self):
        assert dephase_factor(5, 0.0) == 1.0

    def test_dephase_factor_value(self):
        assert abs(dephase_factor(2, 0.5) - math.exp(-1.0)) <= 1e-15

    def test_dephase_factor_symmetric(self):
        assert dephase_factor(-3, 0.2) == dephase_factor(3, 0.2)

    def test_dark_prob_no_darks(self):
        assert dark_prob(0, 0.0) == 1.0
        assert dark_prob(1, 0.0) == 0.0

    def test_dark_prob_value(self):
        assert abs(dark_prob(0, 1e-3) - math.exp(-1e-3)) <= 1e-15

    def test_dark_prob_matches_poisson_mass(self):
        lam = 0.37
        for k in range(6):
            expect = lam**k * math.exp(-lam) / math.factorial(k)
            assert abs(dark_prob(k, lam) - expect) <= 1e-14


class TestFiberTransmittance:
    def test_zero_distance(self):
        assert fiber_transmittance(0.0, 0.2) == 1.0

    def test_eight_km(self):
        assert abs(fiber_transmittance(8.0, 0.2) - 0.6918309709189364) <= 1e-12

    def test_fifty_km(self):
        assert abs(fiber_transmittance(50.0, 0.2) - 0.1) <= 1e-15

    def test_from_distance_consistency(self):
        p = NoiseParams.from_distance(8.0, gamma=1e-4, lambda_dc=1e-3)
        assert abs(p.eta - fiber_transmittance(8.0, 0.2)) <= 1e-12
        assert p.distance_km == 8.0

    def test_noise_params_validation(self):
        with pytest.raises(ContractError):
            NoiseParams(eta=1.2, gamma=0.0, lambda_dc=0.0)
        with pytest.raises(ContractError):
            NoiseParams(eta=0.5, gamma=-1.0, lambda_dc=0.0)


class TestLossChannel:
    def test_lossless_only_identity(self):
        ch = make_loss_channel(1.0, 6)
        assert np.allclose(ch.operators[0], np.eye(6), atol=1e-15)
        for op in ch.operators[1:]:
            assert np.count_nonzero(op) == 0

    def test_binomial_diagonal(self):
        rho = apply_loss(basis_ket(5, 2).to_density(), 0.7)
        assert np.allclose(
            np.diag(rho.matrix).real[:3], [0.09, 0.42, 0.49], atol=1e-15
        )

    def test_completeness(self):
        assert make_loss_channel(0.5, 20).completeness_defect() <= 1e-9

    def test_coherence_keeps_number_difference(self):
        # raw Kraus bookkeeping on the matrix unit |4><2|
        ch = make_loss_channel(0.6, 8)
        unit = np.zeros((8, 8), dtype=complex)
        unit[4, 2] = 1.0
        out = sum(k @ unit @ k.conj().T for k in ch.operators)
        for r in range(8):
            for c in range(8):
                if abs(out[r, c]) > 1e-15:
                    assert r - c == 2

    def test_loss_term_amplitude(self):
        # |4><2| -> sqrt(p(k,4) p(k,2)) |4-k><2-k|
        ch = make_loss_channel(0.6, 8)
        unit = np.zeros((8, 8), dtype=complex)
        unit[4, 2] = 1.0
        out = sum(k @ unit @ k.conj().T for k in ch.operators)
        for k in range(3):
            expect = math.sqrt(loss_prob(k, 4, 0.6) * loss_prob(k, 2, 0.6))
            assert abs(out[4 - k, 2 - k] - expect) <= 1e-14


class TestDarkChannel:
    def test_no_darks_is_identity(self, rng):
        rho = random_density(6, rng)
        out = apply_dark(rho, 0.0)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_poisson_diagonal_from_vacuum(self):
        rho = apply_dark(basis_ket(12, 0).to_density(), 1e-3)
        diag = np.diag(rho.matrix).real
        for k in range(9):
            assert abs(diag[k] - dark_prob(k, 1e-3)) <= 1e-15

    def test_truncation_leak_bound(self):
        # geometric tail bound: sum_{k>8} p(k) <= p(9) / (1 - lambda/10)
        lam = 1e-3
        tail = dark_prob(9, lam) / (1.0 - lam / 10.0)
        assert tail <= 1e-20
        rho = apply_dark(basis_ket(12, 0).to_density(), lam)
        assert rho.leaked_mass <= 1e-15

    def test_shift_keeps_number_difference(self):
        ch = make_dark_channel(1e-2, 10)
        unit = np.zeros((10, 10), dtype=complex)
        unit[3, 1] = 1.0
        out = sum(k @ unit @ k.conj().T for k in ch.operators)
        for r in range(10):
            for c in range(10):
                if abs(out[r, c]) > 1e-18:
                    assert r - c == 2


class TestDephasing:
    def test_gamma_zero_identity(self, rng):
        rho = random_density(5, rng)
        assert np.array_equal(apply_dephasing(rho, 0.0).matrix, rho.matrix)

    def test_neighbour_coherence_scaling(self):
        rho = code_plus_ket(1, 4).to_density()  # coherence between |1> and |2>
        out = apply_dephasing(rho, 0.8)
        assert abs(out.matrix[2, 1] - 0.5 * math.exp(-0.4)) <= 1e-15

    def test_codeword_coherence_scaled_by_code_order(self):
        n = 3
        rho = code_plus_ket(n, 8).to_density()
        out = apply_dephasing(rho, 0.2)
        expect = 0.5 * dephase_factor(n, 0.2)
        assert abs(out.matrix[2 * n, n] - expect) <= 1e-15

    def test_diagonal_bitwise_unchanged(self, rng):
        for _ in range(5):
            rho = random_density(6, rng)
            out = apply_dephasing(rho, rng.uniform(0, 2))
            assert np.array_equal(np.diag(out.matrix), np.diag(rho.matrix))


class TestApplyFiber:
    def test_noiseless_identity(self, rng):
        rho = random_density(6, rng)
        out = apply_fiber(rho, NOISELESS)
        assert np.allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_loss_dephasing_commute(self, rng):
        # order swap of the two channels gives identical output
        for _ in range(100):
            rho = random_density(7, rng)
            eta = rng.uniform(0.0, 1.0)
            gamma = rng.uniform(0.0, 2.0)
            a = apply_dephasing(apply_loss(rho, eta), gamma)
            b = apply_loss(apply_dephasing(rho, gamma), eta)
            assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-10

    def test_trace_bound(self, rng):
        for _ in range(10):
            rho = random_density(6, rng, rank=2)
            # enough headroom above support: embed in dim 16
            big = np.zeros((16, 16), dtype=complex)
            big[:6, :6] = rho.matrix
            out = apply_fiber(
                FockDensity(16, big), NoiseParams(0.7, 1e-3, 1e-3)
            )
            assert out.trace >= 1.0 - 1e-12

    def test_offdiagonal_band_value(self):
        # half-loss on the order-1 codeword superposition:
        # <1|theta|0> = 0.5 * sqrt(p(1,2) p(1,1)) = 0.25, and
        # <2|theta|1> = 0.5 * sqrt(p(0,2) p(0,1)) (the k=0 term survives)
        theta = apply_fiber(code_plus_ket(1, 12).to_density(), NoiseParams(0.5, 0.0, 0.0))
        assert abs(theta.matrix[1, 0].real - 0.25) <= 1e-14
        expect_top = 0.5 * math.sqrt(loss_prob(0, 2, 0.5) * loss_prob(0, 1, 0.5))
        assert abs(theta.matrix[2, 1].real - expect_top) <= 1e-14
