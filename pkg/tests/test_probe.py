"""Particle lattices, couplings, packets, and the assembled Hamiltonian."""

import math
import warnings

import numpy as np
import pytest

from schwdec.probe import (
    APPARATUS,
    ENVIRONMENT,
    Boundary,
    CouplingParams,
    ParticleParams,
    build_full_hamiltonian,
    build_h_ae,
    build_h_sa,
    gaussian_interaction,
    gaussian_packet,
    kinetic_matrix,
    kinetic_op,
    momentum_matrix,
    momentum_op,
    tripartite_space,
    uniform_state,
)
from schwdec.schwinger import (
    MeasuredRegion,
    SchwingerParams,
    build_schwinger,
    ground_state,
    measured_operator,
)
from schwdec.tensor import StateVector, hermiticity_defect, kron_states


def periodic_params(n=12, **kw):
    return ParticleParams(n_points=n, boundary=Boundary.PERIODIC, **kw)


class TestMomentum:
    def test_plane_wave_eigenvalue(self):
        params = periodic_params(16)
        k = 2.0 * math.pi / 16.0
        wave = np.exp(1j * k * np.arange(16))
        p = momentum_matrix(params)
        np.testing.assert_allclose(p @ wave, (math.sin(k) / 1.0) * wave, atol=1e-12)

    def test_constant_vector_killed(self):
        params = periodic_params(10)
        p = momentum_matrix(params)
        assert np.max(np.abs(p @ np.ones(10))) < 1e-14

    def test_hermitian(self):
        for boundary in Boundary:
            params = ParticleParams(n_points=9, boundary=boundary)
            op = momentum_op(params, APPARATUS)
            assert hermiticity_defect(op) < 1e-12

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            momentum_matrix(ParticleParams(n_points=2))


class TestKinetic:
    def test_plane_wave_eigenvalue(self):
        params = periodic_params(16, mass_apparatus=2.5)
        k = 2.0 * math.pi * 3 / 16.0
        wave = np.exp(1j * k * np.arange(16))
        kin = kinetic_matrix(params, 2.5)
        np.testing.assert_allclose(kin @ wave, ((1 - math.cos(k)) / 2.5) * wave, atol=1e-12)

    def test_constant_is_ground_state(self):
        params = periodic_params(12)
        kin = kinetic_matrix(params, 1.0)
        assert np.max(np.abs(kin @ np.ones(12))) < 1e-14

    def test_hard_wall_ground_profile(self):
        n, m = 14, 3.0
        params = ParticleParams(n_points=n, boundary=Boundary.HARD_WALL)
        kin = kinetic_matrix(params, m)
        vals, vecs = np.linalg.eigh(kin)
        ref = np.sin(math.pi * (np.arange(n) + 1) / (n + 1))
        ref /= np.linalg.norm(ref)
        overlap = abs(np.vdot(ref, vecs[:, 0]))
        assert abs(overlap - 1.0) < 1e-10
        assert abs(vals[0] - (1 - math.cos(math.pi / (n + 1))) / m) < 1e-10

    def test_spectrum_bounds(self):
        for boundary in Boundary:
            params = ParticleParams(n_points=11, boundary=boundary)
            vals = np.linalg.eigvalsh(kinetic_matrix(params, 0.5))
            assert vals.min() > -1e-12
            assert vals.max() < 2.0 / 0.5 + 1e-12

    def test_not_square_of_momentum(self):
        params = periodic_params(8)
        kin = kinetic_matrix(params, 1.0)
        p = momentum_matrix(params)
        assert np.max(np.abs(kin - p @ p)) > 0.1


class TestStates:
    def test_packet_norm_and_center(self):
        params = ParticleParams(n_points=16)
        for w in (2.0, 1.6):
            pkt = gaussian_packet(params, center=7.0, width=w)
            assert abs(pkt.norm - 1.0) < 1e-12
            x = params.positions
            mean = float(np.sum(np.abs(pkt.amplitudes) ** 2 * x))
            assert abs(mean - 7.0) < 0.1

    def test_packet_variance(self):
        params = ParticleParams(n_points=32)
        for w in (2.0, 3.0, 4.0):
            pkt = gaussian_packet(params, center=15.5, width=w)
            x = params.positions
            prob = np.abs(pkt.amplitudes) ** 2
            mean = prob @ x
            var = prob @ (x - mean) ** 2
            assert abs(var - w * w) / (w * w) < 0.10

    def test_packet_wall_warning(self):
        params = ParticleParams(n_points=16)
        with pytest.warns(UserWarning):
            gaussian_packet(params, center=0.5, width=2.0)

    def test_packet_default_geometry(self):
        # defaults sit in the left half with >= 2.7 widths of wall clearance
        for n in (8, 12, 16, 20):
            params = ParticleParams(n_points=n)
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                pkt = gaussian_packet(params)
            x = params.positions
            prob = np.abs(pkt.amplitudes) ** 2
            mean = float(prob @ x)
            assert abs(mean - 11.0 * n / 32.0) < 0.2
            assert mean < (n - 1) / 2.0

    def test_uniform_state(self):
        params = periodic_params(16)
        env = uniform_state(params)
        np.testing.assert_allclose(env.amplitudes, 1.0 / 4.0)
        p = momentum_op(params, ENVIRONMENT)
        assert abs(p.expectation(env)) < 1e-12

    def test_mass_ratio_warning(self):
        with pytest.warns(UserWarning):
            ParticleParams(mass_apparatus=1.0, mass_environment=0.5).validate()


@pytest.fixture(scope="module")
def tiny_model():
    spar = SchwingerParams(n_sites=4)
    ppar = ParticleParams(n_points=4)
    cpar = CouplingParams(g_sa=1.0, g_ae=2.0, sigma=1.0)
    ops = build_schwinger(spar)
    gs, e0 = ground_state(ops)
    mop = measured_operator(ops, gs, MeasuredRegion.ALL_BUT_BOTTOM_TWO)
    space = tripartite_space(4, ppar)
    return spar, ppar, cpar, ops, gs, e0, mop, space


class TestCouplings:
    def test_h_ae_diagonal_values(self, tiny_model):
        _, ppar, cpar, _, _, _, _, space = tiny_model
        h_ae = build_h_ae(space, ppar, cpar).to_dense(max_dim=300)
        peak = cpar.g_ae / (math.sqrt(2 * math.pi) * cpar.sigma)
        a_ax, e_ax = space.index_of(APPARATUS), space.index_of(ENVIRONMENT)
        for j in range(4):
            same = space.flat_index((0, 1, 0, 1, j, j))
            assert abs(h_ae[same, same] - peak) < 1e-12
        one_sigma = space.flat_index((0, 1, 0, 1, 2, 1))
        assert abs(h_ae[one_sigma, one_sigma] - peak * math.exp(-0.5)) < 1e-12
        assert np.max(np.abs(h_ae - np.diag(np.diagonal(h_ae)))) == 0.0

    def test_h_ae_zero_coupling(self, tiny_model):
        _, ppar, _, _, _, _, _, space = tiny_model
        cpar0 = CouplingParams(g_sa=1.0, g_ae=0.0, sigma=1.0)
        h_ae = build_h_ae(space, ppar, cpar0)
        v = np.ones(space.total_dim, dtype=complex)
        assert np.max(np.abs(h_ae.matvec(v))) == 0.0

    def test_h_ae_translation_invariance(self):
        # periodic boxes: the potential commutes with the joint shift
        ppar = periodic_params(6)
        cpar = CouplingParams(g_sa=1.0, g_ae=1.7, sigma=1.3)
        v = gaussian_interaction(ppar, cpar)
        rolled = np.roll(np.roll(v, 1, axis=0), 1, axis=1)
        assert np.max(np.abs(v - rolled)) < 1e-12

    def test_h_sa_calibrated_on_ground(self, tiny_model):
        _, ppar, cpar, ops, gs, _, mop, space = tiny_model
        h_sa = build_h_sa(space, mop, ppar, cpar)
        rng = np.random.default_rng(0)
        apparatus = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        apparatus /= np.linalg.norm(apparatus)
        env = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        env /= np.linalg.norm(env)
        psi = kron_states(space, [gs.amplitudes, apparatus, env])
        assert abs(h_sa.expectation(psi)) < 1e-10

    def test_h_sa_zero_coupling(self, tiny_model):
        _, ppar, cpar, _, _, _, mop, space = tiny_model
        h_sa = build_h_sa(space, mop, ppar, cpar, g_sa=0.0)
        rng = np.random.default_rng(1)
        v = rng.standard_normal(space.total_dim) + 1j * rng.standard_normal(space.total_dim)
        assert np.max(np.abs(h_sa.matvec(v))) == 0.0

    def test_h_sa_hermitian(self, tiny_model):
        _, ppar, cpar, _, _, _, mop, space = tiny_model
        assert hermiticity_defect(build_h_sa(space, mop, ppar, cpar)) < 1e-10


class TestFullHamiltonian:
    def test_decoupled_additivity(self, tiny_model):
        spar, ppar, _, ops, gs, e0, mop, space = tiny_model
        cpar0 = CouplingParams(g_sa=1.0, g_ae=0.0, sigma=1.0)
        h = build_full_hamiltonian(space, ops, mop, ppar, cpar0, g_sa=0.0)
        pkt = gaussian_packet(ppar)
        env = uniform_state(ppar)
        psi = kron_states(space, [gs.amplitudes, pkt.amplitudes, env.amplitudes])
        e_a = np.vdot(
            pkt.amplitudes, kinetic_matrix(ppar, ppar.mass_apparatus) @ pkt.amplitudes
        ).real
        e_e = np.vdot(
            env.amplitudes, kinetic_matrix(ppar, ppar.mass_environment) @ env.amplitudes
        ).real
        assert abs(h.expectation(psi) - (e0 + e_a + e_e)) < 1e-10

    def test_hermitian(self, tiny_model):
        spar, ppar, cpar, ops, _, _, mop, space = tiny_model
        h = build_full_hamiltonian(space, ops, mop, ppar, cpar)
        assert hermiticity_defect(h, seed=3) < 1e-10

    def test_matches_dense_kron(self, tiny_model):
        # independent kron assembly of every term on the 256-dim configuration
        spar, ppar, cpar, ops, _, _, mop, space = tiny_model
        h = build_full_hamiltonian(space, ops, mop, ppar, cpar)
        dense = np.zeros((256, 256), dtype=complex)
        for coeff, blocks in h.terms:
            mats = []
            i = 0
            starts = {axes[0]: axes for axes in blocks}
            while i < space.n_factors:
                if i in starts:
                    mats.append(blocks[starts[i]])
                    i = starts[i][-1] + 1
                else:
                    mats.append(np.eye(space.dims[i]))
                    i += 1
            term = np.array([[coeff]], dtype=complex)
            for m in mats:
                term = np.kron(term, m)
            dense += term
        rng = np.random.default_rng(5)
        v = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        assert np.max(np.abs(h.matvec(v) - dense @ v)) < 1e-12


class TestValidation:
    def test_sigma_positive(self):
        with pytest.raises(ValueError, match="sigma"):
            CouplingParams(sigma=-1.0).validate()

    def test_g_sa_positive(self):
        with pytest.raises(ValueError, match="g_sa"):
            CouplingParams(g_sa=0.0).validate()

    def test_n_points_minimum(self):
        with pytest.raises(ValueError, match="n_points"):
            ParticleParams(n_points=2).validate()
