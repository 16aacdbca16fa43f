"""Schwinger spin chain: Hamiltonian structure, ground state, charge pair."""

import numpy as np
import pytest

from schwdec import krylov
from schwdec.schwinger import (
    MeasuredRegion,
    SchwingerParams,
    build_schwinger,
    charge_pair_state,
    ground_state,
    measured_operator,
    measured_sites,
    staggered_vacuum,
)
from schwdec.tensor import StateVector, hermiticity_defect, inner


def dense_schwinger(n, a, m, g, eps0=0.0):
    """Independent dense build of the spin Hamiltonian, straight from the formula."""
    dim = 2**n
    sz_diag = []
    for site in range(1, n + 1):
        z = np.ones(dim)
        for idx in range(dim):
            bits = [(idx >> (n - 1 - k)) & 1 for k in range(n)]
            z[idx] = 1.0 - 2.0 * bits[site - 1]
        sz_diag.append(z)
    h = np.zeros((dim, dim), dtype=complex)
    # hopping via explicit bit flips
    for site in range(1, n):
        i, j = site - 1, site
        for idx in range(dim):
            bi = (idx >> (n - 1 - i)) & 1
            bj = (idx >> (n - 1 - j)) & 1
            if bi == 1 and bj == 0:  # sp_i sm_j maps (down_i, up_j) -> (up_i, down_j)
                tgt = idx ^ (1 << (n - 1 - i)) ^ (1 << (n - 1 - j))
                h[tgt, idx] += 1.0 / (2.0 * a)
                h[idx, tgt] += 1.0 / (2.0 * a)
    # mass
    for site in range(1, n + 1):
        sign = (-1) ** site
        h += np.diag((m / 2.0) * sign * (1.0 + sz_diag[site - 1]))
    # Coulomb
    for link in range(1, n):
        l_diag = np.full(dim, eps0)
        for k in range(1, link + 1):
            l_diag = l_diag + (sz_diag[k - 1] + (-1) ** k) / 2.0
        h += np.diag((g**2 * a / 2.0) * l_diag**2)
    return h


class TestBuild:
    def test_odd_sites_rejected(self):
        with pytest.raises(ValueError):
            build_schwinger(SchwingerParams(n_sites=5))

    def test_pure_hopping_spectrum(self):
        # N=4, g=0, m=0: spectrum must match the dense hopping chain
        ops = build_schwinger(SchwingerParams(n_sites=4, mass=0.0, coupling=0.0))
        got = np.linalg.eigvalsh(ops.hamiltonian.to_dense())
        ref = np.linalg.eigvalsh(dense_schwinger(4, 1.0, 0.0, 0.0))
        np.testing.assert_allclose(got, ref, atol=1e-12)

    @pytest.mark.parametrize("n,m,g", [(4, 0.5, 1.0), (6, 0.5, 1.0), (6, 0.1, 0.3)])
    def test_matches_dense_formula(self, n, m, g):
        ops = build_schwinger(SchwingerParams(n_sites=n, mass=m, coupling=g))
        got = ops.hamiltonian.to_dense()
        ref = dense_schwinger(n, 1.0, m, g)
        assert np.max(np.abs(got - ref)) < 1e-12

    def test_staggered_state_is_neutral(self):
        ops = build_schwinger(SchwingerParams(n_sites=6))
        stag = staggered_vacuum(ops.space)
        for q in ops.charge_density:
            assert abs(q.expectation(stag)) < 1e-14

    def test_coulomb_vanishes_on_staggered_state(self):
        # with m = 0 both hopping and Coulomb give zero on the neutral product state
        ops = build_schwinger(SchwingerParams(n_sites=6, mass=0.0, coupling=1.3))
        stag = staggered_vacuum(ops.space)
        assert abs(ops.hamiltonian.expectation(stag)) < 1e-12

    def test_hermiticity(self):
        ops = build_schwinger(SchwingerParams(n_sites=6))
        assert hermiticity_defect(ops.hamiltonian, seed=1) < 1e-10

    def test_densities_diagonal(self):
        ops = build_schwinger(SchwingerParams(n_sites=4))
        for op in list(ops.charge_density) + list(ops.fermion_density):
            dense = op.to_dense()
            assert np.max(np.abs(dense - np.diag(np.diagonal(dense)))) == 0.0

    def test_charge_commutes_with_hamiltonian(self):
        rng = np.random.default_rng(0)
        ops = build_schwinger(SchwingerParams(n_sites=6))
        v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        v /= np.linalg.norm(v)
        hq = ops.hamiltonian.matvec(ops.total_charge.matvec(v))
        qh = ops.total_charge.matvec(ops.hamiltonian.matvec(v))
        assert np.linalg.norm(hq - qh) < 1e-10


class TestGroundState:
    def test_large_mass_limit(self):
        ops = build_schwinger(SchwingerParams(n_sites=6, mass=50.0, coupling=1.0))
        gs, _ = ground_state(ops)
        stag = staggered_vacuum(ops.space)
        assert abs(inner(stag, gs)) ** 2 > 0.99

    def test_energy_matches_dense(self):
        ops = build_schwinger(SchwingerParams(n_sites=6, mass=0.5, coupling=1.0))
        _, energy = ground_state(ops)
        ref = np.linalg.eigvalsh(dense_schwinger(6, 1.0, 0.5, 1.0))[0]
        assert abs(energy - ref) < 1e-9

    def test_residual_contract(self):
        ops = build_schwinger(SchwingerParams(n_sites=6))
        gs, energy = ground_state(ops, tol=1e-10)
        resid = np.linalg.norm(ops.hamiltonian.matvec(gs.amplitudes) - energy * gs.amplitudes)
        assert resid < 1e-10

    def test_variational_monotonicity(self):
        ops = build_schwinger(SchwingerParams(n_sites=6))
        _, _, history = krylov.lowest_eigenpair(
            ops.hamiltonian.matvec, ops.space.total_dim, seed=0
        )
        assert np.all(np.diff(history) <= 1e-10)

    def test_vacuum_charge_profile(self):
        ops = build_schwinger(SchwingerParams(n_sites=8))
        gs, _ = ground_state(ops)
        q = np.array([op.expectation(gs) for op in ops.charge_density])
        assert abs(q.sum()) < 1e-8
        # antisymmetric under chain reflection
        np.testing.assert_allclose(q, -q[::-1], atol=1e-8)


class TestChargePair:
    @pytest.fixture(scope="class")
    def setup(self):
        ops = build_schwinger(SchwingerParams(n_sites=8))
        gs, e0 = ground_state(ops)
        pair = charge_pair_state(ops, gs)
        return ops, gs, pair

    def test_normalized(self, setup):
        _, _, pair = setup
        assert abs(pair.norm - 1.0) < 1e-12

    def test_orthogonal_to_ground(self, setup):
        _, gs, pair = setup
        assert abs(inner(gs, pair)) < 1e-10

    def test_bottom_pair_neutral(self, setup):
        ops, _, pair = setup
        q1 = ops.charge_density[0].expectation(pair)
        q2 = ops.charge_density[1].expectation(pair)
        assert abs(q1 + q2) < 1e-8

    def test_total_charge_zero(self, setup):
        ops, _, pair = setup
        assert abs(ops.total_charge.expectation(pair)) < 1e-8

    def test_charge_localized(self, setup):
        ops, _, pair = setup
        q = np.array([op.expectation(pair) for op in ops.charge_density])
        assert abs(q[0]) > 0.8
        assert min(abs(q[0]), abs(q[1])) > 3.0 * np.max(np.abs(q[2:]))


class TestMeasuredOperator:
    @pytest.fixture(scope="class")
    def setup(self):
        ops = build_schwinger(SchwingerParams(n_sites=8))
        gs, _ = ground_state(ops)
        return ops, gs

    def test_site_sets(self):
        assert measured_sites(8, MeasuredRegion.ALL_BUT_BOTTOM_TWO) == tuple(range(3, 9))
        assert measured_sites(8, MeasuredRegion.TOP_TWO) == (7, 8)

    def test_calibration(self, setup):
        ops, gs = setup
        for region in MeasuredRegion:
            op = measured_operator(ops, gs, region)
            assert abs(op.expectation(gs)) < 1e-12

    def test_averaging_weights(self, setup):
        ops, gs = setup
        op = measured_operator(ops, gs, MeasuredRegion.ALL_BUT_BOTTOM_TWO)
        # one excitation parked at site 5 raises the average by exactly 1/6
        stag = staggered_vacuum(ops.space).tensor_view().copy()
        multi = list(np.argwhere(stag != 0)[0])
        multi[4] = 1 - multi[4]
        excited = StateVector.basis_state(ops.space, multi)
        bare_shift = op.expectation(excited) - op.expectation(staggered_vacuum(ops.space))
        assert abs(bare_shift - 1.0 / 6.0) < 1e-12

    def test_pair_barely_visible_at_start(self, setup):
        ops, gs = setup
        pair = charge_pair_state(ops, gs)
        op = measured_operator(ops, gs, MeasuredRegion.ALL_BUT_BOTTOM_TWO)
        assert abs(op.expectation(pair)) < 0.05

    def test_hermitian(self, setup):
        ops, gs = setup
        op = measured_operator(ops, gs, MeasuredRegion.TOP_TWO)
        assert hermiticity_defect(op) < 1e-12
