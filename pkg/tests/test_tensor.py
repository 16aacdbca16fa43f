"""Tensor core: index arithmetic, states, matrix-free operator application."""

import numpy as np
import pytest

from schwdec.tensor import (
    CompositeSpace,
    HilbertFactor,
    OperatorExpr,
    StateVector,
    compose_space,
    hermiticity_defect,
    inner,
    kron_states,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def qubits(n):
    return CompositeSpace(HilbertFactor(f"q{i}", 2) for i in range(n))


def space_of(*dims):
    return CompositeSpace(HilbertFactor(f"f{i}", d) for i, d in enumerate(dims))


def dense_kron(space, terms):
    """Independent dense reference for a term list."""
    h = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for coeff, ops in terms:
        block = np.array([[coeff]], dtype=complex)
        i = 0
        starts = {axes[0]: axes for axes in ops}
        while i < space.n_factors:
            if i in starts:
                block = np.kron(block, np.asarray(ops[starts[i]], dtype=complex))
                i = starts[i][-1] + 1
            else:
                block = np.kron(block, np.eye(space.dims[i]))
                i += 1
        h += block
    return h


def random_hermitian_expr(space, rng, n_terms=4):
    terms = []
    for _ in range(n_terms):
        ops = {}
        axes = sorted(rng.choice(space.n_factors, size=min(2, space.n_factors), replace=False))
        for a in axes:
            d = space.dims[a]
            ops[(int(a),)] = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        terms.append((complex(rng.standard_normal(), rng.standard_normal()), ops))
    op = OperatorExpr(space, terms)
    return OperatorExpr(space, op.terms + op.dagger().terms, hermitian=True)


class TestCompositeSpace:
    def test_single_qubit(self):
        assert compose_space([HilbertFactor("q", 2)]).total_dim == 2

    def test_product_of_dims(self):
        assert space_of(2, 2, 3).total_dim == 12

    def test_default_scale(self):
        factors = [HilbertFactor(f"site{n}", 2) for n in range(8)]
        factors += [HilbertFactor("apparatus", 16), HilbertFactor("environment", 16)]
        assert CompositeSpace(factors).total_dim == 65536

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compose_space([])

    def test_small_dim_rejected(self):
        with pytest.raises(ValueError):
            HilbertFactor("bad", 1)

    def test_overflow_rejected(self):
        with pytest.raises(OverflowError):
            CompositeSpace(HilbertFactor(f"f{i}", 64) for i in range(12))

    def test_flat_index_examples(self):
        assert space_of(2, 2).flat_index((0, 0)) == 0
        assert space_of(2, 3).flat_index((1, 2)) == 5

    def test_flat_index_range_checked(self):
        with pytest.raises(IndexError):
            space_of(2, 3).flat_index((0, 3))

    def test_bijection(self):
        space = space_of(2, 3, 4)
        for m in np.ndindex(2, 3, 4):
            assert space.unflatten(space.flat_index(m)) == m
        for flat in range(space.total_dim):
            assert space.flat_index(space.unflatten(flat)) == flat

    def test_label_lookup(self):
        space = space_of(2, 3)
        assert space.index_of("f1") == 1
        with pytest.raises(KeyError):
            space.index_of("nope")


class TestStateVector:
    def test_norm_after_normalize(self):
        rng = np.random.default_rng(0)
        space = space_of(2, 3, 4)
        v = rng.standard_normal(24) + 1j * rng.standard_normal(24)
        psi = StateVector(space, v, normalize=True)
        assert abs(psi.norm - 1.0) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            StateVector(space_of(2, 2), np.zeros(4), normalize=True)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            StateVector(space_of(2, 2), np.zeros(5))

    def test_kron_states(self):
        space = space_of(2, 3)
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0, 0.0])
        psi = kron_states(space, [a, b])
        assert psi.amplitudes[space.flat_index((0, 1))] == 1.0

    def test_inner_normalized(self):
        rng = np.random.default_rng(1)
        space = space_of(4, 4)
        psi = StateVector(space, rng.standard_normal(16) + 1j * rng.standard_normal(16), normalize=True)
        assert abs(inner(psi, psi) - 1.0) < 1e-12

    def test_inner_space_mismatch(self):
        a = StateVector.basis_state(space_of(2, 2), (0, 0))
        b = StateVector.basis_state(space_of(2, 3), (0, 0))
        with pytest.raises(ValueError):
            inner(a, b)


class TestApply:
    def test_pauli_x_flips(self):
        space = qubits(1)
        op = OperatorExpr(space, [(1.0, {(0,): SX})], hermitian=True)
        out = op.apply(StateVector.basis_state(space, (0,)))
        np.testing.assert_allclose(out.amplitudes, [0.0, 1.0])

    def test_identity_term(self):
        rng = np.random.default_rng(2)
        space = space_of(2, 3)
        psi = StateVector(space, rng.standard_normal(6) + 1j * rng.standard_normal(6))
        out = OperatorExpr.identity(space).apply(psi)
        np.testing.assert_allclose(out.amplitudes, psi.amplitudes)

    def test_sigma_z_convention(self):
        space = qubits(1)
        op = OperatorExpr(space, [(1.0, {(0,): SZ})], hermitian=True)
        assert op.expectation(StateVector.basis_state(space, (0,))) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_apply_matches_dense_small(self, seed):
        rng = np.random.default_rng(seed)
        space = space_of(2, 4, 8)  # dim 64
        op = random_hermitian_expr(space, rng)
        dense = dense_kron(space, op.terms)
        v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        assert np.max(np.abs(op.matvec(v) - dense @ v)) < 1e-12

    def test_apply_matches_dense_256(self):
        rng = np.random.default_rng(7)
        space = space_of(2, 2, 4, 4, 4)  # dim 256
        terms = [
            (1.5, {(0,): SX, (2,): rng.standard_normal((4, 4))}),
            (-0.5j, {(1,): SZ}),
            (2.0, {(2, 3): rng.standard_normal((16, 16))}),
            (0.25, {}),
            (1.0, {(4,): np.diag(rng.standard_normal(4))}),
        ]
        op = OperatorExpr(space, terms)
        dense = dense_kron(space, op.terms)
        v = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        assert np.max(np.abs(op.matvec(v) - dense @ v)) < 1e-12
        assert np.max(np.abs(op.to_dense() - dense)) < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(3)
        space = space_of(3, 3, 3)
        op = random_hermitian_expr(space, rng)
        phi = rng.standard_normal(27) + 1j * rng.standard_normal(27)
        psi = rng.standard_normal(27) + 1j * rng.standard_normal(27)
        a, b = 0.7 - 0.2j, -1.1 + 0.4j
        lhs = op.matvec(a * phi + b * psi)
        rhs = a * op.matvec(phi) + b * op.matvec(psi)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_expectation_matches_dense(self):
        rng = np.random.default_rng(4)
        space = space_of(4, 4, 4)
        op = random_hermitian_expr(space, rng)
        dense = dense_kron(space, op.terms)
        psi = StateVector(space, rng.standard_normal(64) + 1j * rng.standard_normal(64), normalize=True)
        ref = np.vdot(psi.amplitudes, dense @ psi.amplitudes).real
        assert abs(op.expectation(psi) - ref) < 1e-12

    def test_hermiticity_sampled(self):
        rng = np.random.default_rng(5)
        space = space_of(2, 3, 4)
        op = random_hermitian_expr(space, rng)
        assert hermiticity_defect(op, seed=0) < 1e-10

    def test_space_mismatch_rejected(self):
        op = OperatorExpr.identity(space_of(2, 2))
        psi = StateVector.basis_state(space_of(2, 3), (0, 0))
        with pytest.raises(ValueError):
            op.apply(psi)

    def test_nonadjacent_group_rejected(self):
        space = space_of(2, 2, 2)
        with pytest.raises(ValueError):
            OperatorExpr(space, [(1.0, {(0, 2): np.eye(4)})])

    def test_axis_reuse_rejected(self):
        space = space_of(2, 2)
        with pytest.raises(ValueError):
            OperatorExpr(space, [(1.0, {(0,): SZ, (0, 1): np.eye(4)})])

    def test_block_shape_checked(self):
        space = space_of(2, 3)
        with pytest.raises(ValueError):
            OperatorExpr(space, [(1.0, {(1,): np.eye(2)})])

    def test_imaginary_expectation_flagged(self):
        space = qubits(1)
        bad = OperatorExpr(space, [(1.0, {(0,): np.array([[0, 1j], [0, 0]])})], hermitian=True)
        psi = StateVector(space, np.array([1.0, 1.0]) / np.sqrt(2))
        with pytest.raises(FloatingPointError):
            bad.expectation(psi)

    def test_algebra(self):
        rng = np.random.default_rng(6)
        space = space_of(2, 4)
        op1 = random_hermitian_expr(space, rng, n_terms=2)
        op2 = random_hermitian_expr(space, rng, n_terms=2)
        combined = op1 + 2.0 * op2
        dense = dense_kron(space, op1.terms) + 2.0 * dense_kron(space, op2.terms)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.max(np.abs(combined.matvec(v) - dense @ v)) < 1e-12
        assert combined.hermitian
        assert not (1j * op1).hermitian
