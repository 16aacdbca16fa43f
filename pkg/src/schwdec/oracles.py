"""Dense-oracle cross-checks for the matrix-free and Krylov machinery.

Each check compares an optimized code path against an independently built
dense reference (explicit Kronecker matrices, full eigendecompositions) on a
space small enough to materialize.  The CLI ``oracle-check`` subcommand runs
all of them and fails loudly on any mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .evolve import DenseEvolver, EvolutionParams, evolve_step
from .experiments import build_model
from .probe import ParticleParams
from .qinfo import DensityMatrix, fidelity, partial_trace
from .schwinger import SchwingerParams, build_schwinger, ground_state
from .tensor import CompositeSpace, HilbertFactor, OperatorExpr, StateVector


@dataclass
class OracleResult:
    name: str
    max_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_err < self.tol


def _random_state(space: CompositeSpace, rng) -> StateVector:
    v = rng.standard_normal(space.total_dim) + 1j * rng.standard_normal(space.total_dim)
    return StateVector(space, v, normalize=True)


def _random_operator(space: CompositeSpace, rng, n_terms: int = 5) -> OperatorExpr:
    terms = []
    n = space.n_factors
    for _ in range(n_terms):
        ops = {}
        k = rng.integers(1, min(3, n) + 1)
        axes_pool = list(range(n))
        rng.shuffle(axes_pool)
        used = set()
        for _ in range(k):
            candidates = [a for a in axes_pool if a not in used]
            if not candidates:
                break
            a = candidates[0]
            if a + 1 < n and a + 1 not in used and rng.random() < 0.3:
                group = (a, a + 1)
            else:
                group = (a,)
            used.update(group)
            d = int(np.prod([space.dims[g] for g in group]))
            m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            ops[group] = m
        coeff = complex(rng.standard_normal(), rng.standard_normal())
        terms.append((coeff, ops))
    op = OperatorExpr(space, terms)
    return OperatorExpr(space, op.terms + op.dagger().terms, hermitian=True)


def _dense_reference(space: CompositeSpace, terms) -> np.ndarray:
    """Independent dense build: plain Kronecker products, no shared code path."""
    n = space.total_dim
    h = np.zeros((n, n), dtype=complex)
    for coeff, ops in terms:
        mats = []
        i = 0
        start = {axes[0]: axes for axes in ops}
        while i < space.n_factors:
            if i in start:
                mats.append(ops[start[i]])
                i = start[i][-1] + 1
            else:
                mats.append(np.eye(space.dims[i]))
                i += 1
        block = np.array([[1.0 + 0j]])
        for m in mats:
            block = np.kron(block, m)
        h += coeff * block
    return h


def check_apply_random(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dims in [(2, 2), (2, 3, 4), (4, 4, 4, 2), (2, 2, 2, 2, 2, 2, 2, 2)]:
        space = CompositeSpace(HilbertFactor(f"f{i}", d) for i, d in enumerate(dims))
        op = _random_operator(space, rng)
        dense = _dense_reference(space, op.terms)
        for _ in range(3):
            v = rng.standard_normal(space.total_dim) + 1j * rng.standard_normal(space.total_dim)
            worst = max(worst, float(np.max(np.abs(op.matvec(v) - dense @ v))))
    return OracleResult("matrix-free apply vs dense Kronecker", worst, 1e-12)


def _tiny_config() -> ExperimentConfig:
    cfg = ExperimentConfig(
        schwinger=SchwingerParams(n_sites=4),
        particles=ParticleParams(n_points=4),
        evolution=EvolutionParams(dt=0.05, t_max=1.0, record_every=1),
    )
    return cfg


def check_hamiltonian_dense(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    model = build_model(_tiny_config())
    dense = _dense_reference(model.space, model.hamiltonian.terms)
    worst = float(np.max(np.abs(dense - dense.conj().T)))
    for _ in range(3):
        v = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        worst = max(worst, float(np.max(np.abs(model.hamiltonian.matvec(v) - dense @ v))))
    return OracleResult("full Hamiltonian apply vs dense", worst, 1e-12)


def check_expectation_dense(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    space = CompositeSpace([HilbertFactor("a", 4), HilbertFactor("b", 4), HilbertFactor("c", 4)])
    op = _random_operator(space, rng)
    dense = _dense_reference(space, op.terms)
    worst = 0.0
    for _ in range(4):
        psi = _random_state(space, rng)
        ref = np.vdot(psi.amplitudes, dense @ psi.amplitudes).real
        worst = max(worst, abs(op.expectation(psi) - ref))
    return OracleResult("expectation vs dense quadratic form", worst, 1e-12)


def check_krylov_vs_dense(seed: int = 0) -> OracleResult:
    """>= 100 Krylov steps against one-shot dense eigendecomposition."""
    cfg = ExperimentConfig(
        schwinger=SchwingerParams(n_sites=4),
        particles=ParticleParams(n_points=8),
        evolution=EvolutionParams(dt=0.05, t_max=5.0, record_every=10),
    )
    model = build_model(cfg)
    psi = model.branch_set().superposition
    oracle = DenseEvolver(model.hamiltonian)
    n_steps = 100
    cur = psi
    for _ in range(n_steps):
        cur = evolve_step(model.hamiltonian, cur, cfg.evolution.dt, cfg.evolution)
    ref = oracle.evolve(psi, n_steps * cfg.evolution.dt)
    err = float(np.linalg.norm(cur.amplitudes - ref.amplitudes))
    return OracleResult("Krylov vs dense evolution (100 steps)", err, 1e-8)


def check_partial_trace(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    space = CompositeSpace(
        [HilbertFactor("a", 2), HilbertFactor("b", 4), HilbertFactor("c", 2), HilbertFactor("d", 4)]
    )
    worst = 0.0
    for keep in [(0,), (1, 3), (0, 2), (3,), (0, 1, 2)]:
        psi = _random_state(space, rng)
        got = partial_trace(psi, keep).matrix
        # independent oracle: full outer product, then trace index pairs
        dims = space.dims
        rho_full = np.outer(psi.amplitudes, psi.amplitudes.conj()).reshape(dims + dims)
        n = len(dims)
        traced = [a for a in range(n) if a not in keep]
        for a in sorted(traced, reverse=True):
            rho_full = np.trace(rho_full, axis1=a, axis2=a + rho_full.ndim // 2)
        d = int(np.prod([dims[a] for a in keep]))
        worst = max(worst, float(np.max(np.abs(got - rho_full.reshape(d, d)))))
    return OracleResult("partial trace vs dense outer-product trace", worst, 1e-10)


def check_fidelity_routes(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim, rank in [(16, 3), (32, 8), (24, 24)]:
        b1 = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
        b2 = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
        b1 /= np.linalg.norm(b1)
        b2 /= np.linalg.norm(b2)
        fac1 = DensityMatrix.from_factor((0,), (dim,), b1)
        fac2 = DensityMatrix.from_factor((0,), (dim,), b2)
        dense1 = DensityMatrix((0,), (dim,), matrix=b1 @ b1.conj().T)
        dense2 = DensityMatrix((0,), (dim,), matrix=b2 @ b2.conj().T)
        worst = max(worst, abs(fidelity(fac1, fac2) - fidelity(dense1, dense2)))
    return OracleResult("fidelity factored route vs dense route", worst, 1e-10)


def check_ground_state(seed: int = 0) -> OracleResult:
    ops = build_schwinger(SchwingerParams(n_sites=6, mass=0.5, coupling=1.0))
    _, energy = ground_state(ops, seed=seed)
    ref = float(np.linalg.eigvalsh(ops.hamiltonian.to_dense())[0])
    return OracleResult("Lanczos ground energy vs dense spectrum", abs(energy - ref), 1e-9)


def check_exact_evolve_composition(seed: int = 0) -> OracleResult:
    rng = np.random.default_rng(seed)
    ops = build_schwinger(SchwingerParams(n_sites=4))
    ev = DenseEvolver(ops.hamiltonian)
    psi = _random_state(ops.space, rng)
    one = ev.evolve(ev.evolve(psi, 0.7), 1.1)
    two = ev.evolve(psi, 1.8)
    err = float(np.linalg.norm(one.amplitudes - two.amplitudes))
    return OracleResult("exact evolution composition", err, 1e-10)


ALL_CHECKS = (
    check_apply_random,
    check_hamiltonian_dense,
    check_expectation_dense,
    check_krylov_vs_dense,
    check_partial_trace,
    check_fidelity_routes,
    check_ground_state,
    check_exact_evolve_composition,
)


def run_all(seed: int = 0) -> list:
    return [check(seed) for check in ALL_CHECKS]
