"""Massive Schwinger model as a spin chain on a staggered lattice.

Kogut-Susskind staggered fermions, Jordan-Wigner mapped, open boundaries,
gauge field eliminated through Gauss's law:

    H = 1/(2a) * sum_n (sp_n sm_{n+1} + sm_n sp_{n+1})
      + m/2   * sum_n (-1)^n (1 + sz_n)
      + g^2 a/2 * sum_links (eps0 + sum_{k<=n} Q_k)^2

with sites n = 1..N (N even), charge Q_k = (sz_k + (-1)^k)/2 and spin-up
(basis index 0) meaning an occupied fermion site.  The staggered vacuum is
sz_n = -(-1)^n; fermionic excitations (electrons on even sites, positrons on
odd sites) carry staggered density f_n = (1 + (-1)^n sz_n)/2, which is what
the downstream measurement couples to.  Constants from expanding the Coulomb
term are kept; they shift the energy but cancel in every diagnostic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import krylov
from .tensor import CompositeSpace, HilbertFactor, OperatorExpr, StateVector, inner

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)


class MeasuredRegion(enum.Enum):
    """Site set averaged by the measured density operator."""

    ALL_BUT_BOTTOM_TWO = "all_but_bottom_two"
    TOP_TWO = "top_two"


@dataclass
class SchwingerParams:
    n_sites: int = 8
    spacing: float = 1.0
    mass: float = 0.5
    coupling: float = 1.0
    background_field: float = 0.0

    def validate(self, prefix: str = "schwinger") -> None:
        if self.n_sites < 4 or self.n_sites % 2 != 0:
            raise ValueError(f"{prefix}.n_sites: must be even and >= 4")
        if self.spacing <= 0:
            raise ValueError(f"{prefix}.spacing: must be > 0")
        if self.mass < 0:
            raise ValueError(f"{prefix}.mass: must be >= 0")
        if self.coupling < 0:
            raise ValueError(f"{prefix}.coupling: must be >= 0")


@dataclass
class SchwingerOperators:
    params: SchwingerParams
    space: CompositeSpace
    hamiltonian: OperatorExpr
    charge_density: tuple  # per site, diagonal
    fermion_density: tuple  # per site, staggered excitation density, diagonal
    total_charge: OperatorExpr


def spin_space(n_sites: int) -> CompositeSpace:
    return CompositeSpace(HilbertFactor(f"site{n}", 2) for n in range(1, n_sites + 1))


def _stag(n: int) -> int:
    """(-1)^n for 1-based site n."""
    return -1 if n % 2 else 1


def staggered_vacuum(space: CompositeSpace) -> StateVector:
    """Product state sz_n = -(-1)^n (the large-mass vacuum)."""
    multi = tuple(0 if _stag(n) < 0 else 1 for n in range(1, space.n_factors + 1))
    return StateVector.basis_state(space, multi)


def charge_matrix(n: int) -> np.ndarray:
    """Q_n = (sz_n + (-1)^n)/2 as a 2x2 diagonal block (site n is 1-based)."""
    s = _stag(n)
    return np.diag([(1.0 + s) / 2.0, (-1.0 + s) / 2.0]).astype(np.complex128)


def fermion_matrix(n: int) -> np.ndarray:
    """Staggered excitation density f_n = (1 + (-1)^n sz_n)/2 (zero in the bare vacuum)."""
    s = _stag(n)
    return np.diag([(1.0 + s) / 2.0, (1.0 - s) / 2.0]).astype(np.complex128)


def build_schwinger(params: SchwingerParams) -> SchwingerOperators:
    """Assemble the spin Hamiltonian and the per-site density operators."""
    params.validate()
    n = params.n_sites
    a = params.spacing
    space = spin_space(n)
    terms = []

    # hopping, one 4x4 block per bond
    hop = (np.kron(SIGMA_PLUS, SIGMA_MINUS) + np.kron(SIGMA_MINUS, SIGMA_PLUS)) / (2.0 * a)
    for i in range(n - 1):
        terms.append((1.0, {(i, i + 1): hop}))

    # mass: m/2 sum (-1)^n (1 + sz_n) = m sum (-1)^n nu_n
    nu = np.diag([1.0, 0.0]).astype(np.complex128)
    for site in range(1, n + 1):
        terms.append((params.mass * _stag(site), {(site - 1,): nu}))

    # Coulomb: g^2 a/2 sum over links of L_n^2; expand into const, z and zz pieces
    j = params.coupling**2 * a / 2.0
    eps0 = params.background_field
    a_link = [eps0 + (-0.5 if link % 2 else 0.0) for link in range(n)]  # a_link[n] for link n
    const = sum(a_link[link] ** 2 + link / 4.0 for link in range(1, n))
    if const:
        terms.append((j * const, {}))
    for k in range(1, n):
        ck = sum(a_link[link] for link in range(k, n))
        if ck:
            terms.append((j * ck, {(k - 1,): SIGMA_Z}))
    for k in range(1, n):
        for l in range(k + 1, n):
            terms.append((j * (n - l) / 2.0, {(k - 1,): SIGMA_Z, (l - 1,): SIGMA_Z}))

    h = OperatorExpr(space, terms, hermitian=True)

    charges = tuple(
        OperatorExpr(space, [(1.0, {(i,): charge_matrix(i + 1)})], hermitian=True)
        for i in range(n)
    )
    fermions = tuple(
        OperatorExpr(space, [(1.0, {(i,): fermion_matrix(i + 1)})], hermitian=True)
        for i in range(n)
    )
    total_q = OperatorExpr(
        space,
        [(1.0, {(i,): charge_matrix(i + 1)}) for i in range(n)],
        hermitian=True,
    )
    return SchwingerOperators(params, space, h, charges, fermions, total_q)


def ground_state(ops: SchwingerOperators, tol: float = 1e-10, seed: int = 0):
    """Lowest eigenpair of the spin Hamiltonian via restarted Lanczos.

    Returns ``(state, energy)``; the residual ||H psi - E psi|| is below
    ``tol`` on return.
    """
    dim = ops.space.total_dim
    energy, vec, _ = krylov.lowest_eigenpair(
        ops.hamiltonian.matvec, dim, seed=seed, tol=tol
    )
    return StateVector(ops.space, vec, normalize=True), energy


def charge_pair_state(ops: SchwingerOperators, ground: StateVector) -> StateVector:
    """Neutral charge pair on sites 1 and 2, orthogonal to the ground state.

    Moves the sea fermion from site 1 to site 2 (sm_1 sp_2 on the spin chain;
    adjacent sites, so the Jordan-Wigner string is trivial).  The raw state
    lies in the Q_1 + Q_2 = 0 eigenspace, so it is exactly neutral on the
    bottom pair of sites; to keep that property while making the branch
    exactly orthogonal to the ground state, Gram-Schmidt is done against the
    ground state projected onto the same eigenspace (which carries almost all
    of its weight, so the subtraction stays vacuum-like).
    """
    creator = OperatorExpr(
        ops.space, [(1.0, {(0,): SIGMA_MINUS, (1,): SIGMA_PLUS})]
    )
    raw = creator.apply(ground)
    if raw.norm < 1e-6:
        raise ValueError(
            "pair creation annihilated the ground state; site/spin convention is wrong"
        )
    # ground-state component in the Q1+Q2 = 0 eigenspace: on (site1, site2)
    # the basis blocks (up, up) and (down, down) carry charge +1 and -1
    neutral = ground.tensor_view().copy()
    neutral[0, 0] = 0.0
    neutral[1, 1] = 0.0
    neutral = neutral.reshape(-1)
    weight = float(np.vdot(neutral, neutral).real)
    amps = raw.amplitudes.copy()
    if weight > 0.0:
        amps -= (inner(ground, raw) / weight) * neutral
    if np.linalg.norm(amps) < 1e-6:
        raise ValueError("charge pair state vanished after orthogonalization")
    pair = StateVector(ops.space, amps, normalize=True)

    q1 = ops.charge_density[0].expectation(pair)
    q2 = ops.charge_density[1].expectation(pair)
    if abs(q1 + q2) > 1e-8:
        raise ValueError(f"charge pair is not neutral: <Q1+Q2> = {q1 + q2:.3e}")
    if abs(q1) < 0.8:
        raise ValueError(f"charge pair is not localized: |<Q1>| = {abs(q1):.3f}")
    return pair


def measured_sites(n_sites: int, region: MeasuredRegion) -> tuple:
    """1-based site set averaged by the measured operator."""
    if region is MeasuredRegion.ALL_BUT_BOTTOM_TWO:
        return tuple(range(3, n_sites + 1))
    if region is MeasuredRegion.TOP_TWO:
        return (n_sites - 1, n_sites)
    raise ValueError(f"unknown measured region {region!r}")


def measured_operator(
    ops: SchwingerOperators, ground: StateVector, region: MeasuredRegion
) -> OperatorExpr:
    """Fermion density averaged over the region, calibrated against the vacuum.

    The ground-state expectation is subtracted (times identity) so the
    apparatus reacts as little as possible when no charges are present.
    """
    sites = measured_sites(ops.params.n_sites, region)
    if not sites:
        raise ValueError("measured region is empty")
    weight = 1.0 / len(sites)
    terms = [(weight, {(site - 1,): fermion_matrix(site)}) for site in sites]
    bare = OperatorExpr(ops.space, terms, hermitian=True)
    offset = bare.expectation(ground)
    return OperatorExpr(ops.space, terms + [(-offset, {})], hermitian=True)
