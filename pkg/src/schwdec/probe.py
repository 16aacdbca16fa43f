"""Apparatus and environment particles, their couplings, and the full Hamiltonian.

Both particles live on 1-d lattices of N points with spacing b, positions
x_j = j*b.  The measurement coupling is of von Neumann type: (calibrated
measured density) x (apparatus momentum), so the apparatus drifts to larger x
while charges sit in the measured region.  The apparatus-environment coupling
is a Gaussian potential in the position difference, diagonal on the joint
(apparatus, environment) pair; it is assembled as a sum of separable diagonal
terms, which matches the potential pointwise.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .schwinger import SchwingerOperators
from .tensor import CompositeSpace, HilbertFactor, OperatorExpr, StateVector

APPARATUS = "apparatus"
ENVIRONMENT = "environment"


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    HARD_WALL = "hard_wall"


@dataclass
class ParticleParams:
    n_points: int = 16
    lattice_spacing: float = 1.0
    mass_apparatus: float = 10.0
    mass_environment: float = 0.5
    boundary: Boundary = Boundary.HARD_WALL

    def validate(self, prefix: str = "particles") -> None:
        if self.n_points < 3:
            raise ValueError(f"{prefix}.n_points: must be >= 3")
        if self.lattice_spacing <= 0:
            raise ValueError(f"{prefix}.lattice_spacing: must be > 0")
        if self.mass_apparatus <= 0 or self.mass_environment <= 0:
            raise ValueError(f"{prefix}: masses must be > 0")
        if self.mass_apparatus < 10.0 * self.mass_environment:
            warnings.warn(
                "apparatus is expected to be much heavier than the environment "
                f"(mass_apparatus={self.mass_apparatus}, "
                f"mass_environment={self.mass_environment})",
                stacklevel=2,
            )

    def mass_of(self, which: str) -> float:
        if which == APPARATUS:
            return self.mass_apparatus
        if which == ENVIRONMENT:
            return self.mass_environment
        raise ValueError(f"unknown particle {which!r}")

    @property
    def positions(self) -> np.ndarray:
        return self.lattice_spacing * np.arange(self.n_points)


@dataclass
class CouplingParams:
    g_sa: float = 1.0
    g_ae: float = 2.0
    sigma: float = 1.0

    def validate(self, prefix: str = "couplings") -> None:
        if self.g_sa <= 0:
            raise ValueError(f"{prefix}.g_sa: must be > 0")
        if self.g_ae < 0:
            raise ValueError(f"{prefix}.g_ae: must be >= 0")
        if self.sigma <= 0:
            raise ValueError(f"{prefix}.sigma: must be > 0")


def particle_space(params: ParticleParams, which: str) -> CompositeSpace:
    return CompositeSpace([HilbertFactor(which, params.n_points)])


def momentum_matrix(params: ParticleParams) -> np.ndarray:
    """p = -i * (central difference) / (2b); Hermitian by antisymmetry."""
    if params.n_points < 3:
        raise ValueError("momentum stencil needs at least 3 points")
    n, b = params.n_points, params.lattice_spacing
    stencil = np.zeros((n, n))
    for j in range(n - 1):
        stencil[j, j + 1] = 1.0
        stencil[j + 1, j] = -1.0
    if params.boundary is Boundary.PERIODIC:
        stencil[n - 1, 0] = 1.0
        stencil[0, n - 1] = -1.0
    return (-1j / (2.0 * b)) * stencil.astype(np.complex128)


def kinetic_matrix(params: ParticleParams, mass: float) -> np.ndarray:
    """Three-point Laplacian kinetic energy, spectrum in [0, 2/(m b^2)].

    Deliberately not the square of the momentum stencil: the squared central
    difference decouples the even and odd sublattices and produces spurious
    degeneracies.
    """
    if params.n_points < 3:
        raise ValueError("kinetic stencil needs at least 3 points")
    n, b = params.n_points, params.lattice_spacing
    t = 1.0 / (2.0 * mass * b * b)
    k = np.zeros((n, n))
    for j in range(n):
        k[j, j] = 2.0 * t
        if j + 1 < n:
            k[j, j + 1] = -t
            k[j + 1, j] = -t
    if params.boundary is Boundary.PERIODIC:
        k[n - 1, 0] = -t
        k[0, n - 1] = -t
    return k.astype(np.complex128)


def momentum_op(params: ParticleParams, which: str) -> OperatorExpr:
    space = particle_space(params, which)
    return OperatorExpr(space, [(1.0, {(0,): momentum_matrix(params)})], hermitian=True)


def kinetic_op(params: ParticleParams, which: str) -> OperatorExpr:
    space = particle_space(params, which)
    mat = kinetic_matrix(params, params.mass_of(which))
    return OperatorExpr(space, [(1.0, {(0,): mat})], hermitian=True)


def gaussian_interaction(params: ParticleParams, couplings: CouplingParams) -> np.ndarray:
    """Matrix V[j, k] = exp(-(x_j - x_k)^2 / (2 sigma^2)) / (sqrt(2 pi) sigma).

    On a periodic lattice the minimal-image distance is used so the potential
    commutes with the joint shift of both particles.
    """
    if couplings.sigma <= 0:
        raise ValueError("couplings.sigma: must be > 0")
    x = params.positions
    diff = np.abs(x[:, None] - x[None, :])
    if params.boundary is Boundary.PERIODIC:
        span = params.n_points * params.lattice_spacing
        diff = np.minimum(diff, span - diff)
    s = couplings.sigma
    return np.exp(-(diff**2) / (2.0 * s * s)) / (math.sqrt(2.0 * math.pi) * s)


def gaussian_packet(
    params: ParticleParams,
    center: float | None = None,
    width: float | None = None,
    momentum: float = 0.0,
    which: str = APPARATUS,
) -> StateVector:
    """Normalized Gaussian wave packet exp(-(x-x0)^2/(4 w^2)) e^{i k0 x}.

    Defaults put the packet in the left half of the tube (x0 = 11*N*b/32)
    with width w = N*b/8: narrow enough to distinguish apparatus positions,
    wide enough that the momentum spread 1/(2w) stays small against the
    charge dynamics (a tight packet back-acts on the measured system and
    freezes the charges out of the measured region).  Warns if more than 1%
    of the unclipped packet mass would fall outside hard walls.
    """
    n, b = params.n_points, params.lattice_spacing
    if center is None:
        center = 11.0 * n * b / 32.0
    if width is None:
        width = n * b / 8.0
    if width <= 0:
        raise ValueError("packet width must be > 0")
    x = params.positions
    amps = np.exp(-((x - center) ** 2) / (4.0 * width * width)) * np.exp(1j * momentum * x)
    if params.boundary is Boundary.HARD_WALL:
        pad = int(math.ceil(6.0 * width / b)) + 1
        x_ext = b * np.arange(-pad, n + pad)
        w_ext = np.exp(-((x_ext - center) ** 2) / (2.0 * width * width))
        outside = (w_ext[:pad].sum() + w_ext[-pad:].sum()) / w_ext.sum()
        if outside > 0.01:
            warnings.warn(
                f"{outside:.1%} of the packet mass is clipped by the hard walls",
                stacklevel=2,
            )
    return StateVector(particle_space(params, which), amps, normalize=True)


def uniform_state(params: ParticleParams, which: str = ENVIRONMENT) -> StateVector:
    """Completely position-delocalized state: every amplitude 1/sqrt(N)."""
    amps = np.full(params.n_points, 1.0 / math.sqrt(params.n_points))
    return StateVector(particle_space(params, which), amps)


def tripartite_space(n_sites: int, params: ParticleParams) -> CompositeSpace:
    """Schwinger sites first, then apparatus, then environment."""
    factors = [HilbertFactor(f"site{n}", 2) for n in range(1, n_sites + 1)]
    factors.append(HilbertFactor(APPARATUS, params.n_points))
    factors.append(HilbertFactor(ENVIRONMENT, params.n_points))
    return CompositeSpace(factors)


def build_h_sa(
    space: CompositeSpace,
    measured: OperatorExpr,
    params: ParticleParams,
    couplings: CouplingParams,
    g_sa: float | None = None,
) -> OperatorExpr:
    """g_sa * (calibrated measured density) x (apparatus momentum)."""
    g = couplings.g_sa if g_sa is None else g_sa
    a_ax = space.index_of(APPARATUS)
    p = momentum_matrix(params)
    terms = [
        (g * c, {**ops, (a_ax,): p}) for c, ops in measured.with_space(space).terms
    ]
    return OperatorExpr(space, terms, hermitian=True)


def build_h_ae(
    space: CompositeSpace, params: ParticleParams, couplings: CouplingParams
) -> OperatorExpr:
    """g_ae * V(x_A - x_E), diagonal in the joint position basis."""
    a_ax = space.index_of(APPARATUS)
    e_ax = space.index_of(ENVIRONMENT)
    v = gaussian_interaction(params, couplings)
    n = params.n_points
    terms = []
    for j in range(n):
        proj = np.zeros((n, n))
        proj[j, j] = 1.0
        terms.append((couplings.g_ae, {(a_ax,): proj, (e_ax,): np.diag(v[j])}))
    return OperatorExpr(space, terms, hermitian=True)


def build_full_hamiltonian(
    space: CompositeSpace,
    schwinger_ops: SchwingerOperators,
    measured: OperatorExpr,
    params: ParticleParams,
    couplings: CouplingParams,
    g_sa: float | None = None,
) -> OperatorExpr:
    """H = (H_S + H_SA) + H_A + H_E + H_AE on the tripartite space."""
    a_ax = space.index_of(APPARATUS)
    e_ax = space.index_of(ENVIRONMENT)
    h = schwinger_ops.hamiltonian.with_space(space)
    h = h + OperatorExpr(
        space,
        [(1.0, {(a_ax,): kinetic_matrix(params, params.mass_apparatus)})],
        hermitian=True,
    )
    h = h + OperatorExpr(
        space,
        [(1.0, {(e_ax,): kinetic_matrix(params, params.mass_environment)})],
        hermitian=True,
    )
    g = couplings.g_sa if g_sa is None else g_sa
    if g != 0.0:
        h = h + build_h_sa(space, measured, params, couplings, g_sa=g)
    if couplings.g_ae != 0.0:
        h = h + build_h_ae(space, params, couplings)
    return h
