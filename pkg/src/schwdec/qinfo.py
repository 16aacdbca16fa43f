"""Density-matrix kernels: partial trace, entropy, fidelity, Bures distance.

A reduced density matrix of a pure state is held as its Gram factor B with
rho = B B-dagger (B is just the kept-vs-traced reshape of the state), so
Hermiticity and positivity hold by construction and the rank is bounded by
the traced dimension.  Fidelity between two factored matrices uses the
nuclear-norm identity Fid = ||A^dag B||_tr^2, which avoids any large
eigendecomposition; the dense route (eigendecompositions with clipping, as
the definition states) is used for plain matrices and as the cross-check.
Dense eigendecomposition of the biggest kept space is the scaling ceiling.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import CompositeSpace, StateVector

EIG_CLIP = 1e-14  # eigenvalues below this are treated as traced-out noise


class DensityMatrix:
    """Hermitian PSD unit-trace matrix on a subset of factors.

    ``axes``/``dims`` identify the kept factors (in their original order);
    the matrix is materialized lazily from the Gram factor when needed.
    """

    def __init__(self, axes, dims, matrix=None, factor=None):
        self.axes = tuple(axes)
        self.dims = tuple(dims)
        self.dim = int(np.prod(self.dims, dtype=np.int64))
        if (matrix is None) == (factor is None):
            raise ValueError("provide exactly one of matrix, factor")
        self._matrix = None if matrix is None else np.asarray(matrix, dtype=np.complex128)
        self.factor = None if factor is None else np.asarray(factor, dtype=np.complex128)
        if self._matrix is not None and self._matrix.shape != (self.dim, self.dim):
            raise ValueError("matrix shape does not match kept dims")
        if self.factor is not None and self.factor.shape[0] != self.dim:
            raise ValueError("factor row count does not match kept dims")

    @classmethod
    def from_factor(cls, axes, dims, factor) -> "DensityMatrix":
        """Build from a Gram factor; densify when the factor saves nothing."""
        factor = np.asarray(factor, dtype=np.complex128)
        dim = int(np.prod(dims, dtype=np.int64))
        if factor.shape[1] >= dim:
            return cls(axes, dims, matrix=factor @ factor.conj().T)
        return cls(axes, dims, factor=factor)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.factor @ self.factor.conj().T
        return self._matrix

    @property
    def trace(self) -> float:
        if self.factor is not None and self._matrix is None:
            return float(np.sum(np.abs(self.factor) ** 2))
        return float(np.trace(self.matrix).real)

    def compatible_with(self, other: "DensityMatrix") -> bool:
        return self.axes == other.axes and self.dims == other.dims

    def validate(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol:
            raise ValueError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise ValueError("density matrix has a significant negative eigenvalue")


def mix(parts, weights) -> DensityMatrix:
    """Convex mixture; stays factored when every part is factored."""
    parts = list(parts)
    weights = [float(w) for w in weights]
    if len(parts) != len(weights) or not parts:
        raise ValueError("need matching, nonempty parts and weights")
    if abs(sum(weights) - 1.0) > 1e-12:
        raise ValueError("mixture weights must sum to 1")
    first = parts[0]
    for p in parts[1:]:
        if not p.compatible_with(first):
            raise ValueError("mixture parts live on different kept factors")
    if all(p.factor is not None for p in parts):
        blocks = [math.sqrt(w) * p.factor for p, w in zip(parts, weights)]
        return DensityMatrix.from_factor(first.axes, first.dims, np.hstack(blocks))
    m = sum(w * p.matrix for p, w in zip(parts, weights))
    return DensityMatrix(first.axes, first.dims, matrix=m)


def partial_trace(psi: StateVector, keep) -> DensityMatrix:
    """Trace a pure state down to the kept factors (arbitrary subset).

    rho[(i),(j)] = sum_k psi[(i,k)] conj(psi[(j,k)]) with kept indices in
    their original factor order.
    """
    keep = tuple(sorted(set(int(a) for a in keep)))
    n = psi.space.n_factors
    if not keep:
        raise ValueError("keep set is empty")
    if any(a < 0 or a >= n for a in keep):
        raise ValueError("keep axis out of range")
    if len(keep) == n:
        raise ValueError("keep set must be a proper subset (nothing to trace)")
    traced = tuple(a for a in range(n) if a not in keep)
    dims = tuple(psi.space.dims[a] for a in keep)
    keep_dim = int(np.prod(dims, dtype=np.int64))
    tensor = psi.tensor_view().transpose(keep + traced)
    factor = tensor.reshape(keep_dim, -1)
    return DensityMatrix.from_factor(keep, dims, factor)


def _clipped_spectrum(rho: DensityMatrix) -> np.ndarray:
    if rho.factor is not None and rho._matrix is None:
        b = rho.factor
        gram = b.conj().T @ b  # same nonzero spectrum as B B^dag
        lam = np.linalg.eigvalsh(gram)
    else:
        lam = np.linalg.eigvalsh(rho.matrix)
    return np.clip(lam, 0.0, None)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S = -sum lam ln lam (natural log), with 0 ln 0 := 0."""
    lam = _clipped_spectrum(rho)
    lam = lam[lam > EIG_CLIP]
    if lam.size == 0:
        return 0.0
    return float(-np.sum(lam * np.log(lam)))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    lam, u = np.linalg.eigh(m)
    lam[lam < EIG_CLIP] = 0.0  # noise below the clip would surface as sqrt(eps)
    return (u * np.sqrt(lam)) @ u.conj().T


def _fidelity_one_way(m1: np.ndarray, m2: np.ndarray) -> float:
    s1 = _psd_sqrt(m1)
    mid = s1 @ m2 @ s1
    mid = (mid + mid.conj().T) / 2.0  # roundoff guard before the spectrum
    mu = np.linalg.eigvalsh(mid)
    mu[mu < EIG_CLIP] = 0.0
    return float(np.sum(np.sqrt(mu)) ** 2)


def fidelity(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """Uhlmann fidelity Fid = (Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2 in [0, 1]."""
    if not rho1.compatible_with(rho2):
        raise ValueError("fidelity requires matching kept factors")
    if rho1.factor is not None and rho2.factor is not None:
        overlap = rho1.factor.conj().T @ rho2.factor
        s = np.linalg.svd(overlap, compute_uv=False)
        return float(np.clip(s.sum() ** 2, 0.0, 1.0))
    f12 = _fidelity_one_way(rho1.matrix, rho2.matrix)
    f21 = _fidelity_one_way(rho2.matrix, rho1.matrix)
    f = (f12 + f21) / 2.0 if abs(f12 - f21) > 1e-9 else f12
    return float(np.clip(f, 0.0, 1.0))


def bures_distance(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """d_B = sqrt(1 - sqrt(Fid)); 0 iff equal, 1 on orthogonal supports."""
    return math.sqrt(max(0.0, 1.0 - math.sqrt(fidelity(rho1, rho2))))


def haar_random_state(space: CompositeSpace, seed: int) -> StateVector:
    """Haar-random state: normalized vector of iid complex Gaussians."""
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(space.total_dim) + 1j * rng.standard_normal(space.total_dim)
    return StateVector(space, amps, normalize=True)


def random_density_matrix(space: CompositeSpace, keep, seed: int) -> DensityMatrix:
    """Trace a Haar-random pure state down to the kept factors."""
    return partial_trace(haar_random_state(space, seed), keep)


def marginal_distribution(psi: StateVector, axis: int) -> np.ndarray:
    """Position distribution on one factor: diagonal of its reduced matrix."""
    prob = np.abs(psi.tensor_view()) ** 2
    other = tuple(a for a in range(psi.space.n_factors) if a != axis)
    return prob.sum(axis=other)
