"""Lanczos kernels: Krylov propagation of exp(-i*H*dt) and lowest eigenpairs.

Both routines are matrix-free; they only need a ``matvec`` closure for a
Hermitian operator.  The propagator uses the plain three-term recurrence
(each step restarts from a fresh vector, so orthogonality loss is benign);
the ground-state solver reorthogonalizes fully and restarts from the Ritz
vector until the residual converges.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal


class KrylovError(RuntimeError):
    pass


def _expm_tridiag_e1(alphas, betas, dt: float) -> np.ndarray:
    """First column of exp(-1j*dt*T) for the real symmetric tridiagonal T."""
    if len(alphas) == 1:
        return np.exp(-1j * dt * np.array([alphas[0]]))
    w, q = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
    return q @ (np.exp(-1j * dt * w) * q[0, :])


def expm_apply(matvec, v: np.ndarray, dt: float, max_dim: int, tol: float):
    """Approximate exp(-1j*dt*H) v in a Lanczos-Krylov subspace.

    Returns ``(w, err_est, m)`` where ``err_est`` is the standard defect
    estimate ``|dt| * beta_{m+1} * |y_m|``; the caller decides whether to
    accept or subdivide the step.  Early Lanczos breakdown means the Krylov
    space is an exact invariant subspace, so the result is exact.
    """
    n = v.size
    max_dim = min(max_dim, n)
    nrm = float(np.sqrt(np.vdot(v, v).real))
    if nrm == 0.0:
        raise KrylovError("cannot propagate the zero vector")
    basis = np.empty((max_dim, n), dtype=np.complex128)
    basis[0] = v / nrm
    alphas, betas = [], []
    w = matvec(basis[0])
    a = np.vdot(basis[0], w).real
    w = w - a * basis[0]
    alphas.append(a)
    scale = max(1.0, abs(a))
    m = 1
    while True:
        b = float(np.sqrt(np.vdot(w, w).real))
        y = _expm_tridiag_e1(alphas, betas, dt)
        if b <= 1e-13 * scale:
            err = 0.0  # invariant subspace: exact
            break
        err = abs(dt) * b * abs(y[-1])
        if err < tol or m >= max_dim:
            break
        basis[m] = w / b
        betas.append(b)
        w = matvec(basis[m]) - b * basis[m - 1]
        a = np.vdot(basis[m], w).real
        w = w - a * basis[m]
        alphas.append(a)
        scale = max(scale, abs(a), b)
        m += 1
    if m == 1:
        # v spans an invariant subspace: the result is an exact phase on v
        return v * complex(np.exp(-1j * dt * alphas[0])), err, m
    out = (y * nrm) @ basis[:m]
    return out, err, m


def lowest_eigenpair(
    matvec,
    dim: int,
    seed: int = 0,
    tol: float = 1e-10,
    block_size: int = 40,
    max_restarts: int = 500,
):
    """Lowest eigenpair of a Hermitian operator by restarted Lanczos.

    Deterministic for a fixed seed (the seed generates the start vector).
    Returns ``(value, vector, ritz_history)`` where ``ritz_history`` holds
    the lowest Ritz value after each Lanczos iteration of the first sweep
    (non-increasing, by the variational principle).

    Raises KrylovError if the residual does not reach ``tol``.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    m = min(block_size, dim)
    history = []
    for sweep in range(max_restarts):
        basis = np.empty((m, dim), dtype=np.complex128)
        basis[0] = v
        alphas, betas = [], []
        k = 0
        for j in range(m):
            w = matvec(basis[j])
            a = np.vdot(basis[j], w).real
            w = w - a * basis[j]
            if j > 0:
                w = w - betas[-1] * basis[j - 1]
            # full reorthogonalization keeps the basis clean across many sweeps
            w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            alphas.append(a)
            k = j + 1
            if sweep == 0:
                if k == 1:
                    history.append(a)
                else:
                    wv = eigh_tridiagonal(
                        np.asarray(alphas), np.asarray(betas), eigvals_only=True
                    )
                    history.append(float(wv[0]))
            b = float(np.linalg.norm(w))
            if b <= 1e-13 * max(1.0, max(map(abs, alphas))):
                break  # exact invariant subspace
            if j + 1 < m:
                basis[j + 1] = w / b
                betas.append(b)
        if k == 1:
            theta, ritz = alphas[0], basis[0]
        else:
            wv, qv = eigh_tridiagonal(np.asarray(alphas[:k]), np.asarray(betas[: k - 1]))
            theta = float(wv[0])
            ritz = qv[:, 0] @ basis[:k]
        ritz = ritz / np.linalg.norm(ritz)
        resid = float(np.linalg.norm(matvec(ritz) - theta * ritz))
        if resid < tol:
            return float(theta), ritz, history
        v = ritz
    raise KrylovError(
        f"Lanczos did not converge to residual {tol:.1e} in {max_restarts} sweeps "
        f"(last residual {resid:.3e})"
    )
