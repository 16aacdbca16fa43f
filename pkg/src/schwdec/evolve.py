"""Schroedinger time evolution via Krylov propagation, plus a dense oracle.

``evolve_step`` advances one time step with an adaptive Lanczos-Krylov
approximation of exp(-i H dt); if the per-step truncation estimate exceeds
the tolerance the step is halved internally.  ``DenseEvolver`` evolves by
full eigendecomposition and serves as the correctness oracle on small spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import krylov
from .tensor import OperatorExpr, StateVector

_MAX_HALVINGS = 40


class EvolutionError(RuntimeError):
    pass


@dataclass
class EvolutionParams:
    dt: float = 0.1
    t_max: float = 120.0
    krylov_dim: int = 30
    tol: float = 1e-12
    record_every: int = 3

    def validate(self, prefix: str = "evolution") -> None:
        if self.dt <= 0:
            raise ValueError(f"{prefix}.dt: must be > 0")
        if self.t_max <= 0:
            raise ValueError(f"{prefix}.t_max: must be > 0")
        if self.krylov_dim < 4:
            raise ValueError(f"{prefix}.krylov_dim: must be >= 4")
        if self.tol <= 0:
            raise ValueError(f"{prefix}.tol: must be > 0")
        if self.record_every < 1:
            raise ValueError(f"{prefix}.record_every: must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_max / self.dt)))


@dataclass
class TrajectoryRecord:
    """Aligned time series produced by an experiment driver."""

    times: np.ndarray
    series: dict = field(default_factory=dict)
    index_name: str = "t"
    snapshots: list | None = None

    def __post_init__(self):
        for label, values in self.series.items():
            if len(values) != len(self.times):
                raise ValueError(f"series {label!r} length mismatch")

    def column_labels(self) -> list:
        return list(self.series)


def _substep(h: OperatorExpr, flat: np.ndarray, dt: float, params: EvolutionParams, depth: int) -> np.ndarray:
    out, err, _ = krylov.expm_apply(h.matvec, flat, dt, params.krylov_dim, params.tol)
    if err <= params.tol:
        return out
    if depth >= _MAX_HALVINGS:
        raise EvolutionError(
            f"Krylov step did not reach tol={params.tol:.1e} after "
            f"{_MAX_HALVINGS} halvings (err={err:.1e}); increase krylov_dim"
        )
    half = _substep(h, flat, dt / 2.0, params, depth + 1)
    return _substep(h, half, dt / 2.0, params, depth + 1)


def evolve_step(h: OperatorExpr, psi: StateVector, dt: float, params: EvolutionParams) -> StateVector:
    """psi(t+dt) = exp(-i H dt) psi(t); renormalizes if drift is tiny, errors otherwise."""
    if not h.hermitian:
        raise ValueError("evolution requires a Hermitian Hamiltonian")
    if psi.space != h.space:
        raise ValueError("state and Hamiltonian live on different spaces")
    out = _substep(h, psi.amplitudes, dt, params, 0)
    nrm = float(np.linalg.norm(out))
    drift = abs(nrm - 1.0)
    if drift > 1e-8:
        raise EvolutionError(
            f"norm drift {drift:.3e} in one step; krylov_dim too small or dt too large"
        )
    return StateVector(h.space, out / nrm)


def iterate_checkpoints(h: OperatorExpr, psi0: StateVector, params: EvolutionParams):
    """Yield (t, psi) at t=0 and then every record_every steps."""
    params.validate()
    psi = psi0
    yield 0.0, psi
    n_steps = params.n_steps
    for step in range(1, n_steps + 1):
        psi = evolve_step(h, psi, params.dt, params)
        if step % params.record_every == 0 or step == n_steps:
            yield step * params.dt, psi


def evolve_trajectory(
    h: OperatorExpr,
    psi0: StateVector,
    params: EvolutionParams,
    observables: dict | None = None,
    callbacks: dict | None = None,
    store_snapshots: bool = False,
) -> TrajectoryRecord:
    """Record norm, energy and named observables along the evolution.

    ``observables`` maps labels to OperatorExpr; ``callbacks`` maps labels to
    functions ``f(t, psi) -> float | dict[str, float]`` for diagnostics that
    are not plain expectation values.
    """
    observables = observables or {}
    callbacks = callbacks or {}
    times, rows = [], []
    snaps = [] if store_snapshots else None
    for t, psi in iterate_checkpoints(h, psi0, params):
        row = {"norm": psi.norm, "energy": h.expectation(psi)}
        for label, op in observables.items():
            row[label] = op.expectation(psi)
        for label, fn in callbacks.items():
            val = fn(t, psi)
            if isinstance(val, dict):
                row.update(val)
            else:
                row[label] = float(val)
        times.append(t)
        rows.append(row)
        if snaps is not None:
            snaps.append((t, psi))
    series = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    return TrajectoryRecord(np.array(times), series, snapshots=snaps)


class DenseEvolver:
    """Exact evolution by dense eigendecomposition (oracle, dim <= 4096)."""

    def __init__(self, h: OperatorExpr, max_dim: int = 4096):
        if h.space.total_dim > max_dim:
            raise ValueError(f"dense oracle limited to dim {max_dim}")
        dense = h.to_dense(max_dim)
        self.space = h.space
        self.eigvals, self.eigvecs = np.linalg.eigh(dense)

    def evolve(self, psi: StateVector, t: float) -> StateVector:
        if psi.space != self.space:
            raise ValueError("state lives on a different space")
        coeff = self.eigvecs.conj().T @ psi.amplitudes
        out = self.eigvecs @ (np.exp(-1j * t * self.eigvals) * coeff)
        return StateVector(self.space, out)


def exact_evolve(h: OperatorExpr, psi0: StateVector, t: float) -> StateVector:
    """One-shot exact evolution; reference for Krylov correctness."""
    return DenseEvolver(h).evolve(psi0, t)
