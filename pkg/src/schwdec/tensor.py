"""Tensor-product Hilbert space bookkeeping and matrix-free operators.

States live on a ``CompositeSpace``: an ordered tuple of factors with
row-major (C-order) flattening, so ``amplitudes.reshape(space.dims)`` is the
natural tensor view.  Operators are sums of Kronecker terms.  Each term
carries a scalar coefficient and small dense blocks acting on disjoint groups
of *adjacent* factors; identity factors are implicit.  Application is
matrix-free: the full matrix is never materialized except by the explicit
``to_dense`` oracle helper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# to_dense is a test oracle; refuse to build matrices beyond this size.
MAX_DENSE_DIM = 4096

_INT_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class HilbertFactor:
    """One tensor factor: a label and a local dimension (>= 2)."""

    label: str
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"factor {self.label!r}: dim must be >= 2, got {self.dim}")


class CompositeSpace:
    """Ordered tensor product of Hilbert factors with index arithmetic."""

    def __init__(self, factors):
        factors = tuple(factors)
        if not factors:
            raise ValueError("composite space needs at least one factor")
        total = 1
        for f in factors:
            if not isinstance(f, HilbertFactor):
                raise TypeError("factors must be HilbertFactor instances")
            total *= f.dim
            if total > _INT_MAX:
                raise OverflowError("total dimension overflows the 64-bit index type")
        self.factors = factors
        self.dims = tuple(f.dim for f in factors)
        self.labels = tuple(f.label for f in factors)
        self.total_dim = total

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    def flat_index(self, multi) -> int:
        """Row-major flat index of a per-factor multi-index."""
        multi = tuple(multi)
        if len(multi) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} components, got {len(multi)}")
        idx = 0
        for m, d in zip(multi, self.dims):
            if not 0 <= m < d:
                raise IndexError(f"component {m} out of range for factor of dim {d}")
            idx = idx * d + m
        return idx

    def unflatten(self, flat: int) -> tuple:
        """Inverse of flat_index."""
        if not 0 <= flat < self.total_dim:
            raise IndexError(f"flat index {flat} out of range [0, {self.total_dim})")
        out = []
        for d in reversed(self.dims):
            out.append(flat % d)
            flat //= d
        return tuple(reversed(out))

    def index_of(self, label: str) -> int:
        """Position of the unique factor with the given label."""
        hits = [i for i, l in enumerate(self.labels) if l == label]
        if len(hits) != 1:
            raise KeyError(f"label {label!r} matches {len(hits)} factors")
        return hits[0]

    def axes_with_prefix(self, prefix: str) -> tuple:
        return tuple(i for i, l in enumerate(self.labels) if l.startswith(prefix))

    def __eq__(self, other):
        return isinstance(other, CompositeSpace) and self.factors == other.factors

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        return f"CompositeSpace(dims={self.dims}, total_dim={self.total_dim})"


def compose_space(factors) -> CompositeSpace:
    """Build a CompositeSpace, preserving the given factor order."""
    return CompositeSpace(factors)


class StateVector:
    """Complex amplitude vector over a CompositeSpace (row-major flat order)."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space: CompositeSpace, amplitudes, normalize: bool = False):
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != space.total_dim:
            raise ValueError(
                f"amplitude length {amps.size} != space dimension {space.total_dim}"
            )
        if normalize:
            n = np.linalg.norm(amps)
            if n == 0.0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / n
        self.space = space
        self.amplitudes = amps

    @classmethod
    def basis_state(cls, space: CompositeSpace, multi) -> "StateVector":
        amps = np.zeros(space.total_dim, dtype=np.complex128)
        amps[space.flat_index(multi)] = 1.0
        return cls(space, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.space, self.amplitudes, normalize=True)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)

    def copy(self) -> "StateVector":
        return StateVector(self.space, self.amplitudes.copy())

    def __repr__(self):
        return f"StateVector(dim={self.space.total_dim}, norm={self.norm:.6f})"


def kron_states(space: CompositeSpace, parts) -> StateVector:
    """Product state from per-factor-group vectors, in factor order.

    ``parts`` are flat vectors whose dimensions multiply to the space
    dimension and match consecutive factor groups from the left.
    """
    amps = np.ones(1, dtype=np.complex128)
    for p in parts:
        p = np.asarray(p, dtype=np.complex128).reshape(-1)
        amps = np.kron(amps, p)
    if amps.size != space.total_dim:
        raise ValueError("product of part dimensions does not match the space")
    return StateVector(space, amps)


def inner(phi: StateVector, psi: StateVector) -> complex:
    """Hermitian inner product <phi|psi> (conjugate-linear in phi)."""
    if phi.space != psi.space:
        raise ValueError("inner product requires matching spaces")
    return complex(np.vdot(phi.amplitudes, psi.amplitudes))


class _CompiledOp:
    """Apply plan: one fused diagonal plus groups of dense blocks.

    Terms whose blocks are all diagonal collapse into a single full-shape
    diagonal array.  Remaining terms are grouped by their dense part; the
    diagonal prefactors of merged terms accumulate into one broadcastable
    array, so e.g. a sum over sites of (diag) x (same dense block) costs a
    single elementwise multiply plus a single matmul per apply.
    """

    __slots__ = ("diag", "groups")

    def __init__(self, diag, groups):
        self.diag = diag
        self.groups = groups


def _broadcast_diag(vec: np.ndarray, axes, shape) -> np.ndarray:
    view = [1] * len(shape)
    for a in axes:
        view[a] = shape[a]
    return vec.reshape(view)


def _apply_block(tensor: np.ndarray, mat: np.ndarray, left: int, d: int, right: int) -> np.ndarray:
    """Apply a dense block on adjacent axes via one (batched) matmul."""
    shape = tensor.shape
    x = np.ascontiguousarray(tensor)
    if right == 1:
        # trailing block: a single GEMM instead of `left` batched products
        out = x.reshape(left, d) @ mat.T
    else:
        out = np.matmul(mat, x.reshape(left, d, right))
    return out.reshape(shape)


class OperatorExpr:
    """Hermitian-aware operator as a sum of Kronecker terms.

    terms: list of ``(coefficient, {axes: block})`` where ``axes`` is an int
    or a tuple of adjacent factor positions and ``block`` is the dense
    (prod-dim x prod-dim) matrix on that group.  Factors absent from the map
    carry implicit identities.
    """

    def __init__(self, space: CompositeSpace, terms, hermitian: bool = False):
        self.space = space
        self.hermitian = bool(hermitian)
        clean_terms = []
        for coeff, ops in terms:
            clean = {}
            seen = set()
            for axes, mat in ops.items():
                if isinstance(axes, (int, np.integer)):
                    axes = (int(axes),)
                axes = tuple(int(a) for a in axes)
                if axes != tuple(range(axes[0], axes[-1] + 1)):
                    raise ValueError(f"block axes {axes} must be adjacent and ascending")
                for a in axes:
                    if not 0 <= a < space.n_factors:
                        raise ValueError(f"axis {a} out of range")
                    if a in seen:
                        raise ValueError(f"axis {a} used twice in one term")
                    seen.add(a)
                d = int(np.prod([space.dims[a] for a in axes], dtype=np.int64))
                mat = np.asarray(mat, dtype=np.complex128)
                if mat.shape != (d, d):
                    raise ValueError(f"block on axes {axes} must have shape {(d, d)}")
                clean[axes] = mat
            clean_terms.append((complex(coeff), clean))
        self.terms = clean_terms
        self._compiled = None

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        if self.space != other.space:
            raise ValueError("cannot add operators on different spaces")
        return OperatorExpr(
            self.space, self.terms + other.terms, self.hermitian and other.hermitian
        )

    def __mul__(self, scalar) -> "OperatorExpr":
        s = complex(scalar)
        herm = self.hermitian and s.imag == 0.0
        return OperatorExpr(
            self.space, [(s * c, ops) for c, ops in self.terms], herm
        )

    __rmul__ = __mul__

    def dagger(self) -> "OperatorExpr":
        terms = [
            (np.conj(c), {ax: m.conj().T for ax, m in ops.items()})
            for c, ops in self.terms
        ]
        return OperatorExpr(self.space, terms, self.hermitian)

    @classmethod
    def identity(cls, space: CompositeSpace, coeff=1.0) -> "OperatorExpr":
        return cls(space, [(coeff, {})], hermitian=complex(coeff).imag == 0.0)

    def with_space(self, space: CompositeSpace) -> "OperatorExpr":
        """Reinterpret the same terms on a larger space with matching leading dims."""
        for _, ops in self.terms:
            for axes in ops:
                for a in axes:
                    if a >= space.n_factors or space.dims[a] != self.space.dims[a]:
                        raise ValueError("target space incompatible at axis %d" % a)
        return OperatorExpr(space, self.terms, self.hermitian)

    # -- application -------------------------------------------------------

    def _compile(self) -> _CompiledOp:
        shape = self.space.dims
        diag = None
        groups = {}
        order = []
        for coeff, ops in self.terms:
            diag_pref = complex(coeff)
            dense_ops = []
            for axes in sorted(ops):
                mat = ops[axes]
                off = mat - np.diag(np.diagonal(mat))
                if not off.any():
                    diag_pref = diag_pref * _broadcast_diag(
                        np.ascontiguousarray(np.diagonal(mat)), axes, shape
                    )
                else:
                    dense_ops.append((axes, mat))
            if not dense_ops:
                diag = diag_pref if diag is None else diag + diag_pref
            else:
                key = tuple((axes, mat.tobytes()) for axes, mat in dense_ops)
                if key in groups:
                    groups[key][0] = groups[key][0] + diag_pref
                else:
                    groups[key] = [diag_pref, dense_ops]
                    order.append(key)
        if diag is not None and not np.isscalar(diag):
            diag = np.ascontiguousarray(np.broadcast_to(diag, shape))
        plans = []
        for k in order:
            pref, dense_ops = groups[k]
            if np.isscalar(pref):
                # fold scalar prefactors into the first block: saves one
                # full-size elementwise multiply per group per apply
                first_axes, first_mat = dense_ops[0]
                dense_ops = [(first_axes, pref * first_mat)] + dense_ops[1:]
                pref = None
            planned = []
            for axes, mat in dense_ops:
                d = mat.shape[0]
                left = int(np.prod(shape[: axes[0]], dtype=np.int64))
                right = int(np.prod(shape[axes[-1] + 1 :], dtype=np.int64))
                planned.append((mat, left, d, right))
            plans.append((pref, planned))
        return _CompiledOp(diag, plans)

    def matvec(self, flat: np.ndarray) -> np.ndarray:
        """Matrix-free product on a flat amplitude array."""
        if self._compiled is None:
            self._compiled = self._compile()
        comp = self._compiled
        amps = flat.reshape(self.space.dims)
        out = None
        if comp.diag is not None:
            out = comp.diag * amps
        for pref, dense_ops in comp.groups:
            cur = amps if pref is None else amps * pref
            for mat, left, d, right in dense_ops:
                cur = _apply_block(cur, mat, left, d, right)
            if out is None:
                out = cur
            else:
                np.add(out, cur, out=out)
        if out is None:
            out = np.zeros_like(amps)
        return out.reshape(-1)

    def apply(self, psi: StateVector) -> StateVector:
        """Return O|psi> (unnormalized)."""
        if psi.space != self.space:
            raise ValueError("operator and state live on different spaces")
        return StateVector(self.space, self.matvec(psi.amplitudes))

    def expectation(self, psi: StateVector):
        """<psi|O|psi>; real (with the imaginary part checked) if Hermitian."""
        if psi.space != self.space:
            raise ValueError("operator and state live on different spaces")
        val = complex(np.vdot(psi.amplitudes, self.matvec(psi.amplitudes)))
        if self.hermitian:
            # a large imaginary part means the operator was assembled wrong
            if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
                raise FloatingPointError(
                    f"hermitian expectation has imaginary part {val.imag:.3e}"
                )
            return val.real
        return val

    # -- oracle ------------------------------------------------------------

    def to_dense(self, max_dim: int = MAX_DENSE_DIM) -> np.ndarray:
        """Materialize the full matrix (test oracle; small spaces only)."""
        n = self.space.total_dim
        if n > max_dim:
            raise ValueError(f"refusing to densify dim {n} > {max_dim}")
        h = np.zeros((n, n), dtype=np.complex128)
        for coeff, ops in self.terms:
            start = {axes[0]: axes for axes in ops}
            block = np.array([[coeff]], dtype=np.complex128)
            i = 0
            while i < self.space.n_factors:
                if i in start:
                    axes = start[i]
                    block = np.kron(block, ops[axes])
                    i = axes[-1] + 1
                else:
                    block = np.kron(block, np.eye(self.space.dims[i]))
                    i += 1
            h += block
        return h

    def __repr__(self):
        return (
            f"OperatorExpr(dim={self.space.total_dim}, n_terms={len(self.terms)}, "
            f"hermitian={self.hermitian})"
        )


def hermiticity_defect(op: OperatorExpr, seed: int = 0, n_pairs: int = 4) -> float:
    """Max relative |<phi|O psi> - conj(<psi|O phi>)| over random vector pairs."""
    rng = np.random.default_rng(seed)
    n = op.space.total_dim
    worst = 0.0
    for _ in range(n_pairs):
        phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        phi /= np.linalg.norm(phi)
        psi /= np.linalg.norm(psi)
        a = np.vdot(phi, op.matvec(psi))
        b = np.vdot(psi, op.matvec(phi))
        scale = max(1.0, abs(a), abs(b))
        worst = max(worst, abs(a - np.conj(b)) / scale)
    return worst
