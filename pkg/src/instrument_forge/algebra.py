"""
Finite-dimensional von Neumann algebras in block form.

Every von Neumann algebra acting on C^D is unitarily equivalent to

    M = W^dag ( (+)_i  M_{n_i} (x) 1_{m_i} ) W,     D = sum_i n_i * m_i,

where ``n_i`` is the dimension of the i-th type I factor, ``m_i`` its
multiplicity, and ``W`` a unitary basis change. Inside block i the
coordinates are ordered as C^{n_i} (x) C^{m_i} (row-major, factor index
first). With this convention commutants, the trace-preserving conditional
expectation and the Hilbert-Schmidt projection onto M are all closed form.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, NonUnitaryBasisChange

UNITARY_TOL = 1e-10
MEMBER_TOL = 1e-9
STATE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BlockAlgebra:
    """A concrete algebra ``W^dag ((+) M_n (x) 1_m) W`` on C^D.

    Build instances with :func:`make_block_algebra`, which validates.
    """

    blocks: Tuple[Tuple[int, int], ...]
    basis_change: np.ndarray

    @property
    def dim(self) -> int:
        """Ambient Hilbert-space dimension D."""
        return self.basis_change.shape[0]

    @property
    def algebra_dim(self) -> int:
        """Linear dimension of the algebra, sum of n_i^2."""
        return sum(n * n for n, _ in self.blocks)

    @property
    def offsets(self) -> Tuple[int, ...]:
        out, pos = [], 0
        for n, m in self.blocks:
            out.append(pos)
            pos += n * m
        return tuple(out)

    @property
    def is_full(self) -> bool:
        """True when the algebra is all of B(C^D)."""
        return len(self.blocks) == 1 and self.blocks[0][1] == 1

    def __repr__(self):
        return f"BlockAlgebra(blocks={list(self.blocks)}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Element of a :class:`BlockAlgebra` given by its per-block coefficients."""

    algebra: BlockAlgebra
    coeffs: Tuple[np.ndarray, ...]

    def matrix(self) -> np.ndarray:
        return embed(self)

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(c.conj().T for c in self.coeffs))

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        if not same_algebra(self.algebra, other.algebra):
            raise DimensionMismatch("elements belong to different algebras")
        return AlgebraElement(
            self.algebra, tuple(a @ b for a, b in zip(self.coeffs, other.coeffs))
        )


@dataclass(frozen=True, eq=False)
class NormalState:
    """Density matrix on C^D; pairs with operators through ``tr(rho X)``."""

    density: np.ndarray

    @property
    def dim(self) -> int:
        return self.density.shape[0]

    def expectation(self, x: np.ndarray) -> complex:
        return np.trace(self.density @ x)


@dataclass(frozen=True, eq=False)
class RestrictedState:
    """A normal state restricted to a block algebra.

    ``blocks[i]`` is the reduced density on the i-th factor, so the state
    evaluates an element with coefficients ``c`` as ``sum_i tr(blocks[i] c_i)``.
    """

    algebra: BlockAlgebra
    blocks: Tuple[np.ndarray, ...]

    def __call__(self, element) -> complex:
        if not isinstance(element, AlgebraElement):
            element = conditional_expectation(self.algebra, element)
        return sum(np.trace(h @ c) for h, c in zip(self.blocks, element.coeffs))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _as_square(x, dim: int, what: str = "matrix") -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (dim, dim):
        raise DimensionMismatch(f"{what} has shape {x.shape}, expected {(dim, dim)}")
    return x


def make_block_algebra(blocks: Sequence[Tuple[int, int]], basis_change=None) -> BlockAlgebra:
    """Construct a validated :class:`BlockAlgebra`.

    Parameters
    ----------
    blocks : sequence of (n, m)
        Factor dimension and multiplicity for each summand.
    basis_change : array_like, optional
        Unitary W of size D x D; identity when omitted.
    """
    blocks = tuple((int(n), int(m)) for n, m in blocks)
    if not blocks:
        raise DimensionMismatch("an algebra needs at least one block")
    if any(n < 1 or m < 1 for n, m in blocks):
        raise DimensionMismatch(f"block sizes must be positive, got {list(blocks)}")
    dim = sum(n * m for n, m in blocks)
    if basis_change is None:
        w = np.eye(dim, dtype=complex)
    else:
        w = np.asarray(basis_change, dtype=complex)
        if w.shape != (dim, dim):
            raise DimensionMismatch(
                f"basis change has shape {w.shape} but blocks give D={dim}"
            )
        err = np.abs(w @ w.conj().T - np.eye(dim)).max()
        if err > UNITARY_TOL:
            raise NonUnitaryBasisChange(f"W W^dag deviates from identity by {err:.3g}")
    return BlockAlgebra(blocks, _readonly(w))


def full_algebra(dim: int) -> BlockAlgebra:
    return make_block_algebra([(dim, 1)])


def diagonal_algebra(dim: int) -> BlockAlgebra:
    return make_block_algebra([(1, 1)] * dim)


def same_algebra(a: BlockAlgebra, b: BlockAlgebra, tol: float = UNITARY_TOL) -> bool:
    if a is b:
        return True
    if a.blocks != b.blocks:
        return False
    return bool(np.abs(a.basis_change - b.basis_change).max() <= tol)


def element(algebra: BlockAlgebra, coeffs: Sequence) -> AlgebraElement:
    coeffs = tuple(np.asarray(c, dtype=complex) for c in coeffs)
    if len(coeffs) != len(algebra.blocks):
        raise DimensionMismatch(
            f"{len(coeffs)} coefficient blocks for an algebra with {len(algebra.blocks)}"
        )
    for c, (n, _) in zip(coeffs, algebra.blocks):
        if c.shape != (n, n):
            raise DimensionMismatch(f"coefficient of shape {c.shape}, expected {(n, n)}")
    return AlgebraElement(algebra, coeffs)


def identity(algebra: BlockAlgebra) -> AlgebraElement:
    return element(algebra, [np.eye(n) for n, _ in algebra.blocks])


def embed(el: AlgebraElement) -> np.ndarray:
    """Global D x D matrix ``W^dag ((+) c_i (x) 1_{m_i}) W`` of an element."""
    alg = el.algebra
    if len(el.coeffs) != len(alg.blocks):
        raise DimensionMismatch("coefficient count does not match the block count")
    y = np.zeros((alg.dim, alg.dim), dtype=complex)
    for c, (n, m), off in zip(el.coeffs, alg.blocks, alg.offsets):
        if np.shape(c) != (n, n):
            raise DimensionMismatch(f"coefficient of shape {np.shape(c)}, expected {(n, n)}")
        y[off:off + n * m, off:off + n * m] = np.kron(c, np.eye(m))
    w = alg.basis_change
    return w.conj().T @ y @ w


def _block_view(algebra: BlockAlgebra, x: np.ndarray):
    y = algebra.basis_change @ x @ algebra.basis_change.conj().T
    for (n, m), off in zip(algebra.blocks, algebra.offsets):
        yield n, m, y[off:off + n * m, off:off + n * m].reshape(n, m, n, m)


def conditional_expectation(algebra: BlockAlgebra, x) -> AlgebraElement:
    """Trace-preserving conditional expectation of ``x`` onto the algebra.

    Compresses to the diagonal blocks and takes the normalized partial trace
    over each multiplicity factor. This is also the Hilbert-Schmidt
    orthogonal projection onto the algebra.
    """
    x = _as_square(x, algebra.dim)
    coeffs = tuple(np.einsum("ajbj->ab", blk) / m for n, m, blk in _block_view(algebra, x))
    return AlgebraElement(algebra, coeffs)


def project(algebra: BlockAlgebra, x) -> np.ndarray:
    """Hilbert-Schmidt projection of ``x`` onto the algebra, as a matrix."""
    return embed(conditional_expectation(algebra, x))


def is_member(x, algebra: BlockAlgebra, tol: float = MEMBER_TOL) -> Tuple[bool, float]:
    """Test ``x`` in algebra; returns ``(ok, residual)`` with the HS distance."""
    x = _as_square(x, algebra.dim)
    residual = float(np.linalg.norm(x - project(algebra, x)))
    return residual < tol, residual


def basis(algebra: BlockAlgebra) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of the algebra, shape (dim_M, D, D).

    Elements are embedded matrix units scaled by ``1/sqrt(m_i)``.
    """
    out = []
    for i, (n, m) in enumerate(algebra.blocks):
        for a in range(n):
            for b in range(n):
                coeffs = [np.zeros((k, k)) for k, _ in algebra.blocks]
                coeffs[i][a, b] = 1.0 / np.sqrt(m)
                out.append(embed(AlgebraElement(algebra, tuple(coeffs))))
    return np.array(out)


def _swap_permutation(n: int, m: int) -> np.ndarray:
    """Indices ``p`` with ``(S v) = v[p]`` mapping C^n (x) C^m to C^m (x) C^n."""
    return np.arange(n * m).reshape(n, m).T.reshape(-1)


def commutant(algebra: BlockAlgebra) -> BlockAlgebra:
    """Commutant ``(+) 1_{n_i} (x) M_{m_i}``, re-expressed in block form.

    The blocks become (m_i, n_i); the basis change picks up the tensor-swap
    inside each block so that the coefficient factor comes first again.
    """
    perm = []
    for (n, m), off in zip(algebra.blocks, algebra.offsets):
        perm.extend(off + _swap_permutation(n, m))
    w = algebra.basis_change[np.array(perm)]
    return BlockAlgebra(tuple((m, n) for n, m in algebra.blocks), _readonly(w))


def tensor(alg_a: BlockAlgebra, alg_b: BlockAlgebra) -> BlockAlgebra:
    """Tensor product algebra on C^{D_A} (x) C^{D_B}.

    Blocks are all pairs ``(n_i n_j, m_i m_j)``, A-block index major.
    """
    db = alg_b.dim
    blocks, perm = [], []
    for (na, ma), oa in zip(alg_a.blocks, alg_a.offsets):
        for (nb, mb), ob in zip(alg_b.blocks, alg_b.offsets):
            blocks.append((na * nb, ma * mb))
            # new order within the block: (a, c) factor, (b, e) multiplicity
            a, c, b, e = np.meshgrid(
                np.arange(na), np.arange(nb), np.arange(ma), np.arange(mb), indexing="ij"
            )
            old = (oa + a * ma + b) * db + (ob + c * mb + e)
            perm.extend(old.reshape(-1))
    w = np.kron(alg_a.basis_change, alg_b.basis_change)[np.array(perm)]
    return BlockAlgebra(tuple(blocks), _readonly(w))


def make_state(density, tol: float = STATE_TOL) -> NormalState:
    """Validate a density matrix and wrap it as a :class:`NormalState`."""
    rho = np.asarray(density, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density has non-finite entries")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > tol:
        raise ValueError(f"density is not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density has trace {tr:.12g}, expected 1")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    if lo < -tol:
        raise ValueError(f"density has negative eigenvalue {lo:.3g}")
    return NormalState(_readonly(rho))


def pure_state(vector) -> NormalState:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return NormalState(_readonly(np.outer(v, v.conj())))


def density_of(state) -> np.ndarray:
    """Density matrix of a :class:`NormalState` or a raw array."""
    if isinstance(state, NormalState):
        return state.density
    return np.asarray(state, dtype=complex)


def restrict_state(state, algebra: BlockAlgebra) -> RestrictedState:
    """Restriction of a normal state to the algebra, in block coordinates.

    Each block is the multiplicity-traced compression ``tr_m(P_i W rho W^dag P_i)``.
    """
    rho = _as_square(density_of(state), algebra.dim, "density")
    blocks = tuple(np.einsum("ajbj->ab", blk) for _, _, blk in _block_view(algebra, rho))
    return RestrictedState(algebra, blocks)
