"""Random states, Kraus families and instruments for tests and demos."""
from typing import Optional, Union

import numpy as np

from . import algebra as alg
from . import instrument as ins
from .algebra import BlockAlgebra


def _rng(rng):
    return np.random.default_rng(rng)


def ginibre(shape, rng=None) -> np.ndarray:
    rng = _rng(rng)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_unitary(dim: int, rng=None) -> np.ndarray:
    """Haar-distributed unitary (QR of a Ginibre matrix with phase correction)."""
    q, r = np.linalg.qr(ginibre((dim, dim), rng))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rng=None, rank: Optional[int] = None) -> np.ndarray:
    g = ginibre((dim, rank or dim), rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_kraus(dim: int, count: int, rng=None) -> np.ndarray:
    """``count`` Kraus operators with ``sum K^dag K = 1`` (slices of a random isometry)."""
    q, _ = np.linalg.qr(ginibre((count * dim, dim), rng))
    return q.reshape(count, dim, dim)


def random_cp_map(dim: int, count: int, rng=None) -> np.ndarray:
    """Unnormalized Kraus family; generic rank ``min(count, dim^2)``."""
    return ginibre((count, dim, dim), rng) / np.sqrt(2 * dim)


def _lift(algebra: BlockAlgebra, k: np.ndarray):
    """Kraus family on C^D whose dual acts on the algebra as ``c -> pinch(k^dag c k)``.

    ``k`` acts on the abstract space ``(+)_i C^{n_i}``; the piece of k from
    block i to block j is tensored with ``|a><b| / sqrt(m_j)`` for every
    pair of multiplicity indices, which yields ``(k_ji^dag c_j k_ji) (x) 1_{m_i}``.
    """
    d = algebra.dim
    w = algebra.basis_change
    starts = np.cumsum([0] + [n for n, _ in algebra.blocks])
    out = []
    for i, ((ni, mi), oi) in enumerate(zip(algebra.blocks, algebra.offsets)):
        for j, ((nj, mj), oj) in enumerate(zip(algebra.blocks, algebra.offsets)):
            piece = k[starts[j]:starts[j] + nj, starts[i]:starts[i] + ni]
            if not np.any(piece):
                continue
            for a in range(mj):
                for b in range(mi):
                    unit = np.zeros((mj, mi))
                    unit[a, b] = 1.0 / np.sqrt(mj)
                    big = np.zeros((d, d), dtype=complex)
                    big[oj:oj + nj * mj, oi:oi + ni * mi] = np.kron(piece, unit)
                    out.append(w.conj().T @ big @ w)
    return out


def random_instrument(algebra: Union[BlockAlgebra, int], outcomes: int = 2, kraus: int = 1,
                      rng=None) -> ins.CPInstrument:
    """Random CP instrument with labels ``"0", "1", ...``.

    On a full algebra the Kraus operators are slices of a Haar-like random
    isometry. On a block algebra a random instrument on ``(+)_i C^{n_i}`` is
    pinched to the block diagonal and lifted through the multiplicities.
    """
    rng = _rng(rng)
    if isinstance(algebra, int):
        algebra = alg.full_algebra(algebra)
    labels = [str(s) for s in range(outcomes)]
    if algebra.is_full:
        ks = random_kraus(algebra.dim, outcomes * kraus, rng)
        ks = np.einsum("ij,kjl,lm->kim", algebra.basis_change.conj().T, ks, algebra.basis_change)
        return ins.make_instrument(algebra, labels,
                                   {s: ks[i * kraus:(i + 1) * kraus] for i, s in enumerate(labels)})
    n = sum(b for b, _ in algebra.blocks)
    ks = random_kraus(n, outcomes * kraus, rng)
    fam = {s: [op for k in ks[i * kraus:(i + 1) * kraus] for op in _lift(algebra, k)]
           for i, s in enumerate(labels)}
    return ins.make_instrument(algebra, labels, fam)


def random_element(algebra: BlockAlgebra, rng=None, hermitian: bool = False) -> alg.AlgebraElement:
    rng = _rng(rng)
    coeffs = []
    for n, _ in algebra.blocks:
        c = ginibre((n, n), rng)
        coeffs.append((c + c.conj().T) / 2 if hermitian else c)
    return alg.element(algebra, coeffs)
