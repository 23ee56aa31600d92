"""
Dilations of CP maps and instruments.

Contents:

* Choi matrices and minimal Kraus decompositions.
* Minimal Stinespring triples ``T(X) = V^dag pi(X) V`` for maps defined on a
  block algebra.
* Instrument dilations ``I(X, {s}) = V^dag (X (x) E0(s)) V`` on B(H).
* Measuring processes ``(K, sigma, U, E)``: synthesis from an instrument by
  completing ``xi (x) eta2 (x) eta3 -> V xi (x) eta3`` to a unitary, the
  induced instrument ``X -> (id (x) sigma)[U^dag (X (x) E(s)) U]``, and the
  round-trip check between the two.
* The canonical extension ``X -> I(E(X))`` of an instrument on a subalgebra
  through the trace-preserving conditional expectation E.

Every eigenvector produced here has its phase fixed (largest entry real and
positive) so that repeated runs give identical output.
"""
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from . import algebra as alg
from . import instrument as ins
from .algebra import BlockAlgebra
from .errors import DimensionMismatch, NotCP, NotFullAlgebra, OutcomeMismatch
from .instrument import CPInstrument

KRAUS_FLOOR = 1e-12
NEG_TOL = 1e-9
REALIZATION_TOL = 1e-9


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so that its largest-magnitude entry is real positive."""
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=0)
    piv = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(piv) / piv)


def _psd_factor(mat: np.ndarray, floor: float = KRAUS_FLOOR, neg_tol: Optional[float] = None):
    """Columns ``sqrt(lam) u`` for eigenpairs of a PSD matrix with ``lam > floor``.

    Ordered by decreasing eigenvalue.
    """
    mat = (mat + mat.conj().T) / 2
    lam, u = np.linalg.eigh(mat)
    if neg_tol is not None and lam.size and lam.min() < -neg_tol:
        raise NotCP(f"Choi matrix has eigenvalue {lam.min():.3g}")
    keep = lam > floor
    lam, u = lam[keep][::-1], u[:, keep][:, ::-1]
    return _fix_phases(u) * np.sqrt(lam)


# ---------------------------------------------------------------- Choi / Kraus

def choi_matrix(kraus, dim: int) -> np.ndarray:
    """Choi matrix ``sum_ij E_ij (x) Phi*(E_ij)`` of ``Phi*(X) = sum K^dag X K``.

    Positive semidefinite, of rank equal to the minimal Kraus number.
    """
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.ndim == 2:
        kraus = kraus[None]
    if kraus.ndim != 3 or kraus.shape[1:] != (dim, dim):
        raise DimensionMismatch(f"Kraus operators of shape {kraus.shape[1:]}, expected {(dim, dim)}")
    return ins.choi_of_kraus(kraus)


def kraus_from_choi(choi: np.ndarray, dim: int, floor: float = KRAUS_FLOOR,
                    neg_tol: float = NEG_TOL) -> np.ndarray:
    """Minimal Kraus family (r, dim, dim) from a dual-map Choi matrix.

    Eigenvalues at or below ``floor`` are dropped.

    Raises
    ------
    NotCP
        If the Choi matrix has an eigenvalue below ``-neg_tol``.
    """
    choi = np.asarray(choi, dtype=complex)
    if choi.shape != (dim * dim, dim * dim):
        raise DimensionMismatch(f"Choi matrix of shape {choi.shape} for dim {dim}")
    cols = _psd_factor(choi, floor, neg_tol)
    return cols.T.conj().reshape(-1, dim, dim)


def minimal_kraus(kraus, dim: int, floor: float = KRAUS_FLOOR) -> np.ndarray:
    """Linearly independent Kraus family implementing the same map."""
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.size == 0:
        return np.zeros((0, dim, dim), dtype=complex)
    return kraus_from_choi(choi_matrix(kraus, dim), dim, floor)


def choi_rank(kraus, dim: int, floor: float = KRAUS_FLOOR) -> int:
    return len(minimal_kraus(kraus, dim, floor))


# ---------------------------------------------------------------- Stinespring

@dataclass(frozen=True, eq=False)
class StinespringTriple:
    """``T(X) = V^dag pi(X) V`` with ``pi(X) = (+)_i c_i (x) 1_{r_i}``.

    The dilation space is ``(+)_i C^{n_i} (x) C^{r_i}``; ``c_i`` are the block
    coefficients of X in ``algebra``. ``V`` is an isometry when T is unital.
    """

    algebra: BlockAlgebra
    ranks: Tuple[int, ...]
    V: np.ndarray

    @property
    def dilation_dim(self) -> int:
        return self.V.shape[0]

    @property
    def multiplicity(self) -> int:
        """Total multiplicity sum r_i; equals the Choi rank on a full algebra."""
        return sum(self.ranks)

    def represent(self, x) -> np.ndarray:
        """The representation pi evaluated on an element (or a matrix in the algebra)."""
        if not isinstance(x, alg.AlgebraElement):
            x = alg.conditional_expectation(self.algebra, x)
        out = np.zeros((self.dilation_dim, self.dilation_dim), dtype=complex)
        pos = 0
        for c, r in zip(x.coeffs, self.ranks):
            size = c.shape[0] * r
            out[pos:pos + size, pos:pos + size] = np.kron(c, np.eye(r))
            pos += size
        return out

    def apply(self, x) -> np.ndarray:
        return self.V.conj().T @ self.represent(x) @ self.V

    def minimality_rank(self) -> int:
        """Dimension of ``span{pi(B) V xi}`` over an algebra basis B and all xi."""
        if self.dilation_dim == 0:
            return 0
        cols = np.hstack([self.represent(b) @ self.V for b in alg.basis(self.algebra)])
        return int(np.linalg.matrix_rank(cols, tol=1e-9))

    def is_minimal(self) -> bool:
        return self.minimality_rank() == self.dilation_dim


def minimal_stinespring(kraus=None, algebra: Optional[BlockAlgebra] = None,
                        choi: Optional[np.ndarray] = None,
                        floor: float = KRAUS_FLOOR) -> StinespringTriple:
    """Minimal Stinespring triple of ``X -> sum K^dag X K`` restricted to ``algebra``.

    The map may be given by Kraus operators or, on a full algebra, by its
    Choi matrix. In the block basis each Kraus operator splits into pieces
    ``g: C^D -> C^{n_i}`` (one per multiplicity index); per block the pieces
    are replaced by the Choi eigenvectors of ``sum vec(g) vec(g)^dag``, which
    leaves a linearly independent family and therefore a minimal dilation.

    Raises
    ------
    NotCP
        If a supplied Choi matrix has an eigenvalue below -1e-9.
    """
    if choi is not None:
        dim = int(round(np.sqrt(np.shape(choi)[0])))
        kraus = kraus_from_choi(choi, dim, floor)
        algebra = algebra or alg.full_algebra(dim)
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.ndim == 2:
        kraus = kraus[None]
    if algebra is None:
        algebra = alg.full_algebra(kraus.shape[-1])
    dim = algebra.dim
    if kraus.size and kraus.shape[1:] != (dim, dim):
        raise DimensionMismatch(f"Kraus operators of shape {kraus.shape[1:]}, expected {(dim, dim)}")
    g = np.einsum("ij,kjl->kil", algebra.basis_change, kraus) if kraus.size else kraus
    ranks, rows = [], []
    for (n, m), off in zip(algebra.blocks, algebra.offsets):
        if not kraus.size:
            ranks.append(0)
            continue
        pieces = g[:, off:off + n * m, :].reshape(len(g), n, m, dim)
        pieces = pieces.transpose(0, 2, 1, 3).reshape(-1, n * dim)
        cols = _psd_factor(pieces.T @ pieces.conj(), floor)
        r = cols.shape[1]
        ranks.append(r)
        # row (a, k) of this block's segment is row a of the k-th new piece
        new = cols.T.reshape(r, n, dim)
        rows.append(new.transpose(1, 0, 2).reshape(n * r, dim))
    v = np.vstack(rows) if rows else np.zeros((0, dim), dtype=complex)
    return StinespringTriple(algebra, tuple(ranks), alg._readonly(v))


# ---------------------------------------------------------------- instrument dilation

@dataclass(frozen=True, eq=False)
class InstrumentDilation:
    """``I(X, {s}) = V^dag (X (x) E0(s)) V`` with V: C^D -> C^D (x) C^k."""

    outcomes: Tuple[str, ...]
    meter_dim: int
    projections: Mapping[str, np.ndarray]
    V: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.V.shape[1]

    def apply(self, x, label: str) -> np.ndarray:
        return self.V.conj().T @ np.kron(x, self.projections[label]) @ self.V

    def minimality_rank(self) -> int:
        """Dimension of ``span{(X (x) E0(s)) V xi}`` over matrix units X and atoms s."""
        d = self.system_dim
        cols = []
        for s in self.outcomes:
            for u in np.eye(d * d).reshape(d * d, d, d):
                cols.append(np.kron(u, self.projections[s]) @ self.V)
        return int(np.linalg.matrix_rank(np.hstack(cols), tol=1e-9))


def _require_full(inst: CPInstrument):
    if not inst.algebra.is_full:
        raise NotFullAlgebra(
            f"instrument acts on {inst.algebra!r}; apply canonical_extension first"
        )


def dilate_instrument(inst: CPInstrument, floor: float = KRAUS_FLOOR) -> InstrumentDilation:
    """Minimal dilation of an instrument on the full matrix algebra.

    Each atom contributes a meter summand of dimension equal to its Choi
    rank; unsupported atoms get the zero projection.
    """
    _require_full(inst)
    d = inst.dim
    families = [minimal_kraus(inst.kraus[s], d, floor) for s in inst.outcomes]
    k = sum(len(f) for f in families)
    projections, pos = {}, 0
    for s, fam in zip(inst.outcomes, families):
        p = np.zeros((k, k), dtype=complex)
        p[pos:pos + len(fam), pos:pos + len(fam)] = np.eye(len(fam))
        projections[s] = alg._readonly(p)
        pos += len(fam)
    stack = np.concatenate(families, axis=0)
    v = stack.transpose(1, 0, 2).reshape(d * k, d)
    return InstrumentDilation(inst.outcomes, k, projections, alg._readonly(v))


def reconstruction_residual(dilation: InstrumentDilation, inst: CPInstrument) -> float:
    """Largest operator-norm error of the dilation formula over matrix units."""
    d = inst.dim
    worst = 0.0
    units = np.eye(d * d).reshape(d * d, d, d)
    for s in inst.outcomes:
        direct = ins.dual_map_batch(inst, units, s)
        for u, y in zip(units, direct):
            worst = max(worst, float(np.linalg.norm(dilation.apply(u, s) - y, ord=2)))
    return worst


# ---------------------------------------------------------------- measuring processes

@dataclass(frozen=True, eq=False)
class MeasuringProcess:
    """Probe ``(K, sigma, U, E)``: ancilla dimension, probe state, coupling, meter."""

    outcomes: Tuple[str, ...]
    ancilla_dim: int
    sigma: np.ndarray
    U: np.ndarray
    meter: Mapping[str, np.ndarray]

    @property
    def system_dim(self) -> int:
        return self.U.shape[0] // self.ancilla_dim


def make_process(outcomes: Sequence[str], ancilla_dim: int, sigma, U, meter: Mapping,
                 tol: float = 1e-10) -> MeasuringProcess:
    """Validate and assemble a :class:`MeasuringProcess`.

    Checks that U is unitary, sigma a density matrix, and the meter a
    complete family of orthogonal projections.
    """
    outcomes = tuple(str(s) for s in outcomes)
    k = int(ancilla_dim)
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] % k:
        raise DimensionMismatch(f"U of shape {U.shape} is incompatible with ancilla dim {k}")
    err = np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()
    if err > tol:
        raise ValueError(f"U is not unitary (deviation {err:.3g})")
    sigma = alg.make_state(sigma, tol).density
    if sigma.shape != (k, k):
        raise DimensionMismatch(f"sigma has shape {sigma.shape}, expected {(k, k)}")
    if set(meter) != set(outcomes):
        raise OutcomeMismatch("meter labels do not match the outcome set")
    proj = {s: np.asarray(meter[s], dtype=complex) for s in outcomes}
    total = np.zeros((k, k), dtype=complex)
    for s, p in proj.items():
        if p.shape != (k, k):
            raise DimensionMismatch(f"meter projection {s!r} has shape {p.shape}")
        if np.abs(p @ p - p).max() > tol or np.abs(p - p.conj().T).max() > tol:
            raise ValueError(f"meter element {s!r} is not an orthogonal projection")
        total += p
    if np.abs(total - np.eye(k)).max() > tol:
        raise ValueError("meter projections do not sum to the identity")
    return MeasuringProcess(outcomes, k, alg._readonly(sigma), alg._readonly(U),
                            {s: alg._readonly(p) for s, p in proj.items()})


def _complete_to_unitary(image: np.ndarray, domain: np.ndarray, threshold: float = 1e-6) -> np.ndarray:
    """Extend the partial isometry ``e_domain[j] -> image[:, j]`` to a unitary.

    The orthogonal complement of the image is spanned by Gram-Schmidt over
    the canonical basis vectors taken in index order (two orthogonalization
    passes, vectors closer than ``threshold`` to the current span skipped).
    The resulting vectors are assigned, in order, to the canonical basis
    vectors outside ``domain``.
    """
    n, d = image.shape
    q = np.zeros((n, n), dtype=complex)
    q[:, :d] = image
    filled = d
    for j in range(n):
        if filled == n:
            break
        coeff = q[j, :filled].conj()
        v = np.zeros(n, dtype=complex)
        v[j] = 1.0
        if np.any(coeff):
            for _ in range(2):
                v -= q[:, :filled] @ (q[:, :filled].conj().T @ v)
        norm = np.linalg.norm(v)
        if norm > threshold:
            q[:, filled] = v / norm
            filled += 1
    if filled < n:
        raise RuntimeError("unitary completion failed to span the complement")
    u = np.zeros((n, n), dtype=complex)
    rest = np.setdiff1d(np.arange(n), domain)
    u[:, domain] = image
    u[:, rest] = q[:, d:]
    return u


def synthesize_measuring_process(inst: CPInstrument) -> MeasuringProcess:
    """Measuring process realizing an instrument on the full matrix algebra.

    With the minimal dilation ``(L2, E0, V)``, set ``L3 = H (x) L2``,
    ``K = L2 (x) L3``, probe ``sigma = |eta2 eta3><eta2 eta3|`` (first basis
    vectors), meter ``E(s) = E0(s) (x) 1_{L3}``, and U any unitary extending
    ``xi (x) eta2 (x) eta3 -> V xi (x) eta3``; the extension is the
    deterministic completion of :func:`_complete_to_unitary`.
    """
    _require_full(inst)
    dil = dilate_instrument(inst)
    d, k = inst.dim, dil.meter_dim
    l3 = d * k
    n = d * k * l3
    domain = np.arange(d) * (k * l3)
    image = np.zeros((n, d), dtype=complex)
    image[np.arange(d * k) * l3, :] = dil.V
    U = _complete_to_unitary(image, domain)
    kdim = k * l3
    sigma = np.zeros((kdim, kdim), dtype=complex)
    sigma[0, 0] = 1.0
    meter = {s: alg._readonly(np.kron(dil.projections[s], np.eye(l3))) for s in inst.outcomes}
    return MeasuringProcess(inst.outcomes, kdim, alg._readonly(sigma), alg._readonly(U), meter)


def process_kraus(process: MeasuringProcess, label: str) -> np.ndarray:
    """Kraus family of ``X -> (id (x) sigma)[U^dag (X (x) E(s)) U]``.

    With ``sigma = sum q_p |phi_p><phi_p|`` and ``E(s) = sum_a |f_a><f_a|`` the
    operators are ``sqrt(q_p) (1 (x) <f_a|) U (1 (x) |phi_p>)``.
    """
    d, k = process.system_dim, process.ancilla_dim
    q, phis = np.linalg.eigh((process.sigma + process.sigma.conj().T) / 2)
    e, fs = np.linalg.eigh(process.meter[label])
    fs = fs[:, e > 0.5]
    out = []
    for qp, phi in zip(q, phis.T):
        if qp <= 1e-14 or not fs.shape[1]:
            continue
        t = (process.U @ np.kron(np.eye(d), phi[:, None])).reshape(d, k, d)
        out.append(np.sqrt(qp) * np.einsum("hki,ka->ahi", t, fs.conj()))
    if not out:
        return np.zeros((0, d, d), dtype=complex)
    return np.concatenate(out, axis=0)


def process_dual(process: MeasuringProcess, x, label: str) -> np.ndarray:
    """``(id (x) sigma)[U^dag (X (x) E(s)) U]`` evaluated through :func:`process_kraus`."""
    kr = process_kraus(process, label)
    return np.einsum("kji,jl,klm->im", kr.conj(), np.asarray(x, dtype=complex), kr)


def induced_instrument(process: MeasuringProcess, algebra: Optional[BlockAlgebra] = None,
                       floor: float = KRAUS_FLOOR) -> CPInstrument:
    """Instrument of a measuring process, restricted to ``algebra`` (default B(H)).

    Raises
    ------
    RangeViolation
        If the process is not a measuring process for ``algebra``.
    """
    d = process.system_dim
    algebra = algebra or alg.full_algebra(d)
    if algebra.dim != d:
        raise DimensionMismatch(f"process acts on C^{d}, algebra on C^{algebra.dim}")
    kraus = {s: minimal_kraus(process_kraus(process, s), d, floor) for s in process.outcomes}
    return ins.make_instrument(algebra, process.outcomes, kraus)


def process_membership_residual(process: MeasuringProcess, algebra: BlockAlgebra) -> float:
    """Largest HS distance from ``algebra`` of the process outputs on its basis."""
    b = alg.basis(algebra)
    worst = 0.0
    for s in process.outcomes:
        kr = process_kraus(process, s)
        ys = np.einsum("kji,bjl,klm->bim", kr.conj(), b, kr, optimize=True)
        for y in ys:
            worst = max(worst, alg.is_member(y, algebra)[1])
    return worst


@dataclass(frozen=True)
class RealizationReport:
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tol


def verify_realization(process: MeasuringProcess, inst: CPInstrument,
                       tol: float = REALIZATION_TOL) -> RealizationReport:
    """Compare ``I(M, {s})`` with the process output over an algebra basis."""
    if process.system_dim != inst.dim:
        raise DimensionMismatch(f"process acts on C^{process.system_dim}, instrument on C^{inst.dim}")
    if process.outcomes != inst.outcomes:
        raise OutcomeMismatch(f"outcomes differ: {process.outcomes} vs {inst.outcomes}")
    b = alg.basis(inst.algebra)
    worst = 0.0
    for s in inst.outcomes:
        kr = process_kraus(process, s)
        got = np.einsum("kji,bjl,klm->bim", kr.conj(), b, kr, optimize=True)
        want = ins.dual_map_batch(inst, b, s)
        worst = max(worst, float(np.linalg.norm(got - want, ord=2, axis=(1, 2)).max()))
    return RealizationReport(worst, tol)


# ---------------------------------------------------------------- canonical extension

def conditional_expectation_kraus(algebra: BlockAlgebra) -> np.ndarray:
    """Kraus operators F with ``sum F^dag X F = embed(E(X))``.

    ``F = W^dag iota_i (1_n (x) |b><a|) pi_i W / sqrt(m_i)`` for every block i
    and multiplicity pair (a, b).
    """
    d = algebra.dim
    w = algebra.basis_change
    out = []
    for (n, m), off in zip(algebra.blocks, algebra.offsets):
        for a in range(m):
            for b in range(m):
                j = np.zeros((d, d), dtype=complex)
                unit = np.zeros((m, m))
                unit[b, a] = 1.0
                j[off:off + n * m, off:off + n * m] = np.kron(np.eye(n), unit) / np.sqrt(m)
                out.append(w.conj().T @ j @ w)
    return np.array(out)


def canonical_extension(inst: CPInstrument, floor: float = KRAUS_FLOOR) -> CPInstrument:
    """Extension ``X -> I(E(X), s)`` of an instrument on M to all of B(H).

    E is the trace-preserving conditional expectation onto M. The composed
    Kraus family ``{K F}`` is reduced to a minimal one per atom.
    """
    if inst.algebra.is_full:
        return inst
    f = conditional_expectation_kraus(inst.algebra)
    d = inst.dim
    kraus = {}
    for s in inst.outcomes:
        k = inst.kraus[s]
        composed = np.einsum("kij,fjl->kfil", k, f).reshape(-1, d, d) if len(k) else k
        kraus[s] = minimal_kraus(composed, d, floor)
    return ins.make_instrument(alg.full_algebra(d), inst.outcomes, kraus)


def realize(inst: CPInstrument) -> Tuple[CPInstrument, MeasuringProcess]:
    """Canonical extension (when needed) followed by process synthesis."""
    full = canonical_extension(inst)
    return full, synthesize_measuring_process(full)
