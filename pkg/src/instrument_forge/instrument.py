"""
CP instruments over finite outcome sets.

An instrument assigns to every outcome label ``s`` a completely positive map
stored in Kraus form ``{K_{s,j}}``. The dual (Heisenberg) map acts on
operators as ``X -> sum_j K^dag X K`` and the predual (Schroedinger) map on
densities as ``rho -> sum_j K rho K^dag``. Events are finite label sets; the
map of an event is the sum over its atoms.

The Kraus operators are D x D matrices on the ambient space of the algebra.
Only the restriction of the dual map to the algebra carries meaning, so
two instruments are equal when they agree on the algebra.
"""
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import algebra as alg
from .algebra import AlgebraElement, BlockAlgebra, NormalState
from .errors import (
    AlgebraMismatch,
    DimensionMismatch,
    NotUnital,
    OutcomeMismatch,
    RangeViolation,
    UnknownLabel,
)

UNITAL_TOL = 1e-10
RANGE_TOL = 1e-9
CP_TOL = 1e-10
ZERO_PROB = 1e-12

Event = Union[str, Iterable[str], None]


@dataclass(frozen=True, eq=False)
class CPInstrument:
    """Kraus-form CP instrument on ``algebra``.

    ``kraus[s]`` is an array of shape (r_s, D, D). Use :func:`make_instrument`
    to get a validated instance; the raw constructor performs no checks so
    that :func:`validate` can report on broken inputs.
    """

    algebra: BlockAlgebra
    outcomes: Tuple[str, ...]
    kraus: Mapping[str, np.ndarray]

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def __repr__(self):
        ranks = {s: len(self.kraus[s]) for s in self.outcomes}
        return f"CPInstrument({self.algebra!r}, kraus_counts={ranks})"


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tol


@dataclass(frozen=True)
class ValidationReport:
    checks: Tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


class _Indefinite:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INDEFINITE"

    def __bool__(self):
        return False


INDEFINITE = _Indefinite()
"""Marker for the posterior of a zero-probability outcome."""


@dataclass(frozen=True, eq=False)
class PosteriorFamily:
    """Per-outcome probabilities and posterior states.

    ``posteriors[s]`` is a :class:`NormalState`, or :data:`INDEFINITE` when
    the outcome has probability zero.
    """

    outcomes: Tuple[str, ...]
    weights: np.ndarray
    posteriors: Tuple[Union[NormalState, _Indefinite], ...]

    def weight(self, label: str) -> float:
        return float(self.weights[self.outcomes.index(label)])

    def posterior(self, label: str):
        return self.posteriors[self.outcomes.index(label)]

    def mixture(self, event: Event = None) -> np.ndarray:
        """``sum_{s in event} p(s) rho_s`` over the definite atoms."""
        labels = _event(self.outcomes, event)
        out = None
        for s in labels:
            post = self.posterior(s)
            if post is INDEFINITE:
                continue
            term = self.weight(s) * post.density
            out = term if out is None else out + term
        if out is None:
            return np.zeros_like(next(p.density for p in self.posteriors if p is not INDEFINITE))
        return out


class CheckResult(tuple):
    """``(passed, residual)`` pair returned by the repeatability tests."""

    def __new__(cls, passed: bool, residual: float):
        return super().__new__(cls, (bool(passed), float(residual)))

    @property
    def passed(self) -> bool:
        return self[0]

    @property
    def residual(self) -> float:
        return self[1]


def _event(outcomes: Sequence[str], event: Event) -> Tuple[str, ...]:
    if event is None:
        return tuple(outcomes)
    if isinstance(event, str):
        event = (event,)
    labels = tuple(event)
    for s in labels:
        if s not in outcomes:
            raise UnknownLabel(f"unknown outcome label {s!r}")
    # keep outcome order, drop duplicates
    return tuple(s for s in outcomes if s in labels)


def _kraus_array(ops, dim: int) -> np.ndarray:
    ops = np.asarray(ops, dtype=complex)
    if ops.ndim == 2:
        ops = ops[None]
    if ops.size == 0:
        return np.zeros((0, dim, dim), dtype=complex)
    if ops.ndim != 3 or ops.shape[1:] != (dim, dim):
        raise DimensionMismatch(f"Kraus operators of shape {ops.shape[1:]}, expected {(dim, dim)}")
    if not np.all(np.isfinite(ops)):
        raise ValueError("Kraus operators contain non-finite entries")
    ops = ops.copy()
    ops.setflags(write=False)
    return ops


def build_instrument(algebra: BlockAlgebra, outcomes: Sequence[str], kraus: Mapping) -> CPInstrument:
    """Assemble an instrument without validating unitality or range."""
    outcomes = tuple(str(s) for s in outcomes)
    if not outcomes:
        raise ValueError("outcome set must be non-empty")
    if len(set(outcomes)) != len(outcomes):
        raise ValueError(f"outcome labels must be distinct: {list(outcomes)}")
    extra = set(kraus) - set(outcomes)
    if extra:
        raise UnknownLabel(f"Kraus operators given for unknown labels {sorted(extra)}")
    ops = {s: _kraus_array(kraus.get(s, []), algebra.dim) for s in outcomes}
    return CPInstrument(algebra, outcomes, ops)


def make_instrument(
    algebra: BlockAlgebra,
    outcomes: Sequence[str],
    kraus: Mapping,
    unital_tol: float = UNITAL_TOL,
    range_tol: float = RANGE_TOL,
) -> CPInstrument:
    """Build and validate a CP instrument.

    Raises
    ------
    NotUnital
        ``sum_{s,j} K^dag K`` differs from the identity by more than ``unital_tol``.
    RangeViolation
        Some outcome's dual map sends an algebra element outside the algebra.
    """
    inst = build_instrument(algebra, outcomes, kraus)
    u = unitality_residual(inst)
    if u > unital_tol:
        raise NotUnital(f"sum of K^dag K deviates from identity by {u:.3g}")
    for s in inst.outcomes:
        r = range_residual(inst, s)
        if r > range_tol:
            raise RangeViolation(f"outcome {s!r} maps the algebra outside itself (residual {r:.3g})")
    return inst


def trivial_instrument(algebra: BlockAlgebra, label: str = "0") -> CPInstrument:
    """Single-outcome instrument whose only Kraus operator is the identity."""
    return make_instrument(algebra, [label], {label: [np.eye(algebra.dim)]})


def lueders_instrument(projections: Mapping[str, np.ndarray], algebra: Optional[BlockAlgebra] = None) -> CPInstrument:
    """Lueders instrument ``rho -> P_s rho P_s`` for a projection-valued measure."""
    labels = list(projections)
    dim = np.shape(projections[labels[0]])[0]
    algebra = algebra or alg.full_algebra(dim)
    return make_instrument(algebra, labels, {s: [projections[s]] for s in labels})


def computational_lueders(dim: int, labels: Optional[Sequence[str]] = None) -> CPInstrument:
    labels = labels or [str(k) for k in range(dim)]
    eye = np.eye(dim)
    return lueders_instrument({s: np.outer(eye[k], eye[k]) for k, s in enumerate(labels)})


# ---------------------------------------------------------------- map actions

def dual_map(inst: CPInstrument, x, event: Event = None) -> np.ndarray:
    """``sum_{s in event} sum_j K^dag x K`` as a D x D matrix (any x in B(C^D))."""
    x = alg._as_square(x, inst.dim)
    out = np.zeros_like(x)
    for s in _event(inst.outcomes, event):
        k = inst.kraus[s]
        if len(k):
            out = out + np.einsum("kji,jl,klm->im", k.conj(), x, k)
    return out


def dual_map_batch(inst: CPInstrument, xs: np.ndarray, label: str) -> np.ndarray:
    """Dual map of a single atom applied to a stack of operators (n, D, D)."""
    k = inst.kraus[label]
    if not len(k):
        return np.zeros_like(xs)
    return np.einsum("kji,bjl,klm->bim", k.conj(), xs, k, optimize=True)


def apply_dual(inst: CPInstrument, m, event: Event = None) -> AlgebraElement:
    """Heisenberg action ``I(M, event)`` re-expressed as an algebra element."""
    x = alg.embed(m) if isinstance(m, AlgebraElement) else m
    return alg.conditional_expectation(inst.algebra, dual_map(inst, x, event))


def apply_predual(inst: CPInstrument, state, event: Event = None) -> np.ndarray:
    """Subnormalized density ``I(event) rho = sum K rho K^dag``."""
    rho = alg._as_square(alg.density_of(state), inst.dim, "density")
    out = np.zeros_like(rho)
    for s in _event(inst.outcomes, event):
        k = inst.kraus[s]
        if len(k):
            out = out + np.einsum("kij,jl,kml->im", k, rho, k.conj())
    return out


def outcome_probability(inst: CPInstrument, state, event: Event = None) -> float:
    return float(np.trace(apply_predual(inst, state, event)).real)


def posterior_family(inst: CPInstrument, state, zero_tol: float = ZERO_PROB) -> PosteriorFamily:
    """Outcome weights and normalized post-measurement states."""
    weights, posts = [], []
    for s in inst.outcomes:
        unnorm = apply_predual(inst, state, (s,))
        p = float(np.trace(unnorm).real)
        weights.append(max(p, 0.0))
        if p > zero_tol:
            rho_s = unnorm / p
            rho_s = (rho_s + rho_s.conj().T) / 2
            posts.append(NormalState(alg._readonly(rho_s)))
        else:
            posts.append(INDEFINITE)
    return PosteriorFamily(inst.outcomes, np.array(weights), tuple(posts))


def _check_same_algebra(a: CPInstrument, b: CPInstrument):
    if not alg.same_algebra(a.algebra, b.algebra):
        raise AlgebraMismatch(f"instruments act on different algebras: {a.algebra!r} vs {b.algebra!r}")


def joint_distribution(second: CPInstrument, first: CPInstrument, state) -> np.ndarray:
    """Joint probabilities of two successive measurements.

    Returns an array ``P[t, s]`` indexed by ``second.outcomes`` (rows) and
    ``first.outcomes`` (columns), ``P[t, s] = tr(J'({t}) J({s}) rho)``.
    """
    _check_same_algebra(second, first)
    table = np.zeros((len(second.outcomes), len(first.outcomes)))
    for j, s in enumerate(first.outcomes):
        after = apply_predual(first, state, (s,))
        for i, t in enumerate(second.outcomes):
            table[i, j] = np.trace(apply_predual(second, after, (t,))).real
    return table


# ---------------------------------------------------------------- validation

def choi_of_kraus(kraus: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij E_ij (x) Phi*(E_ij)`` of the dual map.

    Entry ``[(i,a),(j,b)] = sum_k conj(K_{ia}) K_{jb}``, i.e. a sum of
    rank-one terms built from the row-major vectorization of ``conj(K)``.
    """
    kraus = np.asarray(kraus, dtype=complex)
    if kraus.ndim == 2:
        kraus = kraus[None]
    vecs = kraus.conj().reshape(len(kraus), -1)
    return vecs.T @ vecs.conj()


def unitality_residual(inst: CPInstrument) -> float:
    total = np.zeros((inst.dim, inst.dim), dtype=complex)
    for s in inst.outcomes:
        k = inst.kraus[s]
        if len(k):
            total += np.einsum("kji,kjl->il", k.conj(), k)
    return float(np.linalg.norm(total - np.eye(inst.dim), ord=2))


def range_residual(inst: CPInstrument, label: str) -> float:
    """Largest HS distance from the algebra of ``I(B, {s})`` over the basis B."""
    if inst.algebra.is_full:
        return 0.0
    images = dual_map_batch(inst, alg.basis(inst.algebra), label)
    proj = np.array([alg.project(inst.algebra, y) for y in images])
    return float(np.linalg.norm(images - proj, axis=(1, 2)).max())


def validate(inst: CPInstrument, unital_tol: float = UNITAL_TOL, range_tol: float = RANGE_TOL,
             cp_tol: float = CP_TOL) -> ValidationReport:
    """Run every instrument check and collect residuals; never raises."""
    checks = []
    for s in inst.outcomes:
        k = inst.kraus[s]
        lo = np.linalg.eigvalsh(choi_of_kraus(k)).min() if len(k) else 0.0
        checks.append(Check(f"cp:{s}", max(0.0, -float(lo)), cp_tol))
    checks.append(Check("unitality", unitality_residual(inst), unital_tol))
    for s in inst.outcomes:
        checks.append(Check(f"range:{s}", range_residual(inst, s), range_tol))
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------- structure

def _predual_superop(inst: CPInstrument, label: str) -> np.ndarray:
    """Matrix of ``rho -> sum K rho K^dag`` on row-major vectorized densities."""
    k = inst.kraus[label]
    d = inst.dim
    if not len(k):
        return np.zeros((d * d, d * d), dtype=complex)
    return np.einsum("kij,klm->iljm", k, k.conj()).reshape(d * d, d * d)


def is_weakly_repeatable(inst: CPInstrument, tol: float = 1e-9) -> CheckResult:
    """Check ``I(I(1, {t}), {s}) = delta_st I(1, {s})`` over all atom pairs."""
    eye = np.eye(inst.dim)
    effects = {s: dual_map(inst, eye, (s,)) for s in inst.outcomes}
    worst = 0.0
    for s in inst.outcomes:
        for t in inst.outcomes:
            lhs = dual_map(inst, effects[t], (s,))
            rhs = effects[s] if s == t else 0.0
            worst = max(worst, float(np.linalg.norm(lhs - rhs, ord=2)))
    return CheckResult(worst < tol, worst)


def is_repeatable(inst: CPInstrument, tol: float = 1e-9) -> CheckResult:
    """Check ``I({s}) I({t}) = delta_st I({s})`` as predual maps.

    Both sides are applied to every matrix unit of B(C^D) and compared after
    restriction to the algebra.
    """
    d = inst.dim
    ops = {s: _predual_superop(inst, s) for s in inst.outcomes}
    worst = 0.0
    for s in inst.outcomes:
        for t in inst.outcomes:
            diff = ops[s] @ ops[t] - (ops[s] if s == t else 0.0)
            if inst.algebra.is_full:
                worst = max(worst, float(np.abs(diff).max()) if diff.size else 0.0)
                continue
            # column u of diff is the image of the u-th matrix unit
            for y in diff.T.reshape(-1, d, d):
                r = alg.restrict_state(y, inst.algebra)
                worst = max(worst, max(float(np.abs(b).max()) for b in r.blocks))
    return CheckResult(worst < tol, worst)


def discrete_support(inst: CPInstrument, tol: float = 1e-12) -> List[str]:
    """Atoms whose map ``T(s)`` is nonzero.

    Every instrument with finitely many outcomes is discrete,
    ``I(event) = sum_{s in event} T(s)``; this lists the atoms that actually
    contribute.
    """
    eye = np.eye(inst.dim)
    return [s for s in inst.outcomes
            if np.linalg.norm(dual_map(inst, eye, (s,)), ord=2) > tol]


def instruments_equal(first: CPInstrument, second: CPInstrument, tol: float = 1e-9) -> bool:
    return instrument_distance(first, second) < tol


def instrument_distance(first: CPInstrument, second: CPInstrument) -> float:
    """Largest operator-norm gap ``||I1(B,{s}) - I2(B,{s})||`` over an algebra basis."""
    _check_same_algebra(first, second)
    if first.outcomes != second.outcomes:
        raise OutcomeMismatch(f"outcomes differ: {first.outcomes} vs {second.outcomes}")
    b = alg.basis(first.algebra)
    worst = 0.0
    for s in first.outcomes:
        diff = dual_map_batch(first, b, s) - dual_map_batch(second, b, s)
        worst = max(worst, float(np.linalg.norm(diff, ord=2, axis=(1, 2)).max()))
    return worst
