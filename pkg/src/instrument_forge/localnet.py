"""
A one-dimensional lattice as a toy local net.

Sites ``0..L-1`` each carry C^d; the global Hilbert space is (C^d)^{(x) L}
with site 0 the most significant tensor factor. A region is an interval of
sites and its algebra is ``(x)_{i in O} M_d`` acting on those factors. The
complement of an interval plays the role of the causal complement, and
finite tensor factors make every proper inclusion a split pair with
intermediate type I factor ``A(O2)``.
"""
import re
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import algebra as alg
from . import dilation as dil
from . import instrument as ins
from .algebra import AlgebraElement, BlockAlgebra
from .errors import (
    CapExceeded,
    DegenerateAmplitude,
    DimensionMismatch,
    NotFullAlgebra,
    NotHermitian,
    RegionOrderViolation,
    RegionOutOfRange,
)
from .instrument import CPInstrument

MAX_GLOBAL_DIM = 4096
LOCAL_TOL = 1e-9


@dataclass(frozen=True)
class LocalNet:
    sites: int
    local_dim: int

    @property
    def global_dim(self) -> int:
        return self.local_dim ** self.sites


@dataclass(frozen=True, order=True)
class Region:
    """Closed interval ``[start, stop]`` of site indices."""

    start: int
    stop: int

    @property
    def sites(self) -> Tuple[int, ...]:
        return tuple(range(self.start, self.stop + 1))

    def __contains__(self, other: "Region") -> bool:
        return self.start <= other.start and other.stop <= self.stop

    def __str__(self):
        return f"{self.start}..{self.stop}"


@dataclass(frozen=True)
class LocalInstrumentReport:
    locality_residual: float
    range_residual: float
    intertwining_residual: float

    def passed(self, tol: float = LOCAL_TOL) -> bool:
        return max(self.locality_residual, self.range_residual, self.intertwining_residual) < tol


def make_lattice_net(sites: int, local_dim: int) -> LocalNet:
    """Validated net with ``sites >= 2``, ``local_dim >= 2`` and ``d^L <= 4096``."""
    if sites < 2 or local_dim < 2:
        raise CapExceeded(f"need at least 2 sites of dimension >= 2, got L={sites}, d={local_dim}")
    if local_dim ** sites > MAX_GLOBAL_DIM:
        raise CapExceeded(f"global dimension {local_dim}^{sites} exceeds {MAX_GLOBAL_DIM}")
    return LocalNet(int(sites), int(local_dim))


def parse_region(text: str) -> Region:
    """Parse ``"a..b"`` (or a single site ``"a"``)."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+))?\s*", text)
    if not m:
        raise ValueError(f"region must look like 'a..b', got {text!r}")
    a = int(m.group(1))
    b = int(m.group(2)) if m.group(2) is not None else a
    if b < a:
        raise ValueError(f"empty region {text!r}")
    return Region(a, b)


def _check_region(net: LocalNet, region: Region):
    if not (0 <= region.start <= region.stop < net.sites):
        raise RegionOutOfRange(f"region {region} outside lattice 0..{net.sites - 1}")


def _site_permutation(net: LocalNet, sites: Sequence[int]) -> np.ndarray:
    """Permutation rows ``p`` with ``(P v) = v[p]``: reorder factors to ``sites`` first."""
    rest = [i for i in range(net.sites) if i not in sites]
    order = list(sites) + rest
    idx = np.arange(net.global_dim).reshape((net.local_dim,) * net.sites)
    return idx.transpose(order).reshape(-1)


def sites_algebra(net: LocalNet, sites: Iterable[int]) -> BlockAlgebra:
    """Algebra ``(x)_{i in sites} M_d (x) 1`` for an arbitrary site set."""
    sites = sorted(set(sites))
    n = net.local_dim ** len(sites)
    m = net.global_dim // n
    w = np.eye(net.global_dim)[_site_permutation(net, sites)]
    return BlockAlgebra(((n, m),), alg._readonly(w))


def region_algebra(net: LocalNet, region: Region) -> BlockAlgebra:
    _check_region(net, region)
    return sites_algebra(net, region.sites)


def causal_complement(net: LocalNet, region: Region) -> Tuple[Region, ...]:
    """Sites outside the interval, grouped into maximal intervals."""
    _check_region(net, region)
    out = []
    if region.start > 0:
        out.append(Region(0, region.start - 1))
    if region.stop < net.sites - 1:
        out.append(Region(region.stop + 1, net.sites - 1))
    return tuple(out)


def complement_sites(net: LocalNet, region: Region) -> List[int]:
    return [i for r in causal_complement(net, region) for i in r.sites]


def complement_algebra(net: LocalNet, region: Region) -> BlockAlgebra:
    return sites_algebra(net, complement_sites(net, region))


def site_operator(net: LocalNet, op, sites: Sequence[int]) -> np.ndarray:
    """Global matrix of ``op`` acting on the listed sites (in that order)."""
    sites = list(sites)
    op = np.asarray(op, dtype=complex)
    n = net.local_dim ** len(sites)
    if op.shape != (n, n):
        raise DimensionMismatch(f"operator of shape {op.shape} on {len(sites)} sites")
    w = np.eye(net.global_dim)[_site_permutation(net, sites)]
    return w.T @ np.kron(op, np.eye(net.global_dim // n)) @ w


def complement_generators(net: LocalNet, region: Region) -> np.ndarray:
    """Single-site matrix units on every complement site, shape (g, D, D).

    Returns just the identity when the complement is empty.
    """
    d = net.local_dim
    gens = []
    for site in complement_sites(net, region):
        for a in range(d):
            for b in range(d):
                unit = np.zeros((d, d))
                unit[a, b] = 1.0
                gens.append(site_operator(net, unit, [site]))
    if not gens:
        gens.append(np.eye(net.global_dim, dtype=complex))
    return np.array(gens)


def local_instrument(net: LocalNet, region: Region, kraus) -> CPInstrument:
    """Instrument on ``A(region)`` from Kraus operators on the region's factor.

    ``kraus`` maps labels to d^|O| x d^|O| matrices; each is lifted to
    ``k (x) 1`` on the global space.
    """
    algebra = region_algebra(net, region)
    lifted = {}
    for s, ops in kraus.items():
        ops = np.asarray(ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        lifted[s] = [site_operator(net, k, region.sites) for k in ops]
    return ins.make_instrument(algebra, list(kraus), lifted)


def _abstract_kraus(inst: CPInstrument, label: str) -> np.ndarray:
    """Minimal Kraus family of the map induced on the single factor of ``inst.algebra``."""
    (n, _), = inst.algebra.blocks
    units = np.eye(n * n).reshape(n * n, n, n)
    choi = np.zeros((n * n, n * n), dtype=complex)
    for idx, u in enumerate(units):
        i, j = divmod(idx, n)
        image = ins.dual_map(inst, alg.embed(AlgebraElement(inst.algebra, (u,))), (label,))
        c = alg.conditional_expectation(inst.algebra, image).coeffs[0]
        choi[i * n:(i + 1) * n, j * n:(j + 1) * n] = c
    # rows (i, a), cols (j, b) of the block matrix sum E_ij (x) Phi(E_ij)
    return dil.kraus_from_choi(choi, n)


def extend_local(net: LocalNet, inst: CPInstrument, inner: Region, outer: Region) -> CPInstrument:
    """Global local instrument extending ``inst`` from ``A(inner)``.

    Acts as ``X (x) Z (x) Y -> I(X) (x) tr(Z)/d_c 1 (x) Y`` for X on the
    inner region, Z on the collar ``outer \\ inner`` and Y on the complement
    of ``outer``: the product instrument ``I (x) id`` on the inner region
    and the complement, composed with the normalized trace on the collar.

    Raises
    ------
    RegionOrderViolation
        Unless ``inner`` is a proper sub-interval of ``outer``.
    """
    _check_region(net, inner)
    _check_region(net, outer)
    if inner not in outer or inner == outer:
        raise RegionOrderViolation(f"{inner} must be a proper sub-interval of {outer}")
    if not alg.same_algebra(inst.algebra, region_algebra(net, inner)):
        raise DimensionMismatch(f"instrument does not act on A({inner})")
    collar = [i for i in outer.sites if i not in inner.sites]
    dc = net.local_dim ** len(collar)
    trace_kraus = []
    for a in range(dc):
        for b in range(dc):
            f = np.zeros((dc, dc))
            f[a, b] = 1.0 / np.sqrt(dc)
            trace_kraus.append(f)
    order = list(inner.sites) + collar
    kraus = {}
    for s in inst.outcomes:
        kraus[s] = [site_operator(net, np.kron(k, f), order)
                    for k in _abstract_kraus(inst, s) for f in trace_kraus]
    return ins.make_instrument(alg.full_algebra(net.global_dim), inst.outcomes, kraus)


def intertwining_check(net: LocalNet, inst: CPInstrument, outer: Region) -> float:
    """Largest ``||V A - (A (x) 1) V||`` over generators A of the complement of ``outer``.

    V is the minimal dilation of ``inst``, which must act on the full
    matrix algebra.
    """
    if not inst.algebra.is_full:
        raise NotFullAlgebra("intertwining needs an instrument on the full matrix algebra")
    _check_region(net, outer)
    dl = dil.dilate_instrument(inst)
    k = dl.meter_dim
    worst = 0.0
    for a in complement_generators(net, outer):
        gap = dl.V @ a - np.kron(a, np.eye(k)) @ dl.V
        worst = max(worst, float(np.linalg.norm(gap, ord=2)))
    return worst


def is_local_instrument(net: LocalNet, inst: CPInstrument, inner: Region, outer: Region,
                        samples: int = 4, rng=None) -> LocalInstrumentReport:
    """Residuals of the locality, range and intertwining conditions.

    Locality ``I(AB, s) = I(A, s) B`` is probed with ``samples`` random global
    A (plus the identity) against the complement generators B of ``outer``.
    Passing ``inner == outer`` tests strict locality.
    """
    _check_region(net, inner)
    _check_region(net, outer)
    if inner not in outer:
        raise RegionOrderViolation(f"{inner} is not contained in {outer}")
    if inst.dim != net.global_dim:
        raise DimensionMismatch(f"instrument acts on C^{inst.dim}, net on C^{net.global_dim}")
    rng = np.random.default_rng(rng)
    dim = net.global_dim
    probes = [np.eye(dim, dtype=complex)]
    for _ in range(samples):
        probes.append(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    gens = complement_generators(net, outer)
    locality = 0.0
    for s in inst.outcomes:
        for a in probes:
            ia = ins.dual_map(inst, a, (s,))
            scale = max(1.0, float(np.linalg.norm(a, ord=2)))
            for b in gens:
                gap = ins.dual_map(inst, a @ b, (s,)) - ia @ b
                locality = max(locality, float(np.linalg.norm(gap, ord=2)) / scale)
    inner_alg = region_algebra(net, inner)
    images = alg.basis(inner_alg)
    range_res = 0.0
    for s in inst.outcomes:
        for y in ins.dual_map_batch(inst, images, s):
            range_res = max(range_res, alg.is_member(y, inner_alg)[1])
    full = dil.canonical_extension(inst)
    twine = intertwining_check(net, full, outer)
    return LocalInstrumentReport(locality, range_res, twine)


def _amplitude_function(amplitude, match_tol: float = 1e-9) -> Callable[[np.ndarray], np.ndarray]:
    if callable(amplitude):
        return lambda y: np.asarray(np.vectorize(amplitude, otypes=[complex])(y), dtype=complex)
    pts = np.array([float(x) for x, _ in amplitude])
    vals = np.array([complex(a) for _, a in amplitude])

    def sampled(y):
        y = np.asarray(y, dtype=float)
        hit = np.abs(y[..., None] - pts) < match_tol
        return np.where(hit.any(-1), vals[np.argmax(hit, axis=-1)], 0.0)

    return sampled


def von_neumann_model(net: LocalNet, observable, region: Region, amplitude,
                      grid: Sequence[float], weights: Optional[Sequence[float]] = None,
                      labels: Optional[Sequence[str]] = None) -> CPInstrument:
    """Discretized von Neumann pointer measurement of ``observable`` on ``region``.

    Returns a strictly local instrument on the global algebra.

    Outcome x has Kraus operator ``sqrt(w_x) alpha(x 1 - A)`` (functional
    calculus of the Hermitian A), lifted to the global space. The family is
    then renormalized by ``S^{-1/2}``, ``S = sum_x K_x^dag K_x``, so that it
    is exactly unital; S commutes with A so the instrument stays strictly
    local.

    Parameters
    ----------
    observable : array_like or AlgebraElement
        Hermitian operator on the region's factor (d^|O| x d^|O|) or an
        element of ``region_algebra(net, region)``.
    amplitude : callable or sequence of (x, alpha(x))
        Pointer wavefunction. A sequence is read as samples, zero elsewhere.
    grid : sequence of float
        Outcome values.
    weights : sequence of float, optional
        Quadrature weights, uniform by default.
    """
    _check_region(net, region)
    if isinstance(observable, AlgebraElement):
        (a,) = observable.coeffs
    else:
        a = np.asarray(observable, dtype=complex)
    n = net.local_dim ** len(region.sites)
    if a.shape != (n, n):
        raise DimensionMismatch(f"observable of shape {a.shape} on a region of dimension {n}")
    if np.abs(a - a.conj().T).max() > 1e-10:
        raise NotHermitian("observable is not Hermitian")
    grid = [float(x) for x in grid]
    weights = np.ones(len(grid)) if weights is None else np.asarray(weights, dtype=float)
    if len(weights) != len(grid) or np.any(weights < 0):
        raise ValueError("weights must be non-negative, one per grid point")
    labels = list(labels) if labels is not None else [f"{x:g}" for x in grid]
    alpha = _amplitude_function(amplitude)
    spec, vecs = np.linalg.eigh((a + a.conj().T) / 2)
    local = []
    for x, w in zip(grid, weights):
        local.append(np.sqrt(w) * (vecs * alpha(x - spec)) @ vecs.conj().T)
    local = np.array(local)
    s = np.einsum("kji,kjl->il", local.conj(), local)
    lam, u = np.linalg.eigh((s + s.conj().T) / 2)
    if lam.max() <= 1e-14:
        raise DegenerateAmplitude("pointer amplitude vanishes on the whole grid")
    if lam.min() <= 1e-12:
        raise DegenerateAmplitude("some eigenvalue of the observable is never detected on the grid")
    local = local @ (u * lam ** -0.5) @ u.conj().T
    inst = local_instrument(net, region, {lab: [k] for lab, k in zip(labels, local)})
    return global_instrument(net, inst)


def global_instrument(net: LocalNet, inst: CPInstrument) -> CPInstrument:
    """The same Kraus family viewed on the full global algebra."""
    return ins.make_instrument(alg.full_algebra(net.global_dim), inst.outcomes, inst.kraus)
