import numpy as np
import pytest

from instrument_forge import algebra as alg
from instrument_forge import dilation as dil
from instrument_forge import instrument as ins
from instrument_forge import localnet as ln
from instrument_forge.errors import (CapExceeded, DegenerateAmplitude, NotHermitian,
                                     RegionOrderViolation, RegionOutOfRange)
from instrument_forge.random import random_instrument

NET = ln.make_lattice_net(3, 2)
Z0, Z1 = np.diag([1., 0]), np.diag([0., 1])
X = np.array([[0., 1], [1, 0]])


def kron(*ops):
    out = np.eye(1)
    for o in ops:
        out = np.kron(out, o)
    return out


def test_site_operator_matches_kron():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    assert np.allclose(ln.site_operator(NET, a, [1]), kron(np.eye(2), a, np.eye(2)))
    assert np.allclose(ln.site_operator(NET, np.kron(a, b), [0, 2]), kron(a, np.eye(2), b))
    # listed order is the factor order
    assert np.allclose(ln.site_operator(NET, np.kron(a, b), [2, 0]), kron(b, np.eye(2), a))


def test_region_algebra_and_complement():
    r = ln.Region(1, 1)
    a = ln.region_algebra(NET, r)
    assert a.blocks == ((2, 4),)
    assert alg.is_member(kron(np.eye(2), X, np.eye(2)), a)[0]
    assert not alg.is_member(kron(X, np.eye(4)), a)[0]
    assert ln.causal_complement(NET, r) == (ln.Region(0, 0), ln.Region(2, 2))
    assert ln.complement_sites(NET, ln.Region(0, 1)) == [2]
    gens = ln.complement_generators(NET, r)
    assert len(gens) == 8
    for g in gens:
        for b in alg.basis(a):
            assert np.abs(g @ b - b @ g).max() < 1e-12
    assert np.allclose(ln.complement_generators(NET, ln.Region(0, 2)), [np.eye(8)])


def test_complement_algebra_is_commutant():
    r = ln.Region(0, 1)
    c = ln.complement_algebra(NET, r)
    x = np.random.default_rng(1).normal(size=(8, 8))
    assert np.allclose(alg.project(c, x), alg.project(alg.commutant(ln.region_algebra(NET, r)), x))


def test_region_parsing_and_bounds():
    assert ln.parse_region("0..2") == ln.Region(0, 2)
    assert ln.parse_region("1") == ln.Region(1, 1)
    assert str(ln.Region(0, 1)) == "0..1"
    assert ln.Region(1, 1) in ln.Region(0, 2)
    for bad in ["2..1", "a..b", "-1..0"]:
        with pytest.raises(ValueError):
            ln.parse_region(bad)
    with pytest.raises(RegionOutOfRange):
        ln.region_algebra(NET, ln.Region(0, 3))
    with pytest.raises(CapExceeded):
        ln.make_lattice_net(13, 2)
    assert ln.make_lattice_net(12, 2).global_dim == 4096


def test_extend_local_matches_product_formula():
    rng = np.random.default_rng(2)
    inner, outer = ln.Region(0, 0), ln.Region(0, 1)
    local = random_instrument(2, outcomes=2, kraus=2, rng=rng)
    on_region = ln.local_instrument(NET, inner, {s: local.kraus[s] for s in local.outcomes})
    ext = ln.extend_local(NET, on_region, inner, outer)
    xa, zc, yb = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    for s in local.outcomes:
        expected = kron(ins.dual_map(local, xa, s), np.trace(zc) / 2 * np.eye(2), yb)
        assert np.allclose(ins.dual_map(ext, kron(xa, zc, yb), s), expected, atol=1e-12)
    rep = ln.is_local_instrument(NET, ext, inner, outer, rng=3)
    assert rep.passed()


def test_extend_local_region_order():
    inner = ln.Region(0, 0)
    inst = ln.local_instrument(NET, inner, {"0": Z0, "1": Z1})
    with pytest.raises(RegionOrderViolation):
        ln.extend_local(NET, inst, inner, inner)
    with pytest.raises(RegionOrderViolation):
        ln.extend_local(NET, inst, inner, ln.Region(1, 2))
    with pytest.raises(RegionOutOfRange):
        ln.extend_local(NET, inst, inner, ln.Region(0, 5))


def test_non_local_instrument_fails_intertwining():
    z = ln.local_instrument(NET, ln.Region(2, 2), {"0": Z0, "1": Z1})
    glob = ln.global_instrument(NET, z)
    assert ln.intertwining_check(NET, glob, ln.Region(0, 1)) == pytest.approx(np.sqrt(2))
    rep = ln.is_local_instrument(NET, glob, ln.Region(0, 0), ln.Region(0, 1), rng=0)
    assert not rep.passed()
    assert rep.locality_residual > 0.1


def test_strictly_local_lueders():
    z = ln.global_instrument(NET, ln.local_instrument(NET, ln.Region(1, 1), {"0": Z0, "1": Z1}))
    rep = ln.is_local_instrument(NET, z, ln.Region(1, 1), ln.Region(1, 1), rng=0)
    assert rep.passed()


def test_von_neumann_flat_pointer():
    amp = [(0.0, 1 / np.sqrt(2)), (2.0, 1 / np.sqrt(2))]
    inst = ln.von_neumann_model(NET, np.diag([1., -1]), ln.Region(0, 0), amp, [-1, 1])
    assert inst.outcomes == ("-1", "1")
    k1, km = np.diag([1, 1 / np.sqrt(2)]), np.diag([0, 1 / np.sqrt(2)])
    x = np.random.default_rng(4).normal(size=(8, 8))
    for label, k in (("1", k1), ("-1", km)):
        g = ln.site_operator(NET, k, [0])
        assert np.allclose(ins.dual_map(inst, x, label), g.conj().T @ x @ g, atol=1e-12)
    rep = ln.is_local_instrument(NET, inst, ln.Region(0, 0), ln.Region(0, 0), rng=1)
    assert rep.passed()


def test_von_neumann_callable_amplitude_gaussian():
    grid = np.linspace(-3, 3, 13)
    inst = ln.von_neumann_model(NET, np.diag([1., -1]), ln.Region(1, 1),
                                lambda y: np.exp(-y * y / 2), grid)
    assert ins.validate(inst).passed
    # centred on the eigenvalue, up to truncation of the grid
    up = alg.pure_state(np.eye(8)[0])
    mean = sum(float(s) * ins.outcome_probability(inst, up, s) for s in inst.outcomes)
    assert mean == pytest.approx(1.0, abs=5e-3)


def test_von_neumann_errors():
    with pytest.raises(NotHermitian):
        ln.von_neumann_model(NET, np.array([[0, 1], [0, 0]]), ln.Region(0, 0), [(0, 1)], [0])
    with pytest.raises(DegenerateAmplitude):
        ln.von_neumann_model(NET, np.diag([1., -1]), ln.Region(0, 0), [(0, 1)], [5])
    with pytest.raises(DegenerateAmplitude):
        ln.von_neumann_model(NET, np.diag([1., -1]), ln.Region(0, 0), [(0, 1)], [1])


def test_extension_then_dilation_is_strict_on_complement():
    inner, outer = ln.Region(1, 1), ln.Region(0, 2)
    inst = ln.local_instrument(NET, inner, {"0": Z0, "1": Z1})
    ext = ln.extend_local(NET, inst, inner, outer)
    assert ln.intertwining_check(NET, dil.canonical_extension(ext), outer) == 0.0


def all_regions(net):
    return [ln.Region(a, b) for a in range(net.sites) for b in range(a, net.sites)]


def test_isotony_and_locality_of_the_net():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(8, 8))
    for r1 in all_regions(NET):
        a1 = ln.region_algebra(NET, r1)
        for r2 in all_regions(NET):
            a2 = ln.region_algebra(NET, r2)
            if r1 in r2:
                assert alg.is_member(alg.project(a1, x), a2)[1] < 1e-12
            if set(r1.sites).isdisjoint(r2.sites):
                for b1 in alg.basis(a1)[:4]:
                    for b2 in alg.basis(a2)[:4]:
                        assert np.abs(b1 @ b2 - b2 @ b1).max() < 1e-12


def test_extend_local_is_section_of_restriction():
    rng = np.random.default_rng(6)
    net = ln.make_lattice_net(4, 2)
    pairs = [(i, o) for i in all_regions(net) for o in all_regions(net) if i in o and i != o and len(i.sites) <= 2]
    for inner, outer in pairs:
        n = 2 ** len(inner.sites)
        local = random_instrument(n, outcomes=2, rng=rng)
        on_region = ln.local_instrument(net, inner, {s: local.kraus[s] for s in local.outcomes})
        ext = ln.extend_local(net, on_region, inner, outer)
        restricted = ins.build_instrument(on_region.algebra, ext.outcomes, ext.kraus)
        assert ins.instrument_distance(restricted, on_region) < 1e-10
