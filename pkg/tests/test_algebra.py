import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instrument_forge import algebra as alg
from instrument_forge.errors import DimensionMismatch, NonUnitaryBasisChange
from instrument_forge.random import random_element, random_unitary

BLOCK_SHAPES = [[(3, 1)], [(1, 1), (1, 1), (1, 1)], [(2, 2)], [(1, 1), (2, 1)], [(1, 2), (2, 1)], [(2, 3)]]


def make(blocks, seed=None):
    d = sum(n * m for n, m in blocks)
    w = None if seed is None else random_unitary(d, seed)
    return alg.make_block_algebra(blocks, w)


def commutant_dim_oracle(a):
    """Null space of Y -> [Y, b] over the algebra basis, computed from scratch."""
    d = a.dim
    eye = np.eye(d)
    rows = [np.kron(b, eye) - np.kron(eye, b.T) for b in alg.basis(a)]
    s = np.linalg.svd(np.vstack(rows), compute_uv=False)
    return int(np.sum(s < 1e-9)) + max(0, d * d - len(s))


@pytest.mark.parametrize("blocks", BLOCK_SHAPES)
def test_basis_is_hs_orthonormal_and_in_algebra(blocks):
    a = make(blocks, 5)
    b = alg.basis(a)
    gram = np.einsum("kij,lij->kl", b.conj(), b)
    assert b.shape == (a.algebra_dim, a.dim, a.dim)
    assert np.allclose(gram, np.eye(len(b)), atol=1e-12)
    assert all(alg.is_member(x, a)[0] for x in b)


@pytest.mark.parametrize("blocks", BLOCK_SHAPES)
def test_commutant_matches_null_space(blocks):
    a = make(blocks, 11)
    c = alg.commutant(a)
    assert c.algebra_dim == commutant_dim_oracle(a)
    for x in alg.basis(c)[:6]:
        for y in alg.basis(a)[:6]:
            assert np.abs(x @ y - y @ x).max() < 1e-10


def test_commutant_of_2x3_has_dimension_nine():
    a = make([(2, 3)], 3)
    assert alg.commutant(a).algebra_dim == 9 == commutant_dim_oracle(a)


def test_double_commutant_is_original():
    a = make([(1, 2), (2, 1)], 8)
    cc = alg.commutant(alg.commutant(a))
    x = np.random.default_rng(0).normal(size=(a.dim, a.dim))
    assert np.allclose(alg.project(cc, x), alg.project(a, x), atol=1e-12)


def test_tensor_is_associative():
    rng = np.random.default_rng(1)
    a, b, c = make([(1, 1), (1, 1)], 1), make([(2, 1)]), make([(1, 2)], 2)
    left = alg.tensor(alg.tensor(a, b), c)
    right = alg.tensor(a, alg.tensor(b, c))
    assert left.dim == right.dim == 8
    assert left.algebra_dim == right.algebra_dim == 2 * 4 * 1
    for _ in range(3):
        x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        assert np.allclose(alg.project(left, x), alg.project(right, x), atol=1e-12)


def test_tensor_contains_products():
    rng = np.random.default_rng(2)
    a, b = make([(1, 1), (2, 1)], 4), make([(1, 2)], 6)
    t = alg.tensor(a, b)
    xa, xb = random_element(a, rng).matrix(), random_element(b, rng).matrix()
    assert alg.is_member(np.kron(xa, xb), t)[0]


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shape=st.sampled_from(BLOCK_SHAPES))
def test_conditional_expectation_axioms(seed, shape):
    rng = np.random.default_rng(seed)
    a = make(shape, rng)
    d = a.dim
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m1, m2 = random_element(a, rng).matrix(), random_element(a, rng).matrix()
    ex = alg.project(a, x)
    # bimodule, idempotent, trace preserving, positive, HS-orthogonal
    assert np.allclose(alg.project(a, m1 @ x @ m2), m1 @ ex @ m2, atol=1e-9)
    assert np.allclose(alg.project(a, ex), ex, atol=1e-12)
    assert abs(np.trace(ex) - np.trace(x)) < 1e-9
    assert np.linalg.eigvalsh(alg.project(a, x.conj().T @ x)).min() > -1e-9
    assert abs(np.trace(m1.conj().T @ (x - ex))) < 1e-9
    assert np.allclose(alg.project(a, np.eye(d)), np.eye(d), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shape=st.sampled_from(BLOCK_SHAPES))
def test_embed_is_star_homomorphism(seed, shape):
    rng = np.random.default_rng(seed)
    a = make(shape, rng)
    x, y = random_element(a, rng), random_element(a, rng)
    assert np.allclose((x @ y).matrix(), x.matrix() @ y.matrix(), atol=1e-10)
    assert np.allclose(x.adjoint().matrix(), x.matrix().conj().T, atol=1e-12)
    assert np.allclose(alg.identity(a).matrix(), np.eye(a.dim), atol=1e-12)


def test_conditional_expectation_recovers_coefficients():
    rng = np.random.default_rng(3)
    a = make([(1, 2), (2, 1)], 9)
    el = random_element(a, rng)
    back = alg.conditional_expectation(a, el.matrix())
    for c, c2 in zip(el.coeffs, back.coeffs):
        assert np.allclose(c, c2, atol=1e-12)


def test_membership_residual_detects_outsiders():
    a = alg.diagonal_algebra(2)
    ok, res = alg.is_member(np.array([[0, 1], [1, 0]]), a)
    assert not ok and res == pytest.approx(np.sqrt(2))
    assert alg.is_member(np.diag([2, -1]), a) == (True, 0.0)


def test_restrict_plus_state_to_diagonal():
    plus = alg.pure_state([1, 1])
    r = alg.restrict_state(plus, alg.diagonal_algebra(2))
    assert [complex(b[0, 0]) for b in r.blocks] == pytest.approx([0.5, 0.5])
    assert r(np.array([[3, 7], [7, 5]])) == pytest.approx(4.0)


def test_restricted_state_agrees_with_trace_pairing():
    rng = np.random.default_rng(4)
    a = make([(1, 2), (2, 1)], 12)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    r = alg.restrict_state(alg.make_state(rho), a)
    el = random_element(a, rng)
    assert r(el) == pytest.approx(np.trace(rho @ el.matrix()))


def test_block_shapes_of_full_and_diagonal():
    assert alg.full_algebra(3).is_full
    assert alg.diagonal_algebra(3).algebra_dim == 3
    assert make([(2, 2)]).dim == 4 and not make([(2, 2)]).is_full


def test_validation_errors():
    with pytest.raises(NonUnitaryBasisChange):
        alg.make_block_algebra([(2, 1)], np.array([[1, 1], [0, 1]]))
    with pytest.raises(DimensionMismatch):
        alg.make_block_algebra([(2, 1)], np.eye(3))
    with pytest.raises(DimensionMismatch):
        alg.element(alg.diagonal_algebra(2), [np.eye(1)])
    with pytest.raises(ValueError):
        alg.make_state(np.diag([1.5, -0.5]))


def test_double_commutant_block_multiset():
    a = make([(1, 2), (2, 1), (3, 1)], 13)
    assert sorted(alg.commutant(alg.commutant(a)).blocks) == sorted(a.blocks)


def test_empty_block_list_rejected():
    with pytest.raises(ValueError):
        alg.make_block_algebra([])
