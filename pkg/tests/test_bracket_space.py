import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bracketflow import catalog
from bracketflow.bracket_space import (
    Bracket,
    act,
    bracket_inner,
    bracket_norm,
    derivation_algebra,
    derivation_residual,
    derived_algebra,
    is_ideal,
    jacobi_residual,
    killing_form,
    make_bracket,
    nilradical,
    norm_mu_h,
    norm_mu_m,
    pi_action,
    radical,
    random_bracket,
    scale_bracket,
    splitting_defect,
)
from bracketflow.errors import (
    ConflictingEntry,
    DimensionMismatch,
    IndexOutOfRange,
    NonpositiveScale,
    SingularMatrix,
    SplittingViolation,
)
from scipy.linalg import expm

from conftest import random_lie_bracket
from oracles import act_loops, jacobi_bruteforce

small_floats = st.floats(-2.0, 2.0, allow_nan=False)


def well_conditioned(n):
    return arrays(np.float64, (n, n), elements=st.floats(-0.3, 0.3)).map(lambda a: np.eye(n) + a)


# -- construction ------------------------------------------------------------------


def test_make_bracket_antisymmetric_partner():
    mu = make_bracket(0, 3, [(1, 2, 3, 2.5)])
    assert mu.c[0, 1, 2] == 2.5 and mu.c[1, 0, 2] == -2.5
    assert np.count_nonzero(mu.c) == 2


def test_make_bracket_errors():
    with pytest.raises(IndexOutOfRange):
        make_bracket(0, 3, [(1, 4, 2, 1.0)])
    with pytest.raises(ConflictingEntry):
        make_bracket(0, 3, [(1, 2, 3, 1.0), (1, 2, 3, 2.0)])
    with pytest.raises(ConflictingEntry):
        make_bracket(0, 3, [(2, 2, 3, 1.0)])
    with pytest.raises(DimensionMismatch):
        make_bracket(0, 3, [(1, 2, 3)])
    # repeating an entry with the same value is harmless
    make_bracket(0, 3, [(1, 2, 3, 1.0), (1, 2, 3, 1.0)])


def test_splitting_rules():
    # [h, m] -> m and [m, m] -> h are fine
    make_bracket(1, 2, [(1, 2, 3, 1.0), (2, 3, 1, 1.0)], homogeneous=True)
    with pytest.raises(SplittingViolation):
        make_bracket(1, 2, [(1, 2, 1, 1.0)], homogeneous=True)
    loose = make_bracket(1, 2, [(1, 2, 1, 1.0)])
    assert splitting_defect(loose) > 0 and not loose.splitting_compatible


def test_bracket_is_read_only():
    mu = catalog.get("heis3").bracket
    with pytest.raises(ValueError):
        mu.c[0, 1, 2] = 7.0


def test_json_roundtrip():
    mu = catalog.get("h2_isotropy").bracket
    back = Bracket.from_json(mu.to_json(), homogeneous=True)
    assert np.array_equal(back.c, mu.c) and back.dim_h == 1
    data = json.loads(mu.to_json())
    assert all(e[0] < e[1] for e in data["entries"])


def test_norms_split_by_block():
    mu = catalog.get("h2_isotropy").bracket
    # ordered pairs: 2 * (4 + 4 + 4)
    assert bracket_norm(mu) ** 2 == pytest.approx(24.0)
    # [X, Y] = 2Z lands in h, so only the h part of mu restricted to m survives
    assert norm_mu_m(mu) == 0.0
    assert norm_mu_h(mu) ** 2 == pytest.approx(8.0)
    mixed = make_bracket(1, 2, [(2, 3, 1, 1.0), (2, 3, 3, 3.0)])
    assert norm_mu_m(mixed) ** 2 == pytest.approx(18.0)
    assert norm_mu_h(mixed) ** 2 == pytest.approx(2.0)


def test_heisenberg_norm_counts_ordered_pairs():
    assert bracket_inner(catalog.get("heis3").bracket, catalog.get("heis3").bracket) == 2.0


# -- actions -------------------------------------------------------------------------


def test_act_matches_loops(rng):
    mu = random_bracket(rng, 4)
    h = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    assert np.allclose(act(h, mu).c, act_loops(h, mu.c), atol=1e-12)


def test_act_singular():
    with pytest.raises(SingularMatrix):
        act(np.zeros((3, 3)), catalog.get("heis3").bracket)
    with pytest.raises(DimensionMismatch):
        act(np.eye(5), catalog.get("heis3").bracket)


def test_act_small_matrix_keeps_h():
    mu = catalog.get("h2_isotropy").bracket
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    nu = act(R, mu)
    full = np.eye(3)
    full[1:, 1:] = R
    assert np.allclose(nu.c, act(full, mu).c)
    assert nu.splitting_compatible


def test_pi_is_derivative_of_action(rng):
    mu = random_lie_bracket(rng)
    A = rng.standard_normal((mu.N, mu.N))
    eps = 1e-6
    fd = (act(expm(eps * A), mu).c - act(expm(-eps * A), mu).c) / (2 * eps)
    assert np.allclose(pi_action(A, mu).c, fd, atol=1e-7)


def test_pi_vanishes_on_derivations():
    mu = catalog.get("r_heis3").bracket
    for D in derivation_algebra(mu):
        assert np.linalg.norm(pi_action(D, mu).c) < 1e-10
    assert derivation_residual(mu, np.diag([0.0, 1.0, 1.0, 2.0])) < 1e-12


@settings(max_examples=40, deadline=None)
@given(well_conditioned(3), well_conditioned(3))
def test_action_is_a_group_action(h1, h2):
    mu = catalog.get("sl2r").bracket
    assert np.allclose(act(h1 @ h2, mu).c, act(h1, act(h2, mu)).c, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(well_conditioned(3), arrays(np.float64, (3, 3), elements=small_floats))
def test_pi_equivariance(h, A):
    # pi(h A h^-1)(h . mu) = h . (pi(A) mu)
    mu = catalog.get("e11").bracket
    lhs = pi_action(h @ A @ np.linalg.inv(h), act(h, mu)).c
    rhs = act(h, pi_action(A, mu)).c
    assert np.allclose(lhs, rhs, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_orthogonal_action_preserves_inner_product(seed):
    rng = np.random.default_rng(seed)
    mu, eta = random_bracket(rng, 4), random_bracket(rng, 4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert bracket_inner(act(q, mu), act(q, eta)) == pytest.approx(bracket_inner(mu, eta), rel=1e-10)


# -- scaling -----------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 20.0))
def test_scale_matches_action(c):
    mu = catalog.get("h2_isotropy").bracket
    assert np.allclose(scale_bracket(mu, c).c, act(np.eye(2) / c, mu).c, rtol=1e-12, atol=1e-12)


def test_scale_law_by_block():
    mu = catalog.get("h2_isotropy").bracket
    nu = scale_bracket(mu, 3.0)
    # [m, m] -> m picks up c, [m, m] -> h picks up c^2, [h, m] -> m is unchanged
    assert nu.c[1, 2, 0] == pytest.approx(9.0 * mu.c[1, 2, 0])
    assert nu.c[0, 1, 2] == pytest.approx(mu.c[0, 1, 2])
    with pytest.raises(NonpositiveScale):
        scale_bracket(mu, 0.0)


# -- Jacobi and structure ------------------------------------------------------------------


@pytest.mark.parametrize("name", catalog.names())
def test_catalog_entries_are_lie(name):
    mu = catalog.get(name).bracket
    assert jacobi_residual(mu) < 1e-12
    assert jacobi_bruteforce(mu.c) < 1e-12


def test_jacobi_matches_bruteforce(rng):
    for _ in range(3):
        mu = random_bracket(rng, 4)
        assert jacobi_residual(mu) == pytest.approx(jacobi_bruteforce(mu.c), rel=1e-10)
    assert not random_bracket(rng, 4).is_lie()


def test_jacobi_preserved_by_action(rng):
    assert jacobi_residual(random_lie_bracket(rng)) < 1e-10


def test_killing_form_su2():
    # ad e_i has eigenvalues 0, +-i, so B(e_i, e_i) = -2
    assert np.allclose(killing_form(catalog.get("su2").bracket), -2 * np.eye(3))


@pytest.mark.parametrize(
    "name, dim_derived, dim_rad, dim_nil",
    [
        ("heis3", 1, 3, 3),
        ("su2", 3, 0, 0),
        ("sl2r", 3, 0, 0),
        ("e2", 2, 3, 2),
        ("e11", 2, 3, 2),
        ("r_heis3", 3, 4, 3),
        ("hyp(4)", 3, 4, 3),
        ("abelian(3)", 0, 3, 3),
    ],
)
def test_structure_dimensions(name, dim_derived, dim_rad, dim_nil):
    mu = catalog.get(name).bracket
    assert derived_algebra(mu).dim == dim_derived
    assert radical(mu).dim == dim_rad
    n = nilradical(mu)
    assert n.dim == dim_nil
    assert is_ideal(mu, n)


def test_nilradical_of_r_heis3_is_heis():
    n = nilradical(catalog.get("r_heis3").bracket)
    assert not n.contains(np.array([1.0, 0, 0, 0]))
    for k in (1, 2, 3):
        assert n.contains(np.eye(4)[k])


def test_nilradical_is_basis_independent(rng):
    mu = catalog.get("r_heis3").bracket
    h = np.eye(4) + 0.4 * rng.standard_normal((4, 4))
    n = nilradical(mu).basis
    n2 = nilradical(act(h, mu))
    for col in (h @ n).T:
        assert n2.contains(col / np.linalg.norm(col))
