import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bracketflow import catalog
from bracketflow.bracket_space import Bracket, act, make_bracket, random_bracket
from bracketflow.curvature import (
    classify,
    curvature_report,
    estimates,
    m_identity_check,
    mean_curvature,
    moment_duality_residual,
    moment_map,
    ricci,
    ricci_mod,
    scal,
    scal_mod,
)
from bracketflow.errors import DimensionMismatch, NotALieBracket, ScalModNonnegative, ZeroBracket
from bracketflow.stratification import StratumLabel, gauge_to_Vnn, stratum_label

from conftest import random_lie_bracket
from oracles import koszul_ricci, moment_from_duality, scal_formula

# Frozen values, each derived by hand from the structure constants.
FROZEN_RIC = {
    "heis3": [-0.5, -0.5, 0.5],
    "su2": [0.5, 0.5, 0.5],
    "hyp(2)": [-1.0, -1.0],
    "hyp(4)": [-3.0] * 4,
    "r_heis3": [-6.0, -4.5, -4.5, -7.5],
    "e2": [0.0, 0.0, 0.0],
}
FROZEN_RIC_MOD = {
    "hyp(2)": [-1.0, 0.0],
    "r_heis3": [-6.0, -0.5, -0.5, 0.5],
}


@pytest.mark.parametrize("name", sorted(FROZEN_RIC))
def test_ricci_frozen(name):
    mu = catalog.get(name).bracket
    assert np.allclose(ricci(mu), np.diag(FROZEN_RIC[name]), atol=1e-12)
    assert scal(mu) == pytest.approx(sum(FROZEN_RIC[name]), abs=1e-12)


@pytest.mark.parametrize("name", sorted(FROZEN_RIC_MOD))
def test_ricci_mod_frozen(name):
    mu = catalog.get(name).bracket
    assert np.allclose(ricci_mod(mu), np.diag(FROZEN_RIC_MOD[name]), atol=1e-12)


def test_mean_curvature_r_heis3():
    assert np.allclose(mean_curvature(catalog.get("r_heis3").bracket), [4.0, 0, 0, 0])
    assert np.allclose(mean_curvature(catalog.get("sl2r").bracket), 0.0)


@pytest.mark.parametrize("name", ["heis3", "sl2r", "su2", "e11", "r_heis3", "hyp(3)", "e2_eps"])
def test_ricci_matches_koszul(name, rng):
    mu = catalog.get(name).bracket
    assert np.allclose(ricci(mu), koszul_ricci(mu.c), atol=1e-12)
    # and at a random non-orthonormal frame
    h = np.eye(mu.N) + 0.3 * rng.standard_normal((mu.N, mu.N))
    nu = act(h, mu)
    assert np.allclose(ricci(nu), koszul_ricci(nu.c), atol=1e-9)
    assert scal(nu) == pytest.approx(scal_formula(nu.c), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["r_heis3", "sl2r", "e2_eps", "hyp(3)"]))
def test_ricci_symmetric_and_koszul_on_orbits(seed, name):
    mu = random_lie_bracket(np.random.default_rng(seed), name)
    R = ricci(mu)
    assert np.allclose(R, R.T, atol=1e-9 * max(1.0, np.abs(R).max()))
    assert np.allclose(R, koszul_ricci(mu.c), atol=1e-8 * max(1.0, np.abs(R).max()))


def test_scal_mod_relation():
    # scal = scal~ - |H|^2
    mu = catalog.get("r_heis3").bracket
    assert scal(mu) == pytest.approx(scal_mod(mu) - 16.0)


def test_homogeneous_hyperbolic_plane():
    mu = catalog.get("h2_isotropy").bracket
    assert np.allclose(ricci(mu), -4 * np.eye(2), atol=1e-12)
    assert m_identity_check(mu) < 1e-12


def test_rejects_non_lie():
    bad = make_bracket(0, 3, [(1, 2, 3, 1.0), (2, 3, 1, 1.0), (1, 3, 3, 1.0)])
    assert not bad.is_lie()
    with pytest.raises(NotALieBracket):
        ricci(bad)
    # unchecked evaluation still returns numbers
    assert np.all(np.isfinite(ricci(bad, check=False)))


# -- moment map ---------------------------------------------------------------------------


def test_moment_map_examples():
    assert np.allclose(moment_map(catalog.get("heis3").bracket), np.diag([-1.0, -1.0, 1.0]))
    assert np.allclose(moment_map(catalog.get("su2").bracket), -np.eye(3) / 3)
    with pytest.raises(ZeroBracket):
        moment_map(catalog.get("abelian(2)").bracket)


def test_moment_map_matches_duality_oracle(rng):
    for n in (2, 3, 5):
        mu = random_bracket(rng, n)
        assert np.allclose(moment_map(mu), moment_from_duality(mu.c), atol=1e-12)
        assert moment_duality_residual(mu, rng.standard_normal((n, n))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
def test_moment_map_equivariance_and_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    mu = random_bracket(rng, 4)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert np.allclose(moment_map(act(q, mu)), q @ moment_map(mu) @ q.T, atol=1e-10)
    assert np.allclose(moment_map(Bracket(c * mu.c, 0)), moment_map(mu), atol=1e-10)
    assert np.trace(moment_map(mu)) == pytest.approx(-1.0, abs=1e-12)


def test_report_serializes():
    rep = curvature_report(catalog.get("h2_isotropy").bracket)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["scal"] == pytest.approx(-8.0)
    assert set(d) >= {"killing", "moment", "M_m", "P_h", "ric", "ric_mod", "scal_mod"}


# -- estimates and classification ----------------------------------------------------------


def _gauged(name):
    mu = catalog.get(name).bracket
    lab = stratum_label(mu)
    _, nu = gauge_to_Vnn(mu, lab)
    return nu, lab


def test_estimates_equality_on_soliton():
    nu, lab = _gauged("heis3")
    rep = estimates(nu, lab)
    assert rep.equality_residual < 1e-12
    assert abs(rep.gap) < 1e-12
    assert rep.pairing_beta_plus >= -1e-14


def test_estimates_strict_on_generic():
    nu, lab = _gauged("sl2r")
    rep = estimates(nu, lab)
    assert rep.gap > 1e-3 and rep.equality_residual > 1e-3


def test_estimates_errors():
    nu, lab = _gauged("su2")
    with pytest.raises(ScalModNonnegative):
        estimates(nu, lab)
    with pytest.raises(DimensionMismatch):
        estimates(catalog.get("hyp(2)").bracket, lab)


@pytest.mark.parametrize("name", [n for n in catalog.names() if not n.startswith("abelian")])
def test_classify_matches_catalog(name):
    nu, lab = _gauged(name)
    cls = classify(nu, lab)
    assert cls.kind == catalog.get(name).kind
    if cls.kind == "Soliton":
        assert cls.derivation_residual < 1e-9
        assert cls.c < 0 or name == "su2"


def test_classify_flat_abelian():
    mu = catalog.get("abelian(3)").bracket
    assert classify(mu, StratumLabel.from_diagonal([-1.0, 0.0, 0.0])).kind == "Flat"


def test_soliton_constant_heis3():
    # Ric~ = c Id + D with c = -|scal~| |beta_m|^2 = -3/2 and D = diag(1, 1, 2)
    nu, lab = _gauged("heis3")
    cls = classify(nu, lab)
    assert cls.c == pytest.approx(-1.5)
    assert np.allclose(np.sort(np.diag(cls.D)), [1.0, 1.0, 2.0])
