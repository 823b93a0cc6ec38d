"""Moment map, Killing form and Ricci curvature of a bracket.

All curvature quantities refer to the homogeneous space whose metric is
the background inner product restricted to m.  Matrices on m are
``dim_m x dim_m``; matrices on g are ``N x N``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .bracket_space import (
    Bracket,
    bracket_inner,
    bracket_norm,
    derivation_residual,
    jacobi_residual,
    killing_form,
    pi_action,
    splitting_defect,
)
from .errors import (
    DimensionMismatch,
    NotALieBracket,
    ScalModNonnegative,
    SplittingViolation,
    ZeroBracket,
)

LIE_TOL = 1e-9


def sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def moment_unnormalized(mu: Bracket) -> np.ndarray:
    """-1/2 sum ad(e_i)^t ad(e_i) + 1/4 sum ad(e_i) ad(e_i)^t on g."""
    c = mu.c
    m1 = np.einsum("aij,bij->ab", c, c)
    m2 = np.einsum("ija,ijb->ab", c, c)
    return -0.5 * m1 + 0.25 * m2


def moment_map(mu: Bracket) -> np.ndarray:
    """Normalized moment map m(mu); trace is -1 for every mu != 0."""
    n2 = bracket_inner(mu, mu)
    if n2 <= 0.0:
        raise ZeroBracket("moment map is undefined at mu = 0")
    return 4.0 * moment_unnormalized(mu) / n2


def moment_duality_residual(mu: Bracket, A: np.ndarray) -> float:
    """|<m(mu), A> - <pi(A) mu, mu> / ||mu||^2| for symmetric A."""
    lhs = float(np.sum(moment_map(mu) * A))
    rhs = bracket_inner(pi_action(A, mu), mu) / bracket_inner(mu, mu)
    return abs(lhs - rhs)


def _M_from_tensor(cm: np.ndarray) -> np.ndarray:
    return -0.5 * np.einsum("aij,bij->ab", cm, cm) + 0.25 * np.einsum("ija,ijb->ab", cm, cm)


def M_m(mu: Bracket) -> np.ndarray:
    """Moment-type matrix of the m-component mu_m on m."""
    return _M_from_tensor(mu.mu_m)


def P_h(mu: Bracket) -> np.ndarray:
    """<P X, X> = 1/2 sum_{i,j} <mu(X, E_i), Z_j>^2 on m."""
    ch = mu.mu_h
    return 0.5 * np.einsum("aij,bij->ab", ch, ch)


def mean_curvature(mu: Bracket) -> np.ndarray:
    """Vector H in m with <H, X> = tr ad_mu X."""
    tr = np.einsum("ijj->i", mu.c)
    return tr[mu.dim_h :].copy()


def _parts(c: np.ndarray, s: int):
    """(Ric~, Ric, H) straight from a tensor; no validation."""
    cm = c[s:, s:, s:]
    M = _M_from_tensor(cm)
    K = np.einsum("ijk,lkj->il", c, c)  # tr(ad e_i ad e_l)
    ric_mod = M - 0.5 * K[s:, s:]
    H = np.einsum("ijj->i", c)[s:]
    adH = np.einsum("i,ijk->kj", H, cm)
    ric = ric_mod - sym(adH)
    return ric_mod, ric, H


def ricci_fast(c: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    ric_mod, ric, _ = _parts(c, s)
    return ric_mod, ric


def _validate(mu: Bracket) -> None:
    if jacobi_residual(mu) > LIE_TOL * max(1.0, bracket_norm(mu) ** 2):
        raise NotALieBracket("Jacobi identity fails")
    if splitting_defect(mu) > 1e-10 * max(1.0, bracket_norm(mu)):
        raise SplittingViolation("bracket does not preserve the h/m splitting")


def ricci_mod(mu: Bracket, check: bool = True) -> np.ndarray:
    if check:
        _validate(mu)
    return _parts(mu.c, mu.dim_h)[0]


def ricci(mu: Bracket, check: bool = True) -> np.ndarray:
    if check:
        _validate(mu)
    return _parts(mu.c, mu.dim_h)[1]


def scal_mod(mu: Bracket, check: bool = True) -> float:
    return float(np.trace(ricci_mod(mu, check)))


def scal(mu: Bracket, check: bool = True) -> float:
    return float(np.trace(ricci(mu, check)))


@dataclass(frozen=True)
class CurvatureReport:
    killing: np.ndarray
    moment: np.ndarray | None
    M_m: np.ndarray
    P_h: np.ndarray
    mean_curv: np.ndarray
    ric: np.ndarray
    ric_mod: np.ndarray
    scal: float
    scal_mod: float

    def to_dict(self) -> dict[str, Any]:
        def conv(v):
            if v is None:
                return None
            if isinstance(v, np.ndarray):
                return v.tolist()
            return float(v)

        return {k: conv(getattr(self, k)) for k in self.__dataclass_fields__}


def curvature_report(mu: Bracket, check: bool = True) -> CurvatureReport:
    if check:
        _validate(mu)
    ric_mod, ric, H = _parts(mu.c, mu.dim_h)
    moment = moment_map(mu) if np.any(mu.c) else None
    return CurvatureReport(
        killing=killing_form(mu),
        moment=moment,
        M_m=M_m(mu),
        P_h=P_h(mu),
        mean_curv=H,
        ric=ric,
        ric_mod=ric_mod,
        scal=float(np.trace(ric)),
        scal_mod=float(np.trace(ric_mod)),
    )


def m_identity_check(mu: Bracket) -> float:
    """|| (unnormalized moment)|_m - (M_m - P_h) ||_F.

    Holds when h acts skew-symmetrically on m.
    """
    s = mu.dim_h
    lhs = moment_unnormalized(mu)[s:, s:]
    return float(np.linalg.norm(lhs - (M_m(mu) - P_h(mu))))


# -- estimates and classification ---------------------------------------------------


def _label_parts(label) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(beta^+ restricted to m, beta_m, beta_m^+) from a StratumLabel."""
    s = label.dim_h
    return label.beta_plus[s:, s:], label.beta_m, label.beta_m_plus


@dataclass(frozen=True)
class EstimateReport:
    pairing_beta_plus: float
    gap: float
    equality_residual: float
    scal_mod: float

    def to_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in self.__dataclass_fields__}


def estimates(mu: Bracket, label, check: bool = True) -> EstimateReport:
    """Curvature estimates relative to a stratum label.

    ``label`` must be expressed in the frame of ``mu`` (see
    :func:`bracketflow.stratification.gauge_to_Vnn`).
    """
    if label.N != mu.N or label.dim_h != mu.dim_h:
        raise DimensionMismatch("label and bracket disagree on dimensions")
    rm = ricci_mod(mu, check)
    sm = float(np.trace(rm))
    if sm >= 0.0:
        raise ScalModNonnegative(f"scal_mod = {sm:.3e} is not negative")
    bp_m, beta_m, _ = _label_parts(label)
    pairing = float(np.sum(rm * bp_m))
    gap = float(np.linalg.norm(rm) - abs(sm) * np.linalg.norm(beta_m))
    resid = float(np.linalg.norm(rm + sm * beta_m))
    return EstimateReport(pairing, gap, resid, sm)


@dataclass(frozen=True)
class Classification:
    kind: str  # "Flat" | "Soliton" | "Generic"
    residual: float
    c: float | None = None
    D: np.ndarray | None = None
    derivation_residual: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "residual": float(self.residual),
            "c": None if self.c is None else float(self.c),
            "D": None if self.D is None else np.asarray(self.D).tolist(),
            "derivation_residual": None
            if self.derivation_residual is None
            else float(self.derivation_residual),
        }


def classify(mu: Bracket, label, tol: float = 1e-8, check: bool = True) -> Classification:
    """Flat, semi-algebraic soliton (Ric~ = c Id + D) or generic.

    Residuals are absolute; callers comparing brackets at different
    scales should rescale first.
    """
    rm = ricci_mod(mu, check)
    nr = float(np.linalg.norm(rm))
    if nr < tol:
        return Classification("Flat", nr)
    sm = float(np.trace(rm))
    _, beta_m, _ = _label_parts(label)
    resid = float(np.linalg.norm(rm + sm * beta_m))
    if resid < tol:
        s = label.dim_h
        lam = abs(sm)
        c = -lam * float(np.sum(beta_m * beta_m))
        D = np.zeros((mu.N, mu.N))
        D[s:, s:] = lam * label.b * label.beta_plus[s:, s:]
        return Classification("Soliton", resid, c, D[s:, s:], derivation_residual(mu, D))
    return Classification("Generic", resid)
