"""Stratification of the bracket space by the energy of the moment map.

The stratum label beta of a bracket is obtained from the limit of the
negative gradient flow of ||m||^2 on the unit sphere, or alternatively from
the nilradical.  This module also provides the parabolic decomposition
attached to beta and the orthogonal gauge that moves a bracket into the
nonnegative part V^{>=0} of beta^+.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from scipy.linalg import expm

from .bracket_space import (
    Bracket,
    act,
    bracket_inner,
    bracket_norm,
    column_space,
    null_space,
    nilradical,
    pi_action,
    pi_tensor,
)
from .curvature import moment_map
from .errors import (
    DecompositionSingular,
    DimensionMismatch,
    FlatBracket,
    GaugeFailed,
    NoConvergence,
    ZeroBracket,
)

log = logging.getLogger(__name__)

CLUSTER_GAP = 1e-4
MAX_DENOM = 60
RATIONAL_TOL = 1e-6
EIG_TOL = 1e-9


# -- labels ---------------------------------------------------------------------------


def _clusters(values: np.ndarray, gap: float = CLUSTER_GAP) -> list[list[int]]:
    order = np.argsort(values, kind="stable")
    groups: list[list[int]] = []
    for idx in order:
        if groups and values[idx] - values[groups[-1][-1]] <= gap:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    return groups


def rationalize(
    values: Sequence[float],
    gap: float = CLUSTER_GAP,
    max_denom: int = MAX_DENOM,
    tol: float = RATIONAL_TOL,
) -> list[Fraction] | None:
    """Snap a trace -1 spectrum to rationals, one Fraction per entry.

    Returns None if some cluster has no rational within ``tol`` with
    denominator at most ``max_denom``, or the snapped trace is not -1.
    """
    vals = np.asarray(values, dtype=float)
    out: list[Fraction | None] = [None] * len(vals)
    for grp in _clusters(vals, gap):
        mean = float(np.mean(vals[grp]))
        fr = Fraction(mean).limit_denominator(max_denom)
        if abs(float(fr) - mean) > tol:
            return None
        for i in grp:
            out[i] = fr
    if sum(out) != -1:  # type: ignore[arg-type]
        return None
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class StratumLabel:
    """Diagonal stratum label beta (ascending) in a chosen orthonormal frame.

    ``eigenvectors`` holds, as columns, the frame vectors expressed in the
    coordinates of the bracket the label was computed from.  ``raw`` keeps
    the unsnapped spectrum.
    """

    beta: np.ndarray
    dim_h: int = 0
    eigenvectors: np.ndarray | None = None
    raw: np.ndarray | None = None
    info: dict = field(default_factory=dict, compare=False)

    @property
    def N(self) -> int:
        return int(self.beta.shape[0])

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.beta).copy()

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.beta * self.beta))

    @property
    def beta_plus(self) -> np.ndarray:
        return self.beta + self.norm_sq * np.eye(self.N)

    @property
    def trace_m(self) -> float:
        # beta|_h = -||beta||^2 Id_h, so tr_m beta|_m follows from tr beta = -1
        return float(np.trace(self.beta)) + self.dim_h * self.norm_sq

    @property
    def b(self) -> float:
        return -1.0 / self.trace_m

    @property
    def beta_m(self) -> np.ndarray:
        s = self.dim_h
        return self.b * self.beta[s:, s:]

    @property
    def beta_m_plus(self) -> np.ndarray:
        s = self.dim_h
        return self.b * self.beta_plus[s:, s:]

    def _groups(self) -> list[list[int]]:
        return _clusters(self.diag)

    @property
    def eigenvalues(self) -> list[float]:
        d = self.diag
        return [float(np.mean(d[g])) for g in self._groups()]

    @property
    def multiplicities(self) -> list[int]:
        return [len(g) for g in self._groups()]

    @property
    def rationalized(self) -> list[Fraction] | None:
        fr = rationalize(self.diag)
        if fr is None:
            return None
        return [fr[g[0]] for g in self._groups()]

    def to_dict(self) -> dict[str, Any]:
        rat = self.rationalized
        return {
            "beta": self.beta.tolist(),
            "eigenvalues": self.eigenvalues,
            "multiplicities": self.multiplicities,
            "rationalized": None if rat is None else [[f.numerator, f.denominator] for f in rat],
            "norm_sq": self.norm_sq,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], dim_h: int = 0) -> "StratumLabel":
        return cls(np.array(data["beta"], dtype=float), dim_h)

    @classmethod
    def from_diagonal(cls, values: Sequence[float], dim_h: int = 0) -> "StratumLabel":
        return cls(np.diag(np.sort(np.asarray(values, dtype=float))), dim_h)


def _snap(values: np.ndarray) -> np.ndarray:
    """Average clusters; replace by rationals when the rational fit succeeds."""
    values = np.sort(np.asarray(values, dtype=float))
    fr = rationalize(values)
    if fr is not None:
        return np.array([float(f) for f in fr])
    out = values.copy()
    for g in _clusters(values):
        out[g] = np.mean(values[g])
    return out


def _make_label(values: np.ndarray, vecs: np.ndarray, dim_h: int, info: dict, tol: float) -> StratumLabel:
    order = np.argsort(values, kind="stable")
    raw = np.asarray(values)[order]
    label = StratumLabel(np.diag(_snap(raw)), dim_h, vecs[:, order], raw, info)
    if label.trace_m >= -tol:
        raise FlatBracket(f"tr_m beta|_m = {label.trace_m:.3e}: every invariant metric is flat")
    return label


# -- energy and gradient flow -----------------------------------------------------------


def energy(mu: Bracket) -> float:
    """||m(mu)||^2."""
    m = moment_map(mu)
    return float(np.sum(m * m))


def energy_gradient(mu: Bracket) -> Bracket:
    """Gradient of ||m||^2 at mu: 4 (pi(m) mu - ||m||^2 mu) / ||mu||^2.

    It is orthogonal to mu, hence already tangent to the sphere.
    """
    n2 = bracket_inner(mu, mu)
    if n2 <= 0:
        raise ZeroBracket("energy gradient undefined at mu = 0")
    m = moment_map(mu)
    F = float(np.sum(m * m))
    return Bracket(4.0 * (pi_tensor(m, mu.c) - F * mu.c) / n2, mu.dim_h)


def _sym_basis(n: int) -> np.ndarray:
    out = []
    for a in range(n):
        for b in range(a, n):
            E = np.zeros((n, n))
            if a == b:
                E[a, a] = 1.0
            else:
                E[a, b] = E[b, a] = 1.0 / np.sqrt(2.0)
            out.append(E)
    return np.array(out)


def _descent_generator(m: np.ndarray, t: np.ndarray, basis: np.ndarray, tau: float) -> np.ndarray:
    """m minus its part along symmetric D that move t only radially (to O(tau)).

    Those D (scalars, and symmetric derivations near a critical point) barely
    change the projective direction of the step, but exponentiating them
    makes the accumulated group element ill-conditioned.  They are kept when
    they carry most of the descent, which happens next to a saddle.
    """
    T = np.array([pi_tensor(B, t).ravel() for B in basis]).T
    T -= np.outer(t.ravel(), t.ravel() @ T)
    _, sv, Vt = np.linalg.svd(T, full_matrices=False)
    coef = np.einsum("lij,ij->l", basis, m)
    proj = Vt @ coef
    small = sv <= tau * sv[0]
    full = float(np.sum((sv * proj) ** 2))
    kept = float(np.sum((sv[~small] * proj[~small]) ** 2))
    if kept >= 0.25 * full:
        drop = Vt[small]
        coef = coef - drop.T @ (drop @ coef)
    return np.einsum("l,lij->ij", coef, basis)


def gradient_flow_limit(
    mu: Bracket,
    tol_grad: float = 1e-10,
    max_steps: int = 1_000_000,
    step: float = 0.05,
    tau: float = 1e-6,
) -> tuple[Bracket, int]:
    """Negative gradient flow of ||m||^2 on the unit sphere, run to a critical point.

    The gradient is pi(4m) mu plus a radial term, so a step multiplies a
    group element g by exp(-4 eta A), with A the part of m that moves the
    bracket projectively, and the iterate is g . mu rescaled to norm one.

    The iterate is always recomputed from the initial bracket.  Directions
    leaving the Lie variety (or the orbit) typically have lower energy, so
    roundoff carried along in an iterated tensor gets amplified and the
    flow drifts to a wrong critical point.  The step halves whenever the
    energy fails to drop.
    """
    nrm = bracket_norm(mu)
    if nrm == 0.0:
        raise ZeroBracket("zero bracket has no stratum")
    c0 = mu.c / nrm
    s, N = mu.dim_h, mu.N
    basis = _sym_basis(N)

    def state(g: np.ndarray):
        gi = np.linalg.inv(g)
        t = np.einsum("abc,ai,bj,kc->ijk", c0, gi, gi, g, optimize=True)
        t /= np.sqrt(np.sum(t * t))
        m = moment_map(Bracket(t, s))
        F = float(np.sum(m * m))
        return t, F, m, 4.0 * (pi_tensor(m, t) - F * t)

    g = np.eye(N)
    c, F, m, grad = state(g)
    eta = step
    for it in range(max_steps):
        gn = float(np.sqrt(np.sum(grad * grad)))
        if gn < tol_grad:
            return Bracket(c, s), it
        A = _descent_generator(m, c, basis, tau)
        w, U = np.linalg.eigh(A)
        while True:
            g_new = ((U * np.exp(-4.0 * eta * w)) @ U.T) @ g
            g_new /= abs(np.linalg.det(g_new)) ** (1.0 / N)
            c_new, F_new, m_new, grad_new = state(g_new)
            if F_new < F - 1e-14 * F:
                break
            # Near the critical point the change of F drowns in roundoff (which
            # grows with the conditioning of g).  There, accept when the slope
            # along the path is still nonpositive, i.e. the step has not
            # overshot the minimum on that line.
            if abs(F_new - F) <= 1e-10 * F and np.sum(grad_new * pi_tensor(A, c_new)) >= 0.0:
                break
            eta *= 0.5
            if eta < 1e-14:
                if gn < 100.0 * tol_grad:
                    log.debug("gradient flow stopped at roundoff floor |grad| = %.3e", gn)
                    return Bracket(c, s), it
                raise NoConvergence(f"gradient step collapsed below 1e-14 (|grad| = {gn:.3e})")
        g, c, F, m, grad = g_new, c_new, F_new, m_new, grad_new
        eta = min(eta * 1.25, 1.0)
    raise NoConvergence(f"gradient norm still {gn:.3e} after {max_steps} steps")


def stratum_label(
    mu: Bracket,
    tol_grad: float = 1e-10,
    max_steps: int = 1_000_000,
    flat_tol: float = 1e-10,
) -> StratumLabel:
    """Stratum label from the gradient-flow limit of ||m||^2."""
    limit, steps = gradient_flow_limit(mu, tol_grad, max_steps)
    beta = moment_map(limit)
    w, U = np.linalg.eigh(0.5 * (beta + beta.T))
    info = {"method": "gradient_flow", "steps": steps, "limit": limit}
    return _make_label(w, U, mu.dim_h, info, flat_tol)


def _restrict(mu: Bracket, B: np.ndarray) -> Bracket:
    """Bracket induced on the span of the orthonormal columns of B (an ideal)."""
    return Bracket(np.einsum("abc,ai,bj,ck->ijk", mu.c, B, B, B, optimize=True), 0)


def beta_from_nilradical(
    mu: Bracket, tol_grad: float = 1e-10, flat_tol: float = 1e-10
) -> StratumLabel:
    """Label built from the nilradical n and its complement a."""
    if not np.any(mu.c):
        raise ZeroBracket("zero bracket has no stratum")
    n = nilradical(mu)
    N = mu.N
    if n.dim == N:
        lab = stratum_label(mu, tol_grad, flat_tol=flat_tol)
        lab.info["method"] = "nilradical(nilpotent)"
        return lab
    Bn = n.basis
    Ba = n.complement().basis
    a = Ba.shape[1]
    nu = _restrict(mu, Bn)
    if n.dim == 0 or not np.any(np.abs(nu.c) > 1e-12 * bracket_norm(mu)):
        vals = np.concatenate([-np.ones(a) / a, np.zeros(n.dim)])
        vecs = np.hstack([Ba, Bn])
    else:
        lab_n = stratum_label(nu, tol_grad, flat_tol=-np.inf)
        bn = lab_n.diag
        nn = float(np.sum(bn**2))
        bb = 1.0 / (1.0 + a * nn)
        vals = bb * np.concatenate([-nn * np.ones(a), bn])
        vecs = np.hstack([Ba, Bn @ lab_n.eigenvectors])
    info = {"method": "nilradical", "dim_a": a, "dim_n": n.dim}
    return _make_label(vals, vecs, mu.dim_h, info, flat_tol)


# -- parabolic decomposition ---------------------------------------------------------------


def _eig_frame(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beta = np.asarray(beta, dtype=float)
    off = beta - np.diag(np.diag(beta))
    if not np.any(off):
        return np.diag(beta).copy(), np.eye(beta.shape[0])
    w, U = np.linalg.eigh(0.5 * (beta + beta.T))
    return w, U


@dataclass(frozen=True)
class BetaGroups:
    """Bases (lists of matrices) of the Lie algebras attached to beta."""

    beta: np.ndarray
    eigvals: np.ndarray
    frame: np.ndarray
    g_beta: list[np.ndarray]
    u_beta: list[np.ndarray]
    q_beta: list[np.ndarray]
    h_beta: list[np.ndarray]
    k_complement: list[np.ndarray]
    isotropy: tuple = ()

    @property
    def n(self) -> int:
        return int(self.beta.shape[0])

    def is_coordinate(self) -> bool:
        return not self.isotropy and np.array_equal(self.frame, np.eye(self.n))

    def in_q(self, A: np.ndarray, tol: float = 1e-10) -> bool:
        return _in_span(A, self.q_beta, tol)


def _in_span(A: np.ndarray, basis: list[np.ndarray], tol: float) -> bool:
    if not basis:
        return float(np.linalg.norm(A)) <= tol
    M = np.array([B.ravel() for B in basis]).T
    coef, *_ = np.linalg.lstsq(M, A.ravel(), rcond=None)
    return float(np.linalg.norm(M @ coef - A.ravel())) <= tol * max(1.0, float(np.linalg.norm(A)))


def _commutant(basis: list[np.ndarray], gens: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Elements of span(basis) commuting with every generator."""
    if not gens or not basis:
        return basis
    cols = []
    for B in basis:
        cols.append(np.concatenate([(B @ Z - Z @ B).ravel() for Z in gens]))
    null = null_space(np.array(cols).T, atol=1e-12)
    out = [sum(coef[i] * basis[i] for i in range(len(basis))) for coef in null.T]
    return _orthonormal(out)


def _orthonormal(mats: list[np.ndarray]) -> list[np.ndarray]:
    if not mats:
        return []
    shape = mats[0].shape
    Q = column_space(np.array([M.ravel() for M in mats]).T)
    return [Q[:, i].reshape(shape) for i in range(Q.shape[1])]


def beta_groups(
    beta: np.ndarray | StratumLabel,
    isotropy: Sequence[np.ndarray] = (),
    tol: float = EIG_TOL,
) -> BetaGroups:
    """Decompose gl into g_beta, u_beta, q_beta, h_beta and the complement k.

    ``isotropy`` is an optional list of matrices (ad Z restricted to m);
    when given every space is intersected with their commutant.
    """
    if isinstance(beta, StratumLabel):
        beta = beta.beta
    beta = np.asarray(beta, dtype=float)
    n = beta.shape[0]
    w, U = _eig_frame(beta)

    def E(i: int, j: int) -> np.ndarray:
        return np.outer(U[:, i], U[:, j])

    g, u, so_q, k = [], [], [], []
    for i in range(n):
        for j in range(n):
            if abs(w[i] - w[j]) <= tol:
                g.append(E(i, j))
            elif w[i] > w[j]:
                u.append(E(i, j))
            if i < j:
                X = (E(i, j) - E(j, i)) / np.sqrt(2.0)
                (so_q if abs(w[i] - w[j]) <= tol else k).append(X)
    # h_beta: elements of g_beta orthogonal to beta
    coeffs = np.array([[float(np.sum(G * beta)) for G in g]])
    hb = null_space(coeffs, atol=1e-14) if np.any(coeffs) else np.eye(len(g))
    h = [sum(c[i] * g[i] for i in range(len(g))) for c in hb.T]
    gens = tuple(np.asarray(Z, dtype=float) for Z in isotropy)
    if gens:
        g, u, h = _commutant(g, gens), _commutant(u, gens), _commutant(h, gens)
        so_all = _commutant(so_q + k, gens)
        so_q = _commutant(so_q, gens)
        # complement of so_q inside so^H
        k = _orth_complement_in(so_all, so_q)
    return BetaGroups(beta, w, U, g, u, g + u, h, k, gens)


def _orth_complement_in(big: list[np.ndarray], small: list[np.ndarray]) -> list[np.ndarray]:
    if not big:
        return []
    shape = big[0].shape
    Bm = np.array([M.ravel() for M in big]).T
    ref = float(np.linalg.norm(Bm))
    if small:
        Sm = column_space(np.array([M.ravel() for M in small]).T)
        Bm = Bm - Sm @ (Sm.T @ Bm)
    Q = column_space(Bm, atol=1e-10 * ref)
    return [Q[:, i].reshape(shape) for i in range(Q.shape[1])]


def x_q_projection(A: np.ndarray, groups: BetaGroups, method: str = "auto", tol: float = 1e-9) -> np.ndarray:
    """k-component of A in the splitting A = A_k + A_q (k inside so)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (groups.n, groups.n):
        raise DimensionMismatch("matrix does not match beta")
    if method == "auto" and not groups.isotropy:
        w, U = groups.eigvals, groups.frame
        Ap = U.T @ A @ U
        K = np.zeros_like(Ap)
        lower = w[:, None] > w[None, :] + EIG_TOL
        # upper entries (j, i) with w_j < w_i must come from k
        K.T[lower] = Ap.T[lower]
        K[lower] = -Ap.T[lower]
        return U @ K @ U.T
    basis = groups.k_complement + groups.q_beta
    M = np.array([B.ravel() for B in basis]).T
    if M.shape[1] and np.linalg.matrix_rank(M, tol=1e-10) < M.shape[1]:
        raise DecompositionSingular("k and q are not complementary")
    coef, *_ = np.linalg.lstsq(M, A.ravel(), rcond=None)
    if float(np.linalg.norm(M @ coef - A.ravel())) > tol * max(1.0, float(np.linalg.norm(A))):
        raise DecompositionSingular("matrix is outside k + q")
    nk = len(groups.k_complement)
    out = np.zeros_like(A)
    for c, B in zip(coef[:nk], groups.k_complement):
        out += c * B
    return out


# -- V^{>=0} and the projection p_beta ---------------------------------------------------------


def _beta_plus(beta: np.ndarray | StratumLabel) -> np.ndarray:
    if isinstance(beta, StratumLabel):
        return beta.beta_plus
    beta = np.asarray(beta, dtype=float)
    return beta + float(np.sum(beta * beta)) * np.eye(beta.shape[0])


def _component_eigs(d: np.ndarray) -> np.ndarray:
    """Eigenvalue of pi(diag(d)) on e^i ^ e^j (x) e_k: d_k - d_i - d_j."""
    return d[None, None, :] - d[:, None, None] - d[None, :, None]


def _in_frame(mu: Bracket, beta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bp = _beta_plus(beta)
    if bp.shape != (mu.N, mu.N):
        raise DimensionMismatch("beta and bracket sizes differ")
    d, U = _eig_frame(bp)
    c = mu.c if np.array_equal(U, np.eye(mu.N)) else act(U.T, mu).c
    return c, _component_eigs(d), U


def eigencomponents(mu: Bracket, beta, tol: float = 1e-9) -> list[tuple[float, float]]:
    """(eigenvalue of pi(beta^+), squared norm of the component) pairs."""
    c, r, _ = _in_frame(mu, beta)
    mask = c != 0
    vals = r[mask]
    weights = c[mask] ** 2
    out: list[tuple[float, float]] = []
    for grp in _clusters(vals, tol):
        out.append((float(np.mean(vals[grp])), float(np.sum(weights[grp]))))
    return out


def negative_mass(mu: Bracket, beta, tol: float = 1e-9) -> float:
    """Squared norm of the components in negative eigenspaces of pi(beta^+)."""
    c, r, _ = _in_frame(mu, beta)
    return float(np.sum(c[r < -tol] ** 2))


def project_p_beta(mu: Bracket, beta, tol: float = 1e-9) -> Bracket:
    """p_beta(mu): keep only the kernel component of pi(beta^+).

    For mu in V^{>=0} this is lim exp(-t beta^+) . mu.
    """
    c, r, U = _in_frame(mu, beta)
    kept = Bracket(np.where(np.abs(r) <= tol, c, 0.0), mu.dim_h)
    if np.array_equal(U, np.eye(mu.N)):
        return kept
    return act(U, kept)


def p_beta_limit(mu: Bracket, beta, t: float = 40.0) -> Bracket:
    return act(expm(-t * _beta_plus(beta)), mu)


def semistability_probe(mu: Bracket, label: StratumLabel, iters: int = 2000, step: float = 0.1) -> dict:
    """Descend ||exp(A) . p_beta(mu)|| over symmetric A in h_beta.

    A positive floor is evidence that p_beta(mu) is semistable for the
    action of the reductive part.
    """
    nu = project_p_beta(mu, label)
    n0 = bracket_norm(nu)
    if n0 == 0.0:
        return {"initial": 0.0, "floor": 0.0, "ratio": 0.0, "iterations": 0}
    groups = beta_groups(label)
    symh = _orthonormal([0.5 * (A + A.T) for A in groups.h_beta if np.any(A + A.T)])
    cur = nu
    best = n0
    it = 0
    for it in range(iters):
        m = moment_map(cur)
        G = sum(float(np.sum(m * B)) * B for B in symh) if symh else np.zeros_like(m)
        if float(np.linalg.norm(G)) < 1e-12:
            break
        cur = act(expm(-step * G), cur)
        best = min(best, bracket_norm(cur))
    return {"initial": n0, "floor": best, "ratio": best / n0, "iterations": it + 1}


# -- gauge into V^{>=0} -----------------------------------------------------------------


def _lower_central_layers(mu: Bracket, Bn: np.ndarray) -> list[np.ndarray]:
    """Orthonormal layers n = L1 + L2 + ... adapted to the lower central series."""
    series = [Bn]
    while series[-1].shape[1] > 0:
        cur = series[-1]
        vecs = np.einsum("abc,ai,bj->cij", mu.c, Bn, cur).reshape(mu.N, -1)
        nxt = column_space(vecs) if np.any(np.abs(vecs) > 1e-12) else np.zeros((mu.N, 0))
        if nxt.shape[1] >= cur.shape[1]:
            break
        series.append(nxt)
    layers = []
    for big, small in zip(series, series[1:] + [np.zeros((mu.N, 0))]):
        if small.shape[1]:
            comp = big - small @ (small.T @ big)
        else:
            comp = big
        layers.append(column_space(comp))
    return layers


def _constructive_gauge(mu: Bracket, label: StratumLabel, tol: float) -> np.ndarray | None:
    N, s = mu.N, mu.dim_h
    d = np.diag(label.beta_plus)
    a_pos = [i for i in range(N) if abs(d[i]) <= 1e-9]
    n_pos = [i for i in range(N) if abs(d[i]) > 1e-9]
    n_pos.sort(key=lambda i: d[i])
    nil = nilradical(mu)
    if nil.dim != len(n_pos):
        return None
    Ba = nil.complement().basis
    if s:
        Bh = np.eye(N)[:, :s]
        if np.linalg.norm(nil.basis[:s, :]) > 1e-10:
            return None
        rest = Ba - Bh @ (Bh.T @ Ba)
        Ba = np.hstack([Bh, column_space(rest)])
        if Ba.shape[1] != len(a_pos) or a_pos[:s] != list(range(s)):
            return None
    layers = _lower_central_layers(mu, nil.basis) if nil.dim else []
    Bn = np.hstack(layers) if layers else np.zeros((N, 0))
    if Bn.shape[1] != nil.dim:
        return None
    k = np.zeros((N, N))
    for row, pos in enumerate(a_pos):
        k[pos] = Ba[:, row]
    for row, pos in enumerate(n_pos):
        k[pos] = Bn[:, row]
    return k


def _local_search(mu: Bracket, label: StratumLabel, tol: float, restarts: int, seed: int) -> np.ndarray | None:
    N, s = mu.N, mu.dim_h
    d = np.diag(label.beta_plus)
    r = _component_eigs(d)
    neg = r < -1e-9
    gens = []
    for a in range(N):
        for b in range(a + 1, N):
            if (a < s) != (b < s):
                continue  # keep the h/m splitting
            X = np.zeros((N, N))
            X[a, b], X[b, a] = 1.0, -1.0
            gens.append(X)
    rng = np.random.default_rng(seed)
    scale = bracket_inner(mu, mu)

    def f(c):
        return float(np.sum(c[neg] ** 2))

    def rand_orth():
        k = np.eye(N)
        for lo, hi in ((0, s), (s, N)):
            if hi - lo:
                q, rr = np.linalg.qr(rng.standard_normal((hi - lo, hi - lo)))
                k[lo:hi, lo:hi] = q * np.sign(np.diag(rr))
        return k

    for attempt in range(restarts):
        k = np.eye(N) if attempt == 0 else rand_orth()
        c = act(k, mu).c
        val = f(c)
        eta = 0.5 / max(scale, 1e-300)
        for _ in range(3000):
            if val <= tol * scale:
                return k
            P = np.where(neg, c, 0.0)
            grad = np.array([2.0 * float(np.sum(P * pi_tensor(X, c))) for X in gens])
            G = sum(gi * X for gi, X in zip(grad, gens))
            while eta > 1e-16:
                kn = expm(-eta * G) @ k
                cn = act(kn, mu).c
                vn = f(cn)
                if vn < val:
                    k, c, val = kn, cn, vn
                    eta *= 1.5
                    break
                eta *= 0.5
            else:
                break
        if val <= tol * scale:
            return k
    return None


def gauge_to_Vnn(
    mu: Bracket,
    label: StratumLabel,
    tol: float = 1e-16,
    restarts: int = 50,
    seed: int = 0,
) -> tuple[np.ndarray, Bracket]:
    """Orthogonal k with k . mu in V^{>=0} of the (diagonal) label.

    Tries the identity, then a nilradical-adapted frame, then a local
    search on the orthogonal group.  ``tol`` bounds the negative mass
    relative to ||mu||^2.
    """
    if label.N != mu.N:
        raise DimensionMismatch("label and bracket sizes differ")
    scale = bracket_inner(mu, mu)
    if scale == 0.0:
        raise ZeroBracket("cannot gauge the zero bracket")
    if negative_mass(mu, label) <= tol * scale:
        return np.eye(mu.N), mu
    k = _constructive_gauge(mu, label, tol)
    if k is not None:
        nu = act(k, mu)
        if negative_mass(nu, label) <= tol * scale:
            return k, nu
    k = _local_search(mu, label, max(tol, 1e-24), restarts, seed)
    if k is None:
        raise GaugeFailed("no orthogonal frame puts the bracket in V^{>=0}")
    nu = act(k, mu)
    log.debug("gauge via local search, negative mass %.3e", negative_mass(nu, label))
    return k, nu


def isotropy_generators(mu: Bracket) -> list[np.ndarray]:
    """ad(Z)|_m for the basis vectors Z of h."""
    s = mu.dim_h
    return [mu.ad(i)[s:, s:] for i in range(s)]


def pi_matrix(A: np.ndarray, mu: Bracket) -> Bracket:  # pragma: no cover - thin alias
    return pi_action(A, mu)
