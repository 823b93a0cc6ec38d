"""Skew-symmetric brackets on g = h + m and the linear actions on them.

A bracket is stored as a dense structure-constant tensor ``c`` of shape
``(N, N, N)`` with ``c[i, j, k] = <mu(e_i, e_j), e_k>`` in a fixed
orthonormal basis whose first ``dim_h`` vectors span h and the remaining
``dim_m`` span m.  Indices are 0-based internally and 1-based in JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConflictingEntry,
    DimensionMismatch,
    IndexOutOfRange,
    NonpositiveScale,
    SingularMatrix,
    SplittingViolation,
)

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class Subspace:
    """Linear subspace given by an orthonormal basis (columns)."""

    basis: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.basis.shape[1])

    @property
    def ambient_dim(self) -> int:
        return int(self.basis.shape[0])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def complement(self) -> "Subspace":
        return Subspace(orth_complement(self.basis, self.ambient_dim))

    def contains(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        r = x - self.projector() @ x
        return float(np.linalg.norm(r)) <= tol * max(1.0, float(np.linalg.norm(x)))


def column_space(vectors: np.ndarray, rtol: float = RANK_RTOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis (columns) of the span of the columns of ``vectors``."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = vectors.shape[0]
    if vectors.size == 0 or not np.any(vectors):
        return np.zeros((n, 0))
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(s > max(rtol * s[0], atol)))
    return u[:, :rank]


def null_space(mat: np.ndarray, rtol: float = RANK_RTOL, atol: float = 0.0) -> np.ndarray:
    """Orthonormal basis of ker(mat); thresholds are relative to sigma_max."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    ncols = mat.shape[1]
    if mat.shape[0] == 0 or not np.any(mat):
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(mat, full_matrices=True)
    thresh = max(rtol * s[0], atol)
    rank = int(np.sum(s > thresh))
    return vt[rank:].T.copy()


def orth_complement(basis: np.ndarray, n: int) -> np.ndarray:
    if basis.shape[1] == 0:
        return np.eye(n)
    return null_space(basis.T)


@dataclass(frozen=True)
class Bracket:
    """Structure-constant tensor plus the h/m splitting sizes."""

    c: np.ndarray
    dim_h: int = 0

    def __post_init__(self) -> None:
        c = np.array(self.c, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise DimensionMismatch(f"structure tensor must be N x N x N, got {c.shape}")
        if not 0 <= self.dim_h <= c.shape[0]:
            raise DimensionMismatch(f"dim_h={self.dim_h} incompatible with N={c.shape[0]}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    # sizes
    @property
    def N(self) -> int:
        return int(self.c.shape[0])

    @property
    def dim_m(self) -> int:
        return self.N - self.dim_h

    # blocks
    @property
    def mu_m(self) -> np.ndarray:
        """m x m -> m part, as a dim_m^3 tensor."""
        s = self.dim_h
        return self.c[s:, s:, s:]

    @property
    def mu_h(self) -> np.ndarray:
        """m x m -> h part, shape (dim_m, dim_m, dim_h)."""
        s = self.dim_h
        return self.c[s:, s:, :s]

    def ad(self, x: np.ndarray | int) -> np.ndarray:
        """Matrix of ad_mu(x) = mu(x, .), column convention."""
        if isinstance(x, (int, np.integer)):
            return self.c[int(x)].T.copy()
        return np.einsum("i,ijk->kj", np.asarray(x, dtype=float), self.c)

    def ad_all(self) -> np.ndarray:
        """Stack ``A`` with ``A[i] = ad(e_i)``."""
        return np.transpose(self.c, (0, 2, 1)).copy()

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.c)

    @property
    def norm(self) -> float:
        return bracket_norm(self)

    @property
    def splitting_compatible(self) -> bool:
        return splitting_defect(self) <= 1e-12 * max(1.0, self.norm)

    def is_lie(self, tol: float = 1e-9) -> bool:
        return jacobi_residual(self) <= tol * max(1.0, self.norm**2)

    def with_tensor(self, c: np.ndarray) -> "Bracket":
        return Bracket(c, self.dim_h)

    # serialization
    def entries(self, tol: float = 0.0) -> list[list]:
        out = []
        n = self.N
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(n):
                    v = float(self.c[i, j, k])
                    if abs(v) > tol:
                        out.append([i + 1, j + 1, k + 1, v])
        return out

    def to_dict(self) -> dict:
        return {"dim_h": self.dim_h, "dim_m": self.dim_m, "entries": self.entries()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, homogeneous: bool = False) -> "Bracket":
        try:
            dim_h = int(data["dim_h"])
            dim_m = int(data["dim_m"])
            entries = [tuple(e) for e in data.get("entries", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise DimensionMismatch(f"malformed bracket record: {exc}") from exc
        return make_bracket(dim_h, dim_m, entries, homogeneous=homogeneous)

    @classmethod
    def from_json(cls, text: str, homogeneous: bool = False) -> "Bracket":
        return cls.from_dict(json.loads(text), homogeneous=homogeneous)


def make_bracket(
    dim_h: int,
    dim_m: int,
    entries: Iterable[Sequence],
    homogeneous: bool = False,
    tol: float = 1e-12,
) -> Bracket:
    """Build a bracket from sparse 1-based entries ``(i, j, k, value)``.

    Each entry sets ``mu(e_i, e_j)`` along ``e_k`` and implies the
    antisymmetric partner.  Inconsistent repeats raise ConflictingEntry.
    With ``homogeneous=True`` the result must also satisfy
    mu(h, h) in h and mu(h, m) in m.
    """
    if dim_h < 0 or dim_m < 0:
        raise DimensionMismatch("dimensions must be nonnegative")
    n = dim_h + dim_m
    c = np.zeros((n, n, n))
    seen = np.zeros((n, n, n), dtype=bool)
    for e in entries:
        if len(e) != 4:
            raise DimensionMismatch(f"entry {e!r} must have four fields")
        i, j, k = (int(e[0]), int(e[1]), int(e[2]))
        v = float(e[3])
        for idx in (i, j, k):
            if not 1 <= idx <= n:
                raise IndexOutOfRange(f"index {idx} outside 1..{n}")
        i, j, k = i - 1, j - 1, k - 1
        if i == j:
            if abs(v) > tol:
                raise ConflictingEntry(f"mu(e_{i+1}, e_{i+1}) must vanish")
            continue
        if seen[i, j, k] and abs(c[i, j, k] - v) > tol:
            raise ConflictingEntry(f"entry ({i+1},{j+1},{k+1}) assigned twice")
        c[i, j, k] = v
        c[j, i, k] = -v
        seen[i, j, k] = seen[j, i, k] = True
    mu = Bracket(c, dim_h)
    if homogeneous and not mu.splitting_compatible:
        raise SplittingViolation("bracket does not preserve the h/m splitting")
    return mu


def splitting_defect(mu: Bracket) -> float:
    """Size of the mu(h,h)->m and mu(h,m)->h components."""
    s = mu.dim_h
    if s == 0:
        return 0.0
    c = mu.c
    return float(np.sqrt(np.sum(c[:s, :s, s:] ** 2) + np.sum(c[:s, s:, :s] ** 2)))


def _as_full(mat: np.ndarray, mu: Bracket, fill_identity: bool) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.shape == (mu.N, mu.N):
        return mat
    if mat.shape == (mu.dim_m, mu.dim_m):
        full = np.eye(mu.N) if fill_identity else np.zeros((mu.N, mu.N))
        full[mu.dim_h :, mu.dim_h :] = mat
        return full
    raise DimensionMismatch(f"matrix of shape {mat.shape} does not fit N={mu.N}")


def act(h: np.ndarray, mu: Bracket) -> Bracket:
    """(h . mu)(x, y) = h mu(h^-1 x, h^-1 y).

    ``h`` may be N x N or dim_m x dim_m; the latter is extended by the
    identity on h.
    """
    H = _as_full(h, mu, fill_identity=True)
    try:
        G = np.linalg.inv(H)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("group element is singular") from exc
    if not np.all(np.isfinite(G)) or abs(np.linalg.det(H)) < 1e-300:
        raise SingularMatrix("group element is singular")
    c = np.einsum("abc,ai,bj,kc->ijk", mu.c, G, G, H, optimize=True)
    return Bracket(c, mu.dim_h)


def pi_tensor(A: np.ndarray, c: np.ndarray) -> np.ndarray:
    return (
        np.einsum("kc,ijc->ijk", A, c)
        - np.einsum("ai,ajk->ijk", A, c)
        - np.einsum("bj,ibk->ijk", A, c)
    )


def pi_action(A: np.ndarray, mu: Bracket) -> Bracket:
    """Derivative of the action: A mu(x,y) - mu(Ax,y) - mu(x,Ay).

    A dim_m x dim_m matrix is embedded as zero on h.
    """
    M = _as_full(A, mu, fill_identity=False)
    return Bracket(pi_tensor(M, mu.c), mu.dim_h)


def bracket_inner(mu: Bracket, eta: Bracket) -> float:
    """Sum over all ordered basis pairs (i, j) of <mu(e_i,e_j), eta(e_i,e_j)>."""
    if mu.c.shape != eta.c.shape:
        raise DimensionMismatch("brackets live on different spaces")
    return float(np.sum(mu.c * eta.c))


def bracket_norm(mu: Bracket) -> float:
    return float(np.sqrt(max(bracket_inner(mu, mu), 0.0)))


def norm_mu_m(mu: Bracket) -> float:
    return float(np.sqrt(np.sum(mu.mu_m**2)))


def norm_mu_h(mu: Bracket) -> float:
    return float(np.sqrt(np.sum(mu.mu_h**2)))


def scale_bracket(mu: Bracket, c: float) -> Bracket:
    """c . mu := (c^-1 Id_m) . mu, the bracket of the metric c^-2 g."""
    if not c > 0:
        raise NonpositiveScale(f"scale must be positive, got {c}")
    s = mu.dim_h
    t = np.array(mu.c)
    # count how many of the two inputs and one output lie in m
    wm = np.zeros(mu.N)
    wm[s:] = 1.0
    power = wm[:, None, None] + wm[None, :, None] - wm[None, None, :]
    return Bracket(t * c**power, s)


def jacobi_tensor(c: np.ndarray) -> np.ndarray:
    """J[x,y,z,:] = mu(mu(x,y),z) + mu(mu(y,z),x) + mu(mu(z,x),y)."""
    t = np.einsum("xya,azw->xyzw", c, c)
    return t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))


def jacobi_residual(mu: Bracket) -> float:
    """Frobenius norm of the cyclic Jacobi sum over all basis triples."""
    c = mu.c if isinstance(mu, Bracket) else np.asarray(mu)
    return float(np.linalg.norm(jacobi_tensor(c)))


def derivation_residual(mu: Bracket, D: np.ndarray) -> float:
    """||pi(D) mu||; zero exactly when D is a derivation."""
    return bracket_norm(pi_action(D, mu))


def derivation_algebra(mu: Bracket, rtol: float = RANK_RTOL) -> list[np.ndarray]:
    """Basis of Der(mu) inside gl(g)."""
    n = mu.N
    cols = []
    for a in range(n):
        for b in range(n):
            E = np.zeros((n, n))
            E[a, b] = 1.0
            cols.append(pi_tensor(E, mu.c).ravel())
    basis = null_space(np.array(cols).T, rtol=rtol, atol=1e-12)
    return [basis[:, i].reshape(n, n) for i in range(basis.shape[1])]


def derived_algebra(mu: Bracket) -> Subspace:
    n = mu.N
    return Subspace(column_space(mu.c.reshape(n * n, n).T))


def killing_form(mu: Bracket) -> np.ndarray:
    ad = mu.ad_all()
    return np.einsum("ikj,ljk->il", ad, ad)


def radical(mu: Bracket) -> Subspace:
    """Killing-orthogonal complement of the derived algebra."""
    D = derived_algebra(mu)
    if D.dim == 0:
        return Subspace(np.eye(mu.N))
    K = killing_form(mu)
    cond = D.basis.T @ K
    return Subspace(null_space(cond, atol=1e-10 * max(1.0, mu.norm**2)))


def nilradical(mu: Bracket, seed: int = 0) -> Subspace:
    """Largest nilpotent ideal.

    Inside the radical r, the ad-weights are linear functionals; x lies in
    the nilradical iff every weight vanishes on x.  For a generic y in r
    that is equivalent to tr(ad(y)^j ad(x)) = 0 for all j < N (a
    Vandermonde argument), which is a linear system in x.
    """
    n = mu.N
    if not np.any(mu.c):
        return Subspace(np.eye(n))
    R = radical(mu).basis
    if R.shape[1] == 0:
        return Subspace(np.zeros((n, 0)))
    ads = [mu.ad(R[:, l]) for l in range(R.shape[1])]
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(3):
        y = R @ rng.standard_normal(R.shape[1])
        Y = mu.ad(y)
        nrm = np.linalg.norm(Y, 2)
        if nrm > 0:
            Y = Y / nrm
        P = np.eye(n)
        for _j in range(n):
            rows.append([float(np.sum(P * A.T)) for A in ads])
            P = P @ Y
    cond = np.array(rows)
    scale = max(1.0, max(np.linalg.norm(A) for A in ads))
    coeffs = null_space(cond, atol=1e-9 * scale)
    return Subspace(column_space(R @ coeffs))


def is_ideal(mu: Bracket, sub: Subspace, tol: float = 1e-8) -> bool:
    P = np.eye(mu.N) - sub.projector()
    for l in range(sub.dim):
        img = mu.ad(sub.basis[:, l])  # columns: mu(x, e_j)
        if np.linalg.norm(P @ img) > tol * max(1.0, mu.norm):
            return False
    return True


def random_bracket(
    rng: np.random.Generator, n: int, dim_h: int = 0, scale: float = 1.0
) -> Bracket:
    """Random skew-symmetric tensor (generally not a Lie bracket)."""
    c = rng.standard_normal((n, n, n)) * scale
    c = c - np.transpose(c, (1, 0, 2))
    return Bracket(c, dim_h)
