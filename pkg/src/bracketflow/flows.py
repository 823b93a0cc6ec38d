"""Ricci flows of homogeneous metrics, in bracket form and in metric form.

Bracket flows evolve the structure constants under ``mu' = -pi(W) mu``:

* ``plain``       W = Ric_mu
* ``unimodular``  W = Ric~_mu (the modified Ricci endomorphism)
* ``gauged``      W = Ric~_mu - X_q(Ric~_mu), which keeps the bracket in
  V^{>=0} of a fixed stratum label and lets the beta-volume be tracked.

All variants also carry the gauge element ``h(t)`` on m with
``mu(t) = h(t) . mu(0)``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bracket_space import (
    Bracket,
    act,
    bracket_norm,
    jacobi_tensor,
    norm_mu_h,
    norm_mu_m,
    pi_tensor,
    scale_bracket,
)
from .curvature import _parts, estimates
from .errors import (
    BadConfig,
    BlowUp,
    DimensionMismatch,
    JacobiDrift,
    NegativeComponent,
    NonTriangularGauge,
    OutOfRange,
)
from .ode import DormandPrince45, SolveStats
from .stratification import (
    StratumLabel,
    _clusters,
    _component_eigs,
    beta_groups,
    gauge_to_Vnn,
    isotropy_generators,
    negative_mass,
    stratum_label,
    x_q_projection,
)

log = logging.getLogger(__name__)

VARIANTS = ("plain", "unimodular", "gauged")
CSV_COLUMNS = (
    "t",
    "scal",
    "scal_mod",
    "ric_mod_norm",
    "jacobi",
    "F_beta",
    "v_beta",
    "norm_mu_m",
    "norm_mu_h",
    "ratio_ric_scal",
)


def sample_times(t_end: float, samples: int = 101, spacing: str = "linear", t_first: float | None = None) -> np.ndarray:
    """Output grid on [0, t_end]; ``log`` spacing keeps t = 0 as first point."""
    if not t_end > 0:
        raise OutOfRange("t_end must be positive")
    if samples < 2:
        raise OutOfRange("need at least two samples")
    if spacing == "linear":
        return np.linspace(0.0, t_end, samples)
    if spacing == "log":
        lo = t_first if t_first is not None else min(1e-3, t_end / 10)
        return np.concatenate([[0.0], np.geomspace(lo, t_end, samples - 1)])
    raise BadConfig(f"unknown spacing {spacing!r}")


@dataclass
class FlowTrajectory:
    times: np.ndarray
    brackets: list[Bracket]
    variant: str
    label: StratumLabel | None = None
    gauges: list[np.ndarray] | None = None
    v_ode: np.ndarray | None = None
    frame: np.ndarray | None = None
    status: str = "ok"
    message: str = ""
    stats: SolveStats | None = None
    _diag: dict | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> Bracket:
        return self.brackets[-1]

    def diagnostics(self) -> dict[str, np.ndarray]:
        """Per-sample scalar diagnostics, one array per CSV column."""
        if self._diag is not None:
            return self._diag
        rows = {k: [] for k in CSV_COLUMNS}
        extra = {k: [] for k in ("ric_norm", "norm_mu", "pairing_beta_plus", "gap", "v_product", "lower_bound")}
        for idx, (t, mu) in enumerate(zip(self.times, self.brackets)):
            rm, ric, _ = _parts(mu.c, mu.dim_h)
            sm, sc = float(np.trace(rm)), float(np.trace(ric))
            v = float(self.v_ode[idx]) if self.v_ode is not None else math.nan
            rows["t"].append(float(t))
            rows["scal"].append(sc)
            rows["scal_mod"].append(sm)
            rows["ric_mod_norm"].append(float(np.linalg.norm(rm)))
            rows["jacobi"].append(float(np.linalg.norm(jacobi_tensor(mu.c))))
            rows["F_beta"].append(v * v * sm if self.v_ode is not None else math.nan)
            rows["v_beta"].append(v)
            nm, nh = norm_mu_m(mu), norm_mu_h(mu)
            rows["norm_mu_m"].append(nm)
            rows["norm_mu_h"].append(nh)
            rows["ratio_ric_scal"].append(float(np.linalg.norm(ric)) / abs(sc) if sc != 0 else math.nan)
            extra["ric_norm"].append(float(np.linalg.norm(ric)))
            extra["norm_mu"].append(bracket_norm(mu))
            pair = gap = vp = math.nan
            if self.label is not None and self.variant == "gauged":
                if sm < 0:
                    rep = estimates(mu, self.label, check=False)
                    pair, gap = rep.pairing_beta_plus, rep.gap
                if self.gauges is not None:
                    vp = beta_volume(self.gauges[idx], self.label)
            extra["pairing_beta_plus"].append(pair)
            extra["gap"].append(gap)
            extra["v_product"].append(vp)
            extra["lower_bound"].append(v * (nm + math.sqrt(nh)) if self.v_ode is not None else math.nan)
        self._diag = {k: np.array(v) for k, v in {**rows, **extra}.items()}
        return self._diag

    def to_csv(self, path: str | Path) -> None:
        d = self.diagnostics()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for i in range(len(self.times)):
                w.writerow([_fmt(d[k][i]) for k in CSV_COLUMNS])

    def rescaled(self) -> tuple[np.ndarray, list[Bracket]]:
        """sqrt(t) . mu(t) for the samples with t > 0."""
        ts, out = [], []
        for t, mu in zip(self.times, self.brackets):
            if t > 0:
                ts.append(float(t))
                out.append(scale_bracket(mu, math.sqrt(t)))
        return np.array(ts), out

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    # 17 significant digits round-trip any double
    return f"{float(x):.16e}"


class _JacobiMonitor:
    def __init__(self, N: int, tol: float) -> None:
        self.N, self.tol = N, tol
        self.n3 = N**3

    def ok(self, t: float, y: np.ndarray) -> bool:
        c = y[: self.n3].reshape(self.N, self.N, self.N)
        n2 = float(np.sum(c * c))
        return float(np.linalg.norm(jacobi_tensor(c))) <= self.tol * max(n2, 1e-300)

    def error(self, t: float, y: np.ndarray) -> Exception:
        return JacobiDrift(f"Jacobi residual exceeds {self.tol:.1e} relative at t={t:.6g}")


class _ConfinementMonitor:
    def __init__(self, N: int, mask: np.ndarray, tol: float) -> None:
        self.N, self.mask, self.tol = N, mask, tol
        self.n3 = N**3

    def ok(self, t: float, y: np.ndarray) -> bool:
        c = y[: self.n3].reshape(self.N, self.N, self.N)
        return float(np.sum(c[self.mask] ** 2)) <= self.tol * max(float(np.sum(c * c)), 1e-300)

    def error(self, t: float, y: np.ndarray) -> Exception:
        return NegativeComponent(f"bracket left V^(>=0) at t={t:.6g}")


def bracket_flow(
    mu0: Bracket,
    variant: str = "unimodular",
    t_end: float = 1.0,
    times: Sequence[float] | None = None,
    samples: int = 101,
    spacing: str = "linear",
    label: StratumLabel | None = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    ric_ceiling: float = 1e8,
    h_min: float = 1e-14,
    jacobi_tol: float = 1e-7,
    confine_tol: float = 1e-8,
    on_blowup: str = "raise",
    tol_grad: float = 1e-10,
) -> FlowTrajectory:
    """Integrate a bracket flow from ``mu0``.

    For the gauged variant a label is computed (and the bracket rotated
    into V^{>=0}) unless a label in the frame of ``mu0`` is supplied.  The
    rotation used is stored in ``frame``; the flow starts at
    ``frame . mu0``.

    BlowUp is raised when ||Ric~|| exceeds ``ric_ceiling`` or the step size
    falls below ``h_min``; with ``on_blowup="return"`` the partial
    trajectory is returned with ``status="blowup"`` instead.
    """
    if variant not in VARIANTS:
        raise BadConfig(f"variant must be one of {VARIANTS}")
    if on_blowup not in ("raise", "return"):
        raise BadConfig("on_blowup must be 'raise' or 'return'")
    N, s = mu0.N, mu0.dim_h
    dm = N - s
    n3 = N**3
    frame = np.eye(N)
    groups = None
    beta_m = None
    mask = None
    if variant == "gauged":
        if label is None:
            label = stratum_label(mu0, tol_grad=tol_grad)
            frame, mu0 = gauge_to_Vnn(mu0, label)
        else:
            if label.N != N or label.dim_h != s:
                raise DimensionMismatch("label does not match the bracket")
            if negative_mass(mu0, label) > 1e-16 * max(bracket_norm(mu0) ** 2, 1e-300):
                frame, mu0 = gauge_to_Vnn(mu0, label)
        beta_m = label.beta_m
        groups = beta_groups(beta_m, isotropy_generators(mu0))
        mask = _component_eigs(np.diag(label.beta_plus)) < -1e-9
    t_out = np.asarray(times, dtype=float) if times is not None else sample_times(t_end, samples, spacing)

    def W_of(c: np.ndarray):
        rm, ric, _ = _parts(c, s)
        if variant == "plain":
            W = ric
        elif variant == "unimodular":
            W = rm
        else:
            W = rm - x_q_projection(rm, groups)
        return W, rm

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        c = y[:n3].reshape(N, N, N)
        W, rm = W_of(c)
        Wf = np.zeros((N, N))
        Wf[s:, s:] = W
        parts = [-pi_tensor(Wf, c).ravel(), (-W @ y[n3 : n3 + dm * dm].reshape(dm, dm)).ravel()]
        if beta_m is not None:
            parts.append([float(np.sum(rm * beta_m)) * y[-1]])
        return np.concatenate(parts)

    def check(t: float, y: np.ndarray) -> None:
        rm, _, _ = _parts(y[:n3].reshape(N, N, N), s)
        nr = float(np.linalg.norm(rm))
        if not np.isfinite(nr) or nr > ric_ceiling:
            raise BlowUp(f"||Ric~|| = {nr:.3e} exceeds {ric_ceiling:.1e} at t={t:.6g}", time=t, state=y.copy())

    y0 = [mu0.c.ravel(), np.eye(dm).ravel()]
    if beta_m is not None:
        y0.append([1.0])
    y0 = np.concatenate(y0)
    monitors = [_JacobiMonitor(N, jacobi_tol)]
    if mask is not None and mask.any():
        monitors.append(_ConfinementMonitor(N, mask, confine_tol))
    solver = DormandPrince45(rtol=rtol, atol=atol, h_min=h_min)
    status, message = "ok", ""
    last_state = None
    try:
        ts, ys, stats = solver.solve(rhs, 0.0, y0, t_out, monitors, check)
    except BlowUp as exc:
        ts, ys, stats = exc.partial
        status, message = "blowup", str(exc)
        if exc.state is not None and exc.time is not None and (len(ts) == 0 or exc.time > ts[-1]):
            last_state = (exc.time, exc.state)
        blow = exc
    else:
        blow = None
    ts = list(ts)
    ys = list(ys)
    if last_state is not None:
        ts.append(last_state[0])
        ys.append(last_state[1])
    traj = _assemble(np.array(ts), ys, variant, label, N, s, beta_m is not None, frame, status, message, stats)
    if blow is not None:
        blow.trajectory = traj
        if on_blowup == "raise":
            raise blow
    return traj


def _assemble(ts, ys, variant, label, N, s, has_v, frame, status, message, stats) -> FlowTrajectory:
    n3, dm = N**3, N - s
    brackets = [Bracket(y[:n3].reshape(N, N, N), s) for y in ys]
    gauges = [y[n3 : n3 + dm * dm].reshape(dm, dm) for y in ys]
    v = np.array([y[-1] for y in ys]) if has_v else None
    return FlowTrajectory(ts, brackets, variant, label, gauges, v, frame, status, message, stats)


# -- metric flow and equivalence --------------------------------------------------------


def _sqrt_spd(P: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (P + P.T))
    if np.min(w) <= 0:
        raise BlowUp("metric degenerated", time=None)
    return (U * np.sqrt(w)) @ U.T


@dataclass
class MetricState:
    """Inner product <P x, y> on m."""

    P: np.ndarray

    def factor(self) -> np.ndarray:
        return _sqrt_spd(self.P)

    def bracket(self, lam: Bracket) -> Bracket:
        """Bracket whose background Ricci data is that of this metric on lam."""
        return act(self.factor(), lam)


def ricci_of_metric(lam: Bracket, P: np.ndarray) -> np.ndarray:
    """Ricci endomorphism Ric^g of the metric P on the space defined by lam."""
    r = _sqrt_spd(P)
    mu = act(r, lam)
    _, ric, _ = _parts(mu.c, mu.dim_h)
    return np.linalg.solve(r, ric @ r)


@dataclass
class MetricTrajectory:
    times: np.ndarray
    metrics: list[np.ndarray]
    conj: list[np.ndarray]
    status: str = "ok"


def metric_ricci_flow(
    lam: Bracket,
    P0: np.ndarray | None = None,
    t_end: float = 1.0,
    times: Sequence[float] | None = None,
    samples: int = 101,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    ric_ceiling: float = 1e8,
) -> MetricTrajectory:
    """Integrate P' = -2 P Ric^g together with h' = -h Ric^g, h(0) = Id."""
    dm = lam.dim_m
    P0 = np.eye(dm) if P0 is None else np.asarray(P0, dtype=float)
    if P0.shape != (dm, dm):
        raise DimensionMismatch("initial metric must be dim_m x dim_m")
    if np.min(np.linalg.eigvalsh(0.5 * (P0 + P0.T))) <= 0:
        raise OutOfRange("initial metric must be positive definite")
    k = dm * dm

    def rhs(t, y):
        P = y[:k].reshape(dm, dm)
        P = 0.5 * (P + P.T)
        R = ricci_of_metric(lam, P)
        dP = -2.0 * P @ R
        dP = 0.5 * (dP + dP.T)
        dh = -y[k:].reshape(dm, dm) @ R
        return np.concatenate([dP.ravel(), dh.ravel()])

    def check(t, y):
        P = y[:k].reshape(dm, dm)
        if np.min(np.linalg.eigvalsh(0.5 * (P + P.T))) <= 1e-300:
            raise BlowUp(f"metric degenerated at t={t:.6g}", time=t)
        R = ricci_of_metric(lam, P)
        if np.linalg.norm(R) > ric_ceiling:
            raise BlowUp(f"Ricci curvature exceeds ceiling at t={t:.6g}", time=t)

    t_out = np.asarray(times, dtype=float) if times is not None else np.linspace(0, t_end, samples)
    solver = DormandPrince45(rtol=rtol, atol=atol)
    ts, ys, _ = solver.solve(rhs, 0.0, np.concatenate([P0.ravel(), np.eye(dm).ravel()]), t_out, (), check)
    return MetricTrajectory(
        np.asarray(ts),
        [0.5 * (y[:k].reshape(dm, dm) + y[:k].reshape(dm, dm).T) for y in ys],
        [y[k:].reshape(dm, dm) for y in ys],
    )


@dataclass
class EquivalenceReport:
    residual: float
    bracket_residual: float
    times: np.ndarray
    per_time: np.ndarray


def equivalence_check(
    lam: Bracket,
    P0: np.ndarray | None = None,
    t_end: float = 10.0,
    samples: int = 51,
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> EquivalenceReport:
    """Compare the metric Ricci flow with the plain bracket flow.

    With h0 = P0^(1/2) and h(t) the conjugation solution, the Ricci tensor
    of g(t) must equal <Ric_mu(t) h0 h X, h0 h Y>, where mu(t) is the
    bracket flow started at h0 . lam.  The residual is the largest entry
    difference over the basis and the sample times.
    """
    dm = lam.dim_m
    P0 = np.eye(dm) if P0 is None else np.asarray(P0, dtype=float)
    times = np.linspace(0.0, t_end, samples)
    mt = metric_ricci_flow(lam, P0, times=times, rtol=rtol, atol=atol)
    h0 = _sqrt_spd(P0)
    bt = bracket_flow(act(h0, lam), "plain", times=times, rtol=rtol, atol=atol)
    per = []
    bres = 0.0
    for P, h, mu in zip(mt.metrics, mt.conj, bt.brackets):
        ric_g = P @ ricci_of_metric(lam, P)
        g = h0 @ h
        _, ric_mu, _ = _parts(mu.c, mu.dim_h)
        per.append(float(np.max(np.abs(ric_g - g.T @ ric_mu @ g))))
        bres = max(bres, float(np.max(np.abs(act(g, lam).c - mu.c))))
    per = np.array(per)
    return EquivalenceReport(float(per.max()), bres, times, per)


# -- beta-volume and Lyapunov function ------------------------------------------------------


def beta_volume(h: np.ndarray, label: StratumLabel, tol: float = 1e-8) -> float:
    """Product formula prod_i det(h_i)^(-beta_i) over the eigenblocks of beta_m.

    ``h`` must be block lower triangular (entries above the diagonal blocks
    vanish) with positive block determinants.
    """
    h = np.asarray(h, dtype=float)
    bm = np.diag(label.beta_m)
    if h.shape != (bm.size, bm.size):
        raise DimensionMismatch("gauge element does not match beta_m")
    upper = bm[:, None] < bm[None, :] - 1e-9
    if np.any(np.abs(h[upper]) > tol * max(1.0, float(np.linalg.norm(h)))):
        raise NonTriangularGauge("gauge element has entries above the diagonal blocks")
    logv = 0.0
    for grp in _clusters(bm, 1e-9):
        blk = h[np.ix_(grp, grp)]
        det = float(np.linalg.det(blk))
        if det <= 0:
            raise NonTriangularGauge("diagonal block with nonpositive determinant")
        logv -= float(np.mean(bm[grp])) * math.log(det)
    return math.exp(logv)


def lyapunov_F(mu: Bracket, v: float) -> float:
    """F = v^2 scal~."""
    rm, _, _ = _parts(mu.c, mu.dim_h)
    return v * v * float(np.trace(rm))


def lyapunov_rate(mu: Bracket, v: float, label: StratumLabel) -> float:
    """dF/dt = 2 v^2 (||Ric~||^2 + scal~ <Ric~, beta_m>) along the gauged flow."""
    rm, _, _ = _parts(mu.c, mu.dim_h)
    sm = float(np.trace(rm))
    return 2.0 * v * v * (float(np.sum(rm * rm)) + sm * float(np.sum(rm * label.beta_m)))


def monotonicity(traj: FlowTrajectory, tol: float = 1e-10) -> dict:
    """Largest decrease of F between consecutive samples.

    ``tol`` is relative to max |F|; pass something a few times the
    integrator rtol, since a soliton has constant F up to that error.
    """
    F = traj.diagnostics()["F_beta"]
    if np.all(np.isnan(F)):
        return {"monotone": None, "min_increment": None}
    inc = np.diff(F)
    worst = float(inc.min()) if inc.size else 0.0
    scale = max(1.0, float(np.nanmax(np.abs(F))))
    return {"monotone": bool(worst >= -tol * scale), "min_increment": worst}


# -- blow-downs and collapse ---------------------------------------------------------------


def blow_down(traj: FlowTrajectory, s: float) -> FlowTrajectory:
    """g_s(t) = g(s t) / s, i.e. brackets sqrt(s) . mu(s t) at times t / s."""
    if not s > 0:
        raise OutOfRange("blow-down factor must be positive")
    c = math.sqrt(s)
    brs = [scale_bracket(mu, c) for mu in traj.brackets]
    gauges = None if traj.gauges is None else [g / c for g in traj.gauges]
    v = None if traj.v_ode is None else traj.v_ode / c
    return FlowTrajectory(
        traj.times / s, brs, traj.variant, traj.label, gauges, v, traj.frame, traj.status, traj.message
    )


@dataclass
class CollapseReport:
    norms: np.ndarray
    sup: float
    growth: float
    slope: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "norms": self.norms.tolist(),
            "sup": self.sup,
            "growth": self.growth,
            "slope": self.slope,
            "verdict": self.verdict,
        }


def collapse_diagnostic(
    brackets: Sequence[Bracket],
    times: Sequence[float] | None = None,
    max_variation: float = 2.0,
) -> CollapseReport:
    """Bounded vs unbounded rescaled-bracket sequence.

    The slope is the least-squares exponent of ||mu_k|| against t_k (or the
    index when no times are given).  The verdict is ``unbounded`` when the
    norms vary by at least ``max_variation`` and still grow at the end.
    """
    norms = np.array([bracket_norm(m) for m in brackets])
    if norms.size < 2:
        raise OutOfRange("need at least two brackets")
    x = np.log(np.asarray(times, dtype=float)) if times is not None else np.log(np.arange(1, norms.size + 1))
    y = np.log(np.maximum(norms, 1e-300))
    slope = float(np.polyfit(x, y, 1)[0])
    growth = float(norms.max() / max(norms.min(), 1e-300))
    verdict = "unbounded" if growth >= max_variation and norms[-1] >= norms[:-1].max() else "bounded"
    return CollapseReport(norms, float(norms.max()), growth, slope, verdict)
