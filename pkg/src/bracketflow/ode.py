"""Adaptive Dormand-Prince 5(4) integrator with per-step invariant monitors.

scipy's ``solve_ivp`` offers no hook to reject an accepted step when an
invariant drifts, so the stepper is written out here.  Steps are clipped
so that every requested output time is hit exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import BlowUp

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class Monitor(Protocol):
    def ok(self, t: float, y: np.ndarray) -> bool: ...

    def error(self, t: float, y: np.ndarray) -> Exception: ...


@dataclass
class SolveStats:
    accepted: int = 0
    rejected: int = 0
    monitor_rejections: int = 0
    nfev: int = 0


class DormandPrince45:
    """Explicit embedded RK 5(4) with FSAL and standard step control.

    The error test uses the max norm over components, so sparse states
    (structure tensors are mostly zeros) do not dilute the tolerance.
    """

    def __init__(
        self,
        rtol: float = 1e-9,
        atol: float = 1e-12,
        h_min: float = 1e-14,
        max_steps: int = 5_000_000,
        safety: float = 0.9,
    ) -> None:
        self.rtol = rtol
        self.atol = atol
        self.h_min = h_min
        self.max_steps = max_steps
        self.safety = safety

    def _initial_step(self, fun, t0, y0, f0) -> float:
        scale = self.atol + self.rtol * np.abs(y0)
        d0 = np.sqrt(np.mean((y0 / scale) ** 2))
        d1 = np.sqrt(np.mean((f0 / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = y0 + h0 * f0
        f1 = fun(t0 + h0, y1)
        d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
        h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1)

    def solve(
        self,
        fun: Callable[[float, np.ndarray], np.ndarray],
        t0: float,
        y0: np.ndarray,
        t_out: Sequence[float],
        monitors: Sequence[Monitor] = (),
        check: Callable[[float, np.ndarray], None] | None = None,
        record: Callable[[float, np.ndarray], None] | None = None,
    ) -> tuple[np.ndarray, np.ndarray, SolveStats]:
        """Integrate and return the states at ``t_out`` (sorted, >= t0).

        ``monitors`` can veto a step (it is retried with half the size);
        ``check`` runs after each accepted step and may raise.  When the
        step size falls below ``h_min`` a BlowUp is raised.
        """
        t_out = np.asarray(t_out, dtype=float)
        if np.any(np.diff(t_out) < 0) or (t_out.size and t_out[0] < t0):
            raise ValueError("output times must be sorted and not precede t0")
        stats = SolveStats()
        t = float(t0)
        y = np.array(y0, dtype=float)
        f = fun(t, y)
        stats.nfev += 1
        out = []
        idx = 0
        while idx < t_out.size and t_out[idx] <= t:
            out.append(y.copy())
            idx += 1
        if idx == t_out.size:
            return t_out, np.array(out), stats
        h = self._initial_step(fun, t, y, f)
        stats.nfev += 1
        K = np.empty((7, y.size))
        try:
            self._loop(fun, t, y, f, h, t_out, idx, out, K, stats, monitors, check, record)
        except BlowUp as exc:
            # hand back what was reached so callers can report it
            exc.partial = (t_out[: len(out)], np.array(out), stats)
            raise
        return t_out, np.array(out), stats

    def _loop(self, fun, t, y, f, h, t_out, idx, out, K, stats, monitors, check, record):
        while idx < t_out.size:
            if stats.accepted + stats.rejected > self.max_steps:
                raise BlowUp(f"step budget exhausted at t={t:.6g}", time=t, state=y)
            target = t_out[idx]
            clipped = False
            h_prop = h
            if t + h >= target:
                h = target - t
                clipped = True
            if h < self.h_min and not clipped:
                raise BlowUp(f"step size {h:.3e} below {self.h_min:.1e} at t={t:.6g}", time=t, state=y)
            K[0] = f
            for s in range(1, 7):
                dy = np.dot(_A[s], K[:s]) * h
                K[s] = fun(t + _C[s] * h, y + dy)
            stats.nfev += 6
            y_new = y + h * np.dot(_B5, K)
            err_vec = h * np.dot(_E, K)
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            if not np.isfinite(err):
                stats.rejected += 1
                h *= 0.2
                continue
            if err > 1.0:
                stats.rejected += 1
                h *= max(0.2, self.safety * err ** -0.2)
                continue
            t_new = target if clipped else t + h
            vetoed = None
            for mon in monitors:
                if not mon.ok(t_new, y_new):
                    vetoed = mon
                    break
            if vetoed is not None:
                stats.monitor_rejections += 1
                h *= 0.5
                if h < self.h_min:
                    raise vetoed.error(t_new, y_new)
                continue
            stats.accepted += 1
            h_used = h
            t, y, f = t_new, y_new, K[6].copy()
            if check is not None:
                check(t, y)
            if record is not None:
                record(t, y)
            while idx < t_out.size and t_out[idx] <= t:
                out.append(y.copy())
                idx += 1
            fac = 10.0 if err == 0 else min(10.0, max(0.2, self.safety * err ** -0.2))
            # a step shortened to hit an output time says little about the next one
            h = max(h_used * fac, h_prop) if clipped else h_used * fac
