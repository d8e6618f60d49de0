"""Dense bounded-variable simplex.

The LP ``max c.x  s.t.  A x (<=,=,>=) b,  lb <= x <= ub`` is equilibrated
(row then column scaling) and put in the form ``A x + s = b`` with one
bounded slack per row and one artificial per row.  Artificials are only
free to move during phase one; afterwards their bounds are ``[0, 0]`` so
that every basis of the same instance shares one column structure, which
is what makes warm starts (bound changes + dual simplex) cheap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except ImportError:  # pragma: no cover
    _dger = None

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
BLAND_AFTER = 200
REFACTOR_EVERY = 100
DRIFT_TOL = 1e-7


CURRENT = "current"  # warm-start sentinel: continue from the engine's own last basis


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalError(RuntimeError):
    """The simplex lost numerical control; carries diagnostics instead of an answer."""

    def __init__(self, message: str, condition: float | None = None):
        if condition is not None:
            message = f"{message} (basis condition number ~{condition:.3g})"
        super().__init__(message)
        self.condition = condition


class LpTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class Basis:
    basic: np.ndarray
    at_upper: np.ndarray


@dataclass
class EngineResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: Basis | None


class BoundedSimplex:
    def __init__(self, A: np.ndarray, senses: np.ndarray, rhs: np.ndarray, cost: np.ndarray,
                 lb: np.ndarray, ub: np.ndarray):
        A = np.asarray(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        self.row_scale, self.col_scale = _scaling(A)
        As = A * self.row_scale[:, None] * self.col_scale[None, :]
        self.b = np.asarray(rhs, dtype=float) * self.row_scale
        self.N = n + 2 * m
        self.cost = np.zeros(self.N)
        self.cost[:n] = -np.asarray(cost, dtype=float) * self.col_scale  # internal: minimise
        self.M = np.zeros((m, self.N))
        self.M[:, :n] = As
        self.M[:, n:n + m] = np.eye(m)
        self.M[:, n + m:] = np.eye(m)
        self.lb = np.zeros(self.N)
        self.ub = np.zeros(self.N)
        senses = np.asarray(senses)
        self.lb[n:n + m] = np.where(senses > 0, -np.inf, 0.0)
        self.ub[n:n + m] = np.where(senses < 0, np.inf, 0.0)
        self.set_bounds(lb, ub)
        self.iterations = 0
        self.since_factor = 0
        self._has_state = False
        self._last_basis: Basis | None = None

    # -- setup ------------------------------------------------------------

    def set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        n = self.n
        self.lb[:n] = np.asarray(lb, dtype=float) / self.col_scale
        self.ub[:n] = np.asarray(ub, dtype=float) / self.col_scale

    def _nonbasic_values(self) -> None:
        nb = ~self.is_basic
        lo, hi = self.lb[nb], self.ub[nb]
        vals = np.where(self.at_upper[nb], hi, lo)
        vals = np.where(np.isfinite(vals), vals, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)))
        self.x[nb] = vals

    def _factor(self) -> None:
        n, m = self.n, self.m
        B = self.M[:, self.basic]
        try:
            binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalError("singular basis during refactorisation", _cond(B)) from None
        if not np.all(np.isfinite(binv)):
            raise NumericalError("non-finite inverse after refactorisation", _cond(B))
        # slack and artificial blocks of M are (signed) identities
        T = np.empty((m, self.N))
        T[:, :n] = binv @ self.M[:, :n]
        T[:, n:n + m] = binv
        T[:, n + m:] = binv * np.diag(self.M[:, n + m:])[None, :]
        T[:, self.basic] = np.eye(m)
        self.T = T
        self.since_factor = 0
        self._nonbasic_values()
        nb = ~self.is_basic
        self.x[self.basic] = binv @ (self.b - self.M[:, nb] @ self.x[nb])

    def _reduced_costs(self, c: np.ndarray) -> np.ndarray:
        d = c - c[self.basic] @ self.T
        d[self.basic] = 0.0
        return d

    def _pivot(self, r: int, q: int, d: np.ndarray) -> None:
        T = self.T
        piv = T[r, q]
        T[r] /= piv
        col = T[:, q].copy()
        col[r] = 0.0
        if _dger is not None and T.flags.c_contiguous:
            _dger(-1.0, T[r], col, a=T.T, overwrite_a=1)
        else:
            T -= np.outer(col, T[r])
        T[:, q] = 0.0
        T[r, q] = 1.0
        d -= d[q] * T[r]
        d[q] = 0.0
        leaving = self.basic[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basic[r] = q
        self.since_factor += 1

    # -- primal -----------------------------------------------------------

    def _primal(self, c: np.ndarray, deadline: float | None, max_iter: int) -> LpStatus:
        d = self._reduced_costs(c)
        degenerate = 0
        lb, ub, x = self.lb, self.ub, self.x
        while True:
            self._tick(deadline, max_iter)
            if self.since_factor >= REFACTOR_EVERY:
                self._factor()
                d = self._reduced_costs(c)
            nb = ~self.is_basic
            can_inc = nb & (x < ub - PRIMAL_TOL) & (d < -DUAL_TOL)
            can_dec = nb & (x > lb + PRIMAL_TOL) & (d > DUAL_TOL)
            eligible = can_inc | can_dec
            if not eligible.any():
                return LpStatus.OPTIMAL
            if degenerate >= BLAND_AFTER:
                q = int(np.flatnonzero(eligible)[0])
            else:
                q = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if can_inc[q] else -1.0
            alpha = direction * self.T[:, q]
            r, step = self._ratio_test(alpha, bland=degenerate >= BLAND_AFTER)
            span = ub[q] - lb[q]
            if r < 0 and not np.isfinite(span):
                return LpStatus.UNBOUNDED
            if r < 0 or span <= step:
                # bound flip, basis unchanged
                x[q] += direction * span
                x[self.basic] -= span * alpha
                self.at_upper[q] = direction > 0
                degenerate = 0 if span > 1e-12 else degenerate + 1
                continue
            self._move(q, direction * step, r, alpha * step, to_upper=alpha[r] < 0)
            self._pivot(r, q, d)
            degenerate = 0 if step > 1e-12 else degenerate + 1

    def _ratio_test(self, alpha: np.ndarray, bland: bool) -> tuple[int, float]:
        """Harris two-pass ratio test on basic variables moving by ``-t * alpha``."""
        xb = self.x[self.basic]
        lbb, ubb = self.lb[self.basic], self.ub[self.basic]
        dec = alpha > PIVOT_TOL
        inc = alpha < -PIVOT_TOL
        with np.errstate(divide="ignore", invalid="ignore"):
            relaxed = np.full(self.m, np.inf)
            relaxed[dec] = (xb[dec] - lbb[dec] + PRIMAL_TOL) / alpha[dec]
            relaxed[inc] = (ubb[inc] - xb[inc] + PRIMAL_TOL) / -alpha[inc]
            exact = np.full(self.m, np.inf)
            exact[dec] = (xb[dec] - lbb[dec]) / alpha[dec]
            exact[inc] = (ubb[inc] - xb[inc]) / -alpha[inc]
        theta = relaxed.min() if self.m else np.inf
        if not np.isfinite(theta):
            return -1, np.inf
        cand = np.flatnonzero(exact <= theta)
        if bland:
            r = int(cand[np.argmin(self.basic[cand])])
        else:
            r = int(cand[np.argmax(np.abs(alpha[cand]))])
        return r, max(float(exact[r]), 0.0)

    def _move(self, q: int, dq: float, r: int, dxb: np.ndarray, to_upper: bool) -> None:
        self.x[q] += dq
        self.x[self.basic] -= dxb
        leaving = self.basic[r]
        self.x[leaving] = self.ub[leaving] if to_upper else self.lb[leaving]
        self.at_upper[leaving] = to_upper

    # -- dual -------------------------------------------------------------

    def _dual(self, c: np.ndarray, deadline: float | None, max_iter: int) -> LpStatus:
        d = self._reduced_costs(c)
        nb = ~self.is_basic
        movable = nb & (self.ub > self.lb)
        bad = movable & (((~self.at_upper) & (d < -1e-7)) | (self.at_upper & (d > 1e-7)))
        if bad.any():
            return None  # not dual feasible: caller falls back to a cold start
        degenerate = 0
        while True:
            self._tick(deadline, max_iter)
            if self.since_factor >= REFACTOR_EVERY:
                self._factor()
                d = self._reduced_costs(c)
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            below = lbb - xb
            above = xb - ubb
            infeas = np.maximum(below, above)
            if infeas.max(initial=0.0) <= PRIMAL_TOL:
                return LpStatus.OPTIMAL
            if degenerate >= BLAND_AFTER:
                rows = np.flatnonzero(infeas > PRIMAL_TOL)
                r = int(rows[np.argmin(self.basic[rows])])
            else:
                r = int(np.argmax(infeas))
            row = self.T[r]
            up = below[r] > PRIMAL_TOL  # leaving variable must increase to its lower bound
            nb = ~self.is_basic
            movable = nb & (self.ub > self.lb)
            at_lo = movable & ~self.at_upper
            at_hi = movable & self.at_upper
            if up:
                elig = (at_lo & (row < -PIVOT_TOL)) | (at_hi & (row > PIVOT_TOL))
            else:
                elig = (at_lo & (row > PIVOT_TOL)) | (at_hi & (row < -PIVOT_TOL))
            if not elig.any():
                if infeas[r] <= DRIFT_TOL:
                    return LpStatus.OPTIMAL  # round-off, not a real infeasibility
                return LpStatus.INFEASIBLE
            idx = np.flatnonzero(elig)
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            relaxed = (np.abs(d[idx]) + DUAL_TOL) / np.abs(row[idx])
            theta = relaxed.min()
            cand = idx[ratios <= theta]
            if degenerate >= BLAND_AFTER:
                q = int(cand.min())
            else:
                q = int(cand[np.argmax(np.abs(row[cand]))])
            target = lbb[r] if up else ubb[r]
            dq = (xb[r] - target) / row[q]
            dual_step = abs(d[q] / row[q])
            self._move(q, dq, r, self.T[:, q] * dq, to_upper=not up)
            self._pivot(r, q, d)
            degenerate = 0 if dual_step > 1e-12 else degenerate + 1

    # -- driver -----------------------------------------------------------

    def _tick(self, deadline, max_iter) -> None:
        self.iterations += 1
        if self.iterations > max_iter:
            raise NumericalError(f"simplex exceeded {max_iter} iterations")
        if deadline is not None and (self.iterations & 15) == 0 and time.monotonic() > deadline:
            raise LpTimeout("LP time limit reached")

    def solve(self, warm: "Basis | str | None" = None, deadline: float | None = None,
              max_iter: int | None = None) -> EngineResult:
        """Optimise under the current bounds.

        ``warm`` is a :class:`Basis` from an earlier solve of this engine, or
        ``CURRENT`` to continue from wherever the previous solve stopped.
        Reusing the basis of the immediately preceding solve skips the
        refactorisation altogether.
        """
        self.iterations = 0
        max_iter = max_iter or max(20000, 50 * (self.m + self.n))
        if np.any(self.lb[:self.n] > self.ub[:self.n] + PRIMAL_TOL):
            return EngineResult(LpStatus.INFEASIBLE, None, -np.inf, 0, None)
        if warm is not None and (warm is not CURRENT or self._has_state):
            try:
                return self._run(warm, deadline, max_iter)
            except NumericalError:
                pass
        return self._run(None, deadline, max_iter)

    def _run(self, warm, deadline, max_iter) -> EngineResult:
        status = None
        hot = warm is CURRENT or (warm is not None and warm is self._last_basis)
        self._has_state = False
        self._last_basis = None
        if hot:
            status = self._hot(deadline, max_iter)
        elif warm is not None and warm is not CURRENT:
            status = self._warm(warm, deadline, max_iter)
        if status is None:
            status = self._cold(deadline, max_iter)
        if status is LpStatus.OPTIMAL:
            status = self._primal(self.cost, deadline, max_iter)
        for _ in range(3):
            if status is not LpStatus.OPTIMAL:
                break
            self._refresh_basic()
            if self._basic_infeasibility() > DRIFT_TOL and self.since_factor:
                self._factor()
            if self._basic_infeasibility() <= DRIFT_TOL:
                break
            # drift survived a fresh factorisation: repair with the dual, then polish with the primal
            status = self._dual(self.cost, deadline, max_iter) or LpStatus.OPTIMAL
            if status is LpStatus.OPTIMAL:
                status = self._primal(self.cost, deadline, max_iter)
        self._has_state = status is not LpStatus.UNBOUNDED
        self._last_basis = None
        if status is not LpStatus.OPTIMAL:
            return EngineResult(status, None, -np.inf if status is LpStatus.INFEASIBLE else np.inf,
                                self.iterations, None)
        x = self._check_solution()
        obj = float(-(self.cost[:self.n] @ self.x[:self.n]))
        self._last_basis = Basis(self.basic.copy(), self.at_upper.copy())
        return EngineResult(status, x, obj, self.iterations, self._last_basis)

    def _refresh_basic(self) -> None:
        """Recompute basic values from the nonbasic ones; B^-1 is the slack block of T."""
        n, m = self.n, self.m
        self._nonbasic_values()
        nb = ~self.is_basic
        binv = self.T[:, n:n + m]
        self.x[self.basic] = binv @ (self.b - self.M[:, nb] @ self.x[nb])

    def _hot(self, deadline, max_iter) -> LpStatus | None:
        art = slice(self.n + self.m, self.N)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        self._refresh_basic()
        return self._dual(self.cost, deadline, max_iter)

    def _basic_infeasibility(self) -> float:
        xb = self.x[self.basic]
        return float(np.maximum(self.lb[self.basic] - xb, xb - self.ub[self.basic]).max(initial=0.0))

    def _warm(self, warm: Basis, deadline, max_iter) -> LpStatus | None:
        self.basic = warm.basic.copy()
        self.at_upper = warm.at_upper.copy()
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basic] = True
        art = slice(self.n + self.m, self.N)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        self.x = np.zeros(self.N)
        self._factor()
        return self._dual(self.cost, deadline, max_iter)

    def _cold(self, deadline, max_iter) -> LpStatus:
        n, m = self.n, self.m
        art = slice(n + m, self.N)
        self.lb[art] = 0.0
        self.ub[art] = 0.0
        self.x = np.zeros(self.N)
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.is_basic = np.zeros(self.N, dtype=bool)
        lo, hi = self.lb[:n], self.ub[:n]
        self.at_upper[:n] = ~np.isfinite(lo) & np.isfinite(hi)
        self.x[:n] = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        residual = self.b - self.M[:, :n] @ self.x[:n]
        slack_lo, slack_hi = self.lb[n:n + m], self.ub[n:n + m]
        slack_ok = (residual >= slack_lo - PRIMAL_TOL) & (residual <= slack_hi + PRIMAL_TOL)
        slack_val = np.clip(residual, slack_lo, slack_hi)
        gap = residual - slack_val
        sign = np.where(gap >= 0, 1.0, -1.0)
        self.M[:, art] = np.diag(sign)
        self.basic = np.where(slack_ok, np.arange(n, n + m), np.arange(n + m, self.N))
        self.is_basic[self.basic] = True
        slacks = np.arange(n, n + m)
        self.x[slacks] = slack_val
        self.at_upper[slacks] = ~slack_ok & (slack_val >= slack_hi) & np.isfinite(slack_hi)
        needs = ~slack_ok
        if needs.any():
            art_idx = np.arange(n + m, self.N)[needs]
            self.ub[art_idx] = np.inf
            self._factor()
            phase1 = np.zeros(self.N)
            phase1[art_idx] = 1.0
            self._primal(phase1, deadline, max_iter)
            infeas = float(self.x[art_idx].sum())
            self.ub[art] = 0.0
            if infeas > 1e-7 * max(1.0, np.abs(self.b).max(initial=0.0)):
                return LpStatus.INFEASIBLE
            self.x[art] = 0.0
            self._drive_out_artificials()
        self._factor()
        return LpStatus.OPTIMAL

    def _drive_out_artificials(self) -> None:
        n, m = self.n, self.m
        d = np.zeros(self.N)
        for r in range(m):
            if self.basic[r] < n + m:
                continue
            row = np.abs(self.T[r, :n + m])
            row[self.is_basic[:n + m]] = 0.0
            q = int(np.argmax(row))
            if row[q] > 1e-7:
                leaving = self.basic[r]
                self.x[leaving] = 0.0
                self.at_upper[leaving] = False
                self._pivot(r, q, d)

    def _check_solution(self) -> np.ndarray:
        n = self.n
        xs = self.x[:n] * self.col_scale
        A = self.M[:, :n] / self.row_scale[:, None] / self.col_scale[None, :]
        b = self.b / self.row_scale
        lhs = A @ xs
        slack = (b - lhs) * self.row_scale
        lo, hi = self.lb[n:n + self.m], self.ub[n:n + self.m]
        viol = np.maximum(lo - slack, slack - hi)
        bound_viol = np.maximum(self.lb[:n] - self.x[:n], self.x[:n] - self.ub[:n])
        worst = max(viol.max(initial=0.0), bound_viol.max(initial=0.0))
        if worst > 1e-6:
            raise NumericalError(f"optimal basis violates constraints by {worst:.3g}",
                                 _cond(self.M[:, self.basic]))
        lo_s = self.lb[:n] * self.col_scale
        hi_s = self.ub[:n] * self.col_scale
        return np.clip(xs, lo_s, hi_s)


def _scaling(A: np.ndarray, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-mean passes followed by max-equilibration of rows then columns."""
    m, n = A.shape
    r, c = np.ones(m), np.ones(n)
    if not (m and n):
        return r, c
    absA = np.abs(A)
    nz = absA > 0
    logA = np.log(np.where(nz, absA, 1.0))

    def geo(logs, axis):
        big = np.where(nz, logs, -np.inf).max(axis=axis)
        small = np.where(nz, logs, np.inf).min(axis=axis)
        ok = np.isfinite(big) & np.isfinite(small)
        return np.exp(-(np.where(ok, big, 0.0) + np.where(ok, small, 0.0)) / 2)

    for _ in range(passes):
        r = geo(logA + np.log(c)[None, :], 1)
        c = geo(logA + np.log(r)[:, None], 0)
    rmax = (absA * r[:, None] * c[None, :]).max(axis=1)
    r = np.where(rmax > 0, r / np.where(rmax > 0, rmax, 1.0), r)
    cmax = (absA * r[:, None] * c[None, :]).max(axis=0)
    c = np.where(cmax > 0, c / np.where(cmax > 0, cmax, 1.0), c)
    return r, c


def _cond(B: np.ndarray) -> float:
    try:
        return float(np.linalg.cond(B))
    except np.linalg.LinAlgError:
        return float("inf")
