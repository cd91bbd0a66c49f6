"""Bounded-variable revised simplex (primal and dual) with a sparse LU basis factor.

Rows are turned into equalities with one slack per row, ``A x - s = 0`` with
``row_lo <= s <= row_hi``, so every variable, structural or slack, is a
bounded column of ``K = [A, -I]`` and the all-slack basis is always valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .problem import MatrixForm, MIPModel

BASIC, AT_LO, AT_HI, FREE = 0, 1, 2, 3

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
HARRIS_TOL = 1e-9
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
PERTURBATION = 1e-7


class NumericalFailure(RuntimeError):
    """The simplex lost accuracy and refactorization did not recover it."""


class BasisFactor:
    """Sparse LU of the basis at the last refactorization plus eta updates."""

    def __init__(self, B: sparse.csc_matrix):
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalFailure("singular basis") from exc
        self.etas = []  # (row, column) pairs, oldest first

    def ftran(self, a: np.ndarray) -> np.ndarray:
        y = self.lu.solve(a)
        for r, col in self.etas:
            yr = y[r] / col[r]
            if yr != 0.0:
                y -= yr * col
            y[r] = yr
        return y

    def btran(self, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=float)
        for r, col in reversed(self.etas):
            v[r] = v[r] - (v @ col - v[r]) / col[r]
        return self.lu.solve(v, trans="T")

    def unit_row(self, r: int, m: int) -> np.ndarray:
        e = np.zeros(m)
        e[r] = 1.0
        return self.btran(e)

    def update(self, r: int, column: np.ndarray) -> None:
        self.etas.append((r, column.copy()))


@dataclass
class Basis:
    head: np.ndarray  # column index of the basic variable in each row
    status: np.ndarray  # per column: BASIC, AT_LO, AT_HI or FREE
    weights: Optional[np.ndarray] = None  # dual steepest-edge weights per row

    def copy(self) -> "Basis":
        w = None if self.weights is None else self.weights.copy()
        return Basis(self.head.copy(), self.status.copy(), w)


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: Optional[np.ndarray]
    objective: float
    iterations: int = 0
    basis: Optional[Basis] = None
    reduced_costs: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class BoundedSimplex:
    """Reusable LP engine for one constraint matrix.

    ``solve`` accepts per-call structural bounds and an optional starting
    basis, which is how branch-and-bound reoptimizes children.
    """

    def __init__(self, c, A, row_lo, row_hi, lo, hi, pricing: str = "dantzig",
                 refactor_every: int = 64, max_iter: Optional[int] = None):
        A = sparse.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.K = sparse.hstack([A, -sparse.identity(m, format="csr")], format="csc")
        self.KT = self.K.T.tocsr()
        self.true_cost = np.concatenate([np.asarray(c, float), np.zeros(m)])
        self.cost = self.true_cost
        self.base_lo = np.concatenate([np.asarray(lo, float), np.asarray(row_lo, float)])
        self.base_hi = np.concatenate([np.asarray(hi, float), np.asarray(row_hi, float)])
        if pricing not in ("dantzig", "bland"):
            raise ValueError(f"unknown pricing rule {pricing!r}")
        self.pricing = pricing
        self.refactor_every = refactor_every
        self.bland_after = 50
        self.max_iter = max_iter if max_iter is not None else 20 * (m + n) + 1000
        self._col_idx = [self.K.indices[self.K.indptr[j]:self.K.indptr[j + 1]] for j in range(n + m)]
        self._col_val = [self.K.data[self.K.indptr[j]:self.K.indptr[j + 1]] for j in range(n + m)]
        self._col_len = np.diff(self.K.indptr)
        self.fresh_head = None  # basis heads of the current factor when it has no etas
        self.xi = PERTURBATION * (1.0 + np.abs(self.true_cost)) * (1.0 + np.random.default_rng(n + m).random(n + m))

    @classmethod
    def from_matrix(cls, mf: MatrixForm, **kw) -> "BoundedSimplex":
        return cls(mf.c, mf.A, mf.row_lo, mf.row_hi, mf.lo, mf.hi, **kw)

    # state helpers

    def _column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        a[self._col_idx[j]] = self._col_val[j]
        return self.factor.ftran(a)

    def _basis_matrix(self) -> sparse.csc_matrix:
        cols = self.head
        lens = self._col_len[cols]
        indptr = np.concatenate([[0], np.cumsum(lens)])
        pos = np.repeat(self.K.indptr[cols] - indptr[:-1], lens) + np.arange(indptr[-1])
        indices = self.K.indices[pos]
        data = self.K.data[pos]
        return sparse.csc_matrix((data, indices, indptr), shape=(self.m, self.m))

    def _refactor(self) -> None:
        self.factor = BasisFactor(self._basis_matrix())
        self.fresh_head = self.head.copy()
        self.since_refactor = 0
        self._recompute()
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.d))):
            raise NumericalFailure("singular basis")

    def _recompute(self) -> None:
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = -self.factor.ftran(self.K @ xn)
        y = self.factor.btran(self.cost[self.head])
        self.d = self.cost - self.KT @ y
        self.d[self.head] = 0.0

    def _set_nonbasic_values(self) -> None:
        s = self.status
        self.x = np.where(s == AT_LO, self.lo, np.where(s == AT_HI, self.hi, 0.0))

    def _nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == AT_LO:
            return self.lo[j]
        if s == AT_HI:
            return self.hi[j]
        return 0.0

    def _place_nonbasic(self, j: int, prefer_hi: bool) -> None:
        lo, hi = self.lo[j], self.hi[j]
        if prefer_hi and math.isfinite(hi):
            self.status[j] = AT_HI
        elif math.isfinite(lo):
            self.status[j] = AT_LO
        elif math.isfinite(hi):
            self.status[j] = AT_HI
        else:
            self.status[j] = FREE
        self.x[j] = self._nonbasic_value(j)

    def _slack_start(self) -> None:
        n, m = self.n, self.m
        self.head = np.arange(n, n + m)
        self.status = np.full(n + m, AT_LO, dtype=np.int8)
        self.status[self.head] = BASIC
        self.x = np.zeros(n + m)
        for j in range(n):
            self._place_nonbasic(j, self.cost[j] < 0)
        self.factor = BasisFactor(-sparse.identity(m, format="csc"))
        self.fresh_head = self.head.copy()
        self.since_refactor = 0
        self.weights = np.ones(m)
        self._recompute()

    def _warm_start(self, basis: Basis) -> None:
        self.head = basis.head.copy()
        self.status = basis.status.copy()
        self.weights = basis.weights.copy() if basis.weights is not None else np.ones(self.m)
        s = self.status
        bad = ((s == AT_LO) & np.isinf(self.lo)) | ((s == AT_HI) & np.isinf(self.hi)) | (s == FREE)
        self._set_nonbasic_values()
        for j in np.flatnonzero(bad):
            self._place_nonbasic(j, s[j] == AT_HI)
        if self.fresh_head is not None and self.since_refactor == 0 and np.array_equal(self.head, self.fresh_head):
            self._recompute()
        else:
            self._refactor()

    # feasibility tests

    def _primal_infeasibility(self) -> np.ndarray:
        xb = self.x[self.head]
        return np.maximum(self.lo[self.head] - xb, 0.0) + np.maximum(xb - self.hi[self.head], 0.0)

    def _dual_infeasible_mask(self, tol: float) -> np.ndarray:
        s, d = self.status, self.d
        movable = self.lo < self.hi
        bad = ((s == AT_LO) & (d < -tol)) | ((s == AT_HI) & (d > tol)) | ((s == FREE) & (np.abs(d) > tol))
        return bad & movable

    def _make_dual_feasible_by_flips(self) -> bool:
        """Move nonbasic columns to the bound their reduced cost prefers, if it exists."""
        bad = np.flatnonzero(self._dual_infeasible_mask(DUAL_TOL))
        if len(bad) == 0:
            return True
        for j in bad:
            want_hi = self.d[j] < 0
            target = self.hi[j] if want_hi else self.lo[j]
            if not math.isfinite(target):
                return False
        for j in bad:
            self.status[j] = AT_HI if self.d[j] < 0 else AT_LO
            self.x[j] = self._nonbasic_value(j)
        self._recompute()
        return True

    # pivoting

    def _pivot(self, r: int, q: int, alpha_q: np.ndarray) -> None:
        self.factor.update(r, alpha_q)
        self.fresh_head = None
        self.head[r] = q
        self.status[q] = BASIC
        self.since_refactor += 1
        if self.since_refactor >= self.refactor_every:
            self._refactor()

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations > self.max_iter:
            raise NumericalFailure("simplex iteration limit exceeded")

    # primal simplex

    def _primal(self, phase1: bool) -> str:
        degenerate = 0
        while True:
            self._tick()
            if phase1:
                xb = self.x[self.head]
                lb, ub = self.lo[self.head], self.hi[self.head]
                below = xb < lb - PRIMAL_TOL
                above = xb > ub + PRIMAL_TOL
                if not (below.any() or above.any()):
                    return "feasible"
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = self.factor.btran(cb)
                d = -(self.KT @ y)
                d[self.head] = 0.0
            else:
                d = self.d
            s = self.status
            movable = self.lo < self.hi
            cand = movable & (((s == AT_LO) & (d < -DUAL_TOL)) | ((s == AT_HI) & (d > DUAL_TOL))
                              | ((s == FREE) & (np.abs(d) > DUAL_TOL)))
            idx = np.flatnonzero(cand)
            if len(idx) == 0:
                return "infeasible" if phase1 else "optimal"
            if self.pricing == "bland" or degenerate > self.bland_after:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self._column(q)
            g = -direction * alpha  # change of basic values per unit step
            xb = self.x[self.head]
            lb, ub = self.lo[self.head], self.hi[self.head]
            if phase1:
                # infeasible basics may travel up to the violated bound only
                low = xb < lb - PRIMAL_TOL
                high = xb > ub + PRIMAL_TOL
                lb, ub = np.where(low, -np.inf, np.where(high, ub, lb)), np.where(low, lb, np.where(high, np.inf, ub))
            dec = g < -PIVOT_TOL
            inc = g > PIVOT_TOL
            relaxed = np.full(self.m, np.inf)
            exact = np.full(self.m, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                relaxed[dec] = (xb[dec] - lb[dec] + HARRIS_TOL) / -g[dec]
                exact[dec] = (xb[dec] - lb[dec]) / -g[dec]
                relaxed[inc] = (ub[inc] - xb[inc] + HARRIS_TOL) / g[inc]
                exact[inc] = (ub[inc] - xb[inc]) / g[inc]
            relaxed[np.isnan(relaxed)] = np.inf
            exact[np.isnan(exact)] = np.inf
            exact = np.maximum(exact, 0.0)
            theta_max = relaxed.min() if self.m else np.inf
            flip = self.hi[q] - self.lo[q]
            if math.isfinite(flip) and flip <= theta_max:
                theta, r = flip, -1
            elif not math.isfinite(theta_max):
                if phase1:
                    raise NumericalFailure("unbounded phase-1 ray")
                return "unbounded"
            else:
                ties = np.flatnonzero(exact <= theta_max)
                r = int(ties[np.argmax(np.abs(g[ties]))])
                if self.pricing == "bland" or degenerate > self.bland_after:
                    cols = self.head[ties]
                    r = int(ties[np.argmin(cols)])
                theta = exact[r]
            degenerate = degenerate + 1 if theta <= PRIMAL_TOL else 0
            if r >= 0:
                p = int(self.head[r])
                if phase1 and xb[r] < self.lo[p] - PRIMAL_TOL:
                    leave_hi = False
                elif phase1 and xb[r] > self.hi[p] + PRIMAL_TOL:
                    leave_hi = True
                else:
                    leave_hi = g[r] > 0
            self.x[self.head] += theta * g
            self.x[q] += direction * theta
            if r < 0:
                self.status[q] = AT_HI if direction > 0 else AT_LO
                self.x[q] = self._nonbasic_value(q)
                continue
            self.status[p] = AT_HI if leave_hi else AT_LO
            self.x[p] = self._nonbasic_value(p)
            self._pivot(r, q, alpha)
            if self.since_refactor and not phase1:
                self._update_duals_after_pivot(r, q)
            elif self.since_refactor:
                self.d[self.head] = 0.0

    def _update_duals_after_pivot(self, r: int, q: int) -> None:
        # the new basis inverse's row r prices column q to one
        dq = self.d[q]
        if dq != 0.0:
            row = self.KT @ self.factor.unit_row(r, self.m)
            self.d -= dq * row
        self.d[self.head] = 0.0

    # dual simplex

    def _dual(self) -> str:
        """Dual simplex with steepest-edge pricing and a bound-flipping ratio test."""
        degenerate = 0
        m = self.m
        while True:
            self._tick()
            infeas = self._primal_infeasibility()
            bland = self.pricing == "bland" or degenerate > self.bland_after
            if bland:
                cand = np.flatnonzero(infeas > PRIMAL_TOL)
                if len(cand) == 0:
                    return "optimal"
                r = int(cand[np.argmin(self.head[cand])])
            else:
                if m == 0:
                    return "optimal"
                score = np.where(infeas > PRIMAL_TOL, infeas * infeas / self.weights, 0.0)
                r = int(np.argmax(score))
                if score[r] <= 0.0:
                    return "optimal"
            p = int(self.head[r])
            xp = self.x[p]
            delta = xp - self.lo[p] if xp < self.lo[p] else xp - self.hi[p]
            rho = self.factor.unit_row(r, m)
            alpha_row = self.KT @ rho
            at = alpha_row if delta > 0 else -alpha_row
            s = self.status
            movable = (self.lo < self.hi) & (s != BASIC)
            elig = movable & (((s == AT_LO) & (at > PIVOT_TOL)) | ((s == AT_HI) & (at < -PIVOT_TOL))
                              | ((s == FREE) & (np.abs(at) > PIVOT_TOL)))
            idx = np.flatnonzero(elig)
            if len(idx) == 0:
                return "infeasible"
            d = self.d[idx]
            a = at[idx]
            st = s[idx]
            exact = np.maximum(np.where(st == FREE, np.abs(d) / np.abs(a), d / a), 0.0)
            relaxed = np.where(st == AT_LO, (d + HARRIS_TOL) / a,
                               np.where(st == AT_HI, (d - HARRIS_TOL) / a, (np.abs(d) + HARRIS_TOL) / np.abs(a)))
            if bland:
                theta_max = max(relaxed.min(), exact.min())
                ties = np.flatnonzero(exact <= theta_max)
                k = int(ties[np.argmin(idx[ties])])
                flips = np.empty(0, dtype=int)
            else:
                k, flips = self._bound_flip_choice(idx, a, exact, relaxed, abs(delta))
                if k < 0:
                    return "infeasible"
            q = int(idx[k])
            alpha_q = self._column(q)
            if abs(alpha_q[r] - alpha_row[q]) > 1e-7 * (1.0 + abs(alpha_q[r])):
                if self.since_refactor == 0:
                    raise NumericalFailure("inconsistent pivot element after refactorization")
                self._refactor()
                continue
            theta_d = self.d[q] / alpha_row[q]
            degenerate = degenerate + 1 if abs(theta_d) <= DUAL_TOL else 0
            self.d -= theta_d * alpha_row
            bound_hi = delta > 0
            if len(flips):
                self._flip(flips)
                delta = self.x[p] - (self.hi[p] if bound_hi else self.lo[p])
            theta_p = delta / alpha_q[r]
            if not bland:
                self._update_weights(r, rho, alpha_q)
            self.x[self.head] -= theta_p * alpha_q
            self.x[q] += theta_p
            self.status[p] = AT_HI if bound_hi else AT_LO
            self.x[p] = self.hi[p] if bound_hi else self.lo[p]
            self.d[p] = -theta_d
            self._pivot(r, q, alpha_q)
            self.d[self.head] = 0.0

    def _bound_flip_choice(self, idx, a, exact, relaxed, slope):
        """Pick the entering position in ``idx`` and the boxed columns passed on the way.

        Breakpoints are passed while the dual objective keeps improving; the
        entering column is then chosen Harris-style among the remaining ones.
        """
        order = np.argsort(exact, kind="stable")
        rng = (self.hi - self.lo)[idx[order]]
        drop = np.abs(a[order]) * rng
        remaining = slope - np.cumsum(drop)
        stop = np.flatnonzero(~np.isfinite(rng) | (remaining <= PRIMAL_TOL * (1.0 + slope)))
        if len(stop) == 0:
            if remaining[-1] > PRIMAL_TOL * (1.0 + slope):
                return -1, None
            first = len(order) - 1
        else:
            first = int(stop[0])
        rest = order[first:]
        theta_max = max(relaxed[rest].min(), exact[rest].min())
        ties = rest[exact[rest] <= theta_max]
        k = int(ties[np.argmax(np.abs(a[ties]))])
        passed = order[:first]
        passed = passed[exact[passed] <= exact[k]]
        return k, idx[passed]

    def _flip(self, cols: np.ndarray) -> None:
        step = np.zeros(self.n + self.m)
        for j in cols:
            if self.status[j] == AT_LO:
                self.status[j] = AT_HI
                step[j] = self.hi[j] - self.lo[j]
                self.x[j] = self.hi[j]
            else:
                self.status[j] = AT_LO
                step[j] = self.lo[j] - self.hi[j]
                self.x[j] = self.lo[j]
        self.x[self.head] -= self.factor.ftran(self.K @ step)

    def _update_weights(self, r: int, rho: np.ndarray, alpha_q: np.ndarray) -> None:
        w = self.weights
        beta = float(rho @ rho)
        tau = self.factor.ftran(rho)
        ar = alpha_q[r]
        ratio = alpha_q / ar
        w += ratio * (ratio * beta - 2.0 * tau)
        np.maximum(w, 1e-6, out=w)
        w[r] = max(beta / (ar * ar), 1e-6)

    # driver

    def solve(self, lo=None, hi=None, basis: Optional[Basis] = None) -> LPResult:
        pricing = self.pricing
        try:
            return self._solve(lo, hi, basis)
        finally:
            self.pricing = pricing
            self.cost = self.true_cost

    def _solve(self, lo, hi, basis: Optional[Basis]) -> LPResult:
        n = self.n
        self.cost = self.true_cost
        self.lo = self.base_lo.copy()
        self.hi = self.base_hi.copy()
        if lo is not None:
            self.lo[:n] = lo
        if hi is not None:
            self.hi[:n] = hi
        if np.any(self.lo > self.hi + PRIMAL_TOL):
            return LPResult("infeasible", None, math.inf)
        self.iterations = 0
        started = False
        if basis is not None:
            try:
                self._warm_start(basis)
                started = True
            except NumericalFailure:
                started = False
        if not started:
            self._slack_start()
        for attempt in range(3):
            try:
                status = self._run()
            except NumericalFailure:
                if attempt == 2:
                    raise
                self.pricing = "bland"
                self.cost = self.true_cost
                self._slack_start()
                continue
            if status != "optimal":
                return LPResult(status, None, math.inf if status == "infeasible" else -math.inf,
                                self.iterations)
            self._refactor()
            if self._primal_infeasibility().max(initial=0.0) > FEAS_TOL or \
                    self._dual_infeasible_mask(1e-7).any():
                continue
            x = self.x[:n].copy()
            x = np.minimum(np.maximum(x, self.lo[:n]), self.hi[:n])
            return LPResult("optimal", x, float(self.cost[:n] @ x), self.iterations,
                            Basis(self.head.copy(), self.status.copy(), self.weights.copy()),
                            self.d[:n].copy())
        raise NumericalFailure("could not reach a verified optimum")

    def _perturb(self) -> None:
        """Shift costs slightly towards dual feasibility to break dual degeneracy."""
        sign = np.where(self.status == AT_LO, 1.0, np.where(self.status == AT_HI, -1.0, 0.0))
        sign[self.lo >= self.hi] = 0.0
        shift = sign * self.xi
        self.cost = self.true_cost + shift
        self.d += shift  # basic costs are unchanged, so the duals are too

    def _run(self) -> str:
        if self._primal_infeasibility().max(initial=0.0) <= PRIMAL_TOL:
            return self._primal(phase1=False)
        if self._make_dual_feasible_by_flips():
            if self.pricing != "bland":
                self._perturb()
            status = self._dual()
            if self.cost is not self.true_cost:
                self.cost = self.true_cost
                self._recompute()
            if status == "infeasible":
                return status
            if status != "optimal":
                return status
            if self._primal_infeasibility().max(initial=0.0) > PRIMAL_TOL:
                return self._dual() if self._make_dual_feasible_by_flips() else self._phase12()
            if self._dual_infeasible_mask(DUAL_TOL).any():
                return self._primal(phase1=False)
            return status
        return self._phase12()

    def _phase12(self) -> str:
        status = self._primal(phase1=True)
        if status == "infeasible":
            return "infeasible"
        self._recompute()
        return self._primal(phase1=False)


def solve_lp(model, pricing: str = "dantzig") -> LPResult:
    """Solve the LP relaxation of a :class:`MIPModel` (or a ``MatrixForm``).

    The returned objective is in the model's own sense and includes its
    constant term.
    """
    mf = model.matrix() if isinstance(model, MIPModel) else model
    engine = BoundedSimplex.from_matrix(mf, pricing=pricing)
    res = engine.solve()
    if res.status == "optimal":
        res.objective = mf.sign * (res.objective + mf.offset)
    elif res.status == "unbounded":
        res.objective = -mf.sign * math.inf
    else:
        res.objective = mf.sign * math.inf
    return res
