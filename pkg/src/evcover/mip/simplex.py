"""Bounded-variable dual simplex (steepest-edge pricing) over ``A x - s = 0``
with boxed logicals.

Every row ``lo_i <= a_i x <= hi_i`` gets a logical variable ``s_i`` with
column ``-e_i`` and bounds ``[lo_i, hi_i]``, so the all-logical basis is
always available as a start. Structural bounds only move nonbasic variables,
and reduced costs do not depend on bounds; a basis that was dual feasible
stays dual feasible after any bound change on a boxed variable. The
branch-and-bound driver exploits this by keeping one engine alive for the
whole tree.

The basis inverse is kept explicitly and updated by rank-one corrections in
a compiled pivot loop; it is rebuilt from a sparse LU factorization every
``refactor_every`` pivots or when the row and column views of a pivot
disagree.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit
from scipy.linalg import qr

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

# Stand-in for a missing bound on a nonbasic variable; landing on it at the
# optimum means the true problem is unbounded.
ARTIFICIAL_BOUND = 1e9

# pivot loop exit codes
_FEASIBLE, _NO_ENTERING, _DRIFT, _BUDGET = 0, 1, 2, 3


@njit(cache=True)
def _pivot_loop(indptr, indices, data, n, m, lo, hi, cost, x, d, basic, is_basic,
                artificial, Binv, wts, feas_tol, dual_tol, pivot_tol, max_pivots,
                since_refactor, degenerate, bland_after):
    """Run dual simplex pivots until primal feasible or a driver decision is due.

    Returns ``(code, pivots, degenerate)``.
    """
    total = n + m
    alpha = np.empty(total)
    col = np.empty(m)
    rho = np.empty(m)
    pivots = 0
    while pivots < max_pivots:
        # -- leaving row: largest squared infeasibility over edge weight
        bland = degenerate >= bland_after
        r = -1
        best = 0.0
        best_var = total
        to_lower = False
        for i in range(m):
            j = basic[i]
            xb = x[j]
            vlo = lo[j] - xb
            vhi = xb - hi[j]
            if vlo > vhi:
                v = vlo
                bound = abs(lo[j])
            else:
                v = vhi
                bound = abs(hi[j])
            scale = 1.0 + min(bound, 100.0)
            if v > feas_tol * scale:
                if bland:
                    if j < best_var:
                        best_var = j
                        r = i
                        to_lower = vlo > vhi
                else:
                    score = v * v / wts[i]
                    if score > best:
                        best = score
                        r = i
                        to_lower = vlo > vhi
        if r < 0:
            return _FEASIBLE, pivots, degenerate
        leaving = basic[r]
        target = lo[leaving] if to_lower else hi[leaving]

        # -- pivot row alpha = rho^T [A, -I]
        for i in range(m):
            rho[i] = Binv[r, i]
        for j in range(n):
            s = 0.0
            for p in range(indptr[j], indptr[j + 1]):
                s += data[p] * rho[indices[p]]
            alpha[j] = s
        for i in range(m):
            alpha[n + i] = -rho[i]
        for i in range(m):
            alpha[basic[i]] = 0.0
        sign = 1.0 if to_lower else -1.0

        # -- ratio test (Harris two-pass, or smallest ratio and index under Bland)
        theta_max = np.inf
        for j in range(total):
            if is_basic[j] or lo[j] == hi[j]:
                continue
            a = sign * alpha[j]
            if not _eligible(j, a, x, lo, hi, artificial, pivot_tol):
                continue
            lim = (abs(d[j]) + (0.0 if bland else dual_tol)) / abs(a)
            if lim < theta_max:
                theta_max = lim
        q = -1
        if theta_max < np.inf:
            best_a = -1.0
            for j in range(total):
                if is_basic[j] or lo[j] == hi[j]:
                    continue
                a = sign * alpha[j]
                if not _eligible(j, a, x, lo, hi, artificial, pivot_tol):
                    continue
                ratio = abs(d[j]) / abs(a)
                if bland:
                    if ratio <= theta_max + 1e-12:
                        q = j
                        break
                elif ratio <= theta_max and abs(a) > best_a:
                    best_a = abs(a)
                    q = j
        if q < 0:
            return _NO_ENTERING, pivots, degenerate

        # -- entering column in the current basis
        if q < n:
            for i in range(m):
                s = 0.0
                for p in range(indptr[q], indptr[q + 1]):
                    s += Binv[i, indices[p]] * data[p]
                col[i] = s
        else:
            k = q - n
            for i in range(m):
                col[i] = -Binv[i, k]
        piv = col[r]
        if since_refactor > 0 and abs(piv - alpha[q]) > 1e-7 * (1.0 + abs(piv)):
            return _DRIFT, pivots, degenerate

        # -- primal and dual steps
        step = (x[leaving] - target) / piv
        for i in range(m):
            x[basic[i]] -= step * col[i]
        x[q] += step
        x[leaving] = target
        theta = d[q] / alpha[q]
        for j in range(total):
            d[j] -= theta * alpha[j]
        d[leaving] = -theta
        d[q] = 0.0

        # -- basis inverse and steepest-edge weights
        _rank_one_update(Binv, wts, col, rho, piv, r)
        s = 0.0
        for k in range(m):
            v = rho[k] / piv
            Binv[r, k] = v
            s += v * v
        wts[r] = max(s, 1e-12)
        basic[r] = q
        is_basic[q] = True
        is_basic[leaving] = False
        artificial[leaving] = False
        pivots += 1
        since_refactor += 1
        if abs(theta) < 1e-12:
            degenerate += 1
        else:
            degenerate = 0
    return _BUDGET, pivots, degenerate


@njit(cache=True, fastmath=True)
def _rank_one_update(Binv, wts, col, rho, piv, r):
    """Eliminate the entering column from every row but ``r``; refresh norms."""
    m = Binv.shape[0]
    for i in range(m):
        if i == r:
            continue
        f = col[i] / piv
        if f != 0.0:
            s = 0.0
            for k in range(m):
                v = Binv[i, k] - f * rho[k]
                Binv[i, k] = v
                s += v * v
            wts[i] = max(s, 1e-12)


@njit(cache=True)
def _eligible(j, a, x, lo, hi, artificial, tol):
    free = lo[j] == -np.inf and hi[j] == np.inf and not artificial[j]
    if free:
        return abs(a) > tol
    if artificial[j]:
        at_upper = x[j] > 0
    else:
        at_upper = x[j] == hi[j]
    if at_upper:
        return a > tol
    return a < -tol


class DualSimplex:
    """Persistent LP engine for ``min c x`` over row and column bounds.

    Parameters
    ----------
    A : sparse matrix, shape (m, n)
    row_lo, row_hi : row activity bounds, may be infinite
    c : objective (minimization)
    lb, ub : structural bounds, may be infinite
    """

    def __init__(self, A, row_lo, row_hi, c, lb, ub, *, feas_tol=1e-7, dual_tol=1e-9,
                 pivot_tol=1e-9, refactor_every=200, bland_after=1000):
        A = sp.csc_matrix(A, dtype=float)
        A.sort_indices()
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.A = A
        self.AT = A.T.tocsr()
        self._full = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.lo = np.concatenate([np.asarray(lb, float), np.asarray(row_lo, float)])
        self.hi = np.concatenate([np.asarray(ub, float), np.asarray(row_hi, float)])
        self.cost = np.concatenate([np.asarray(c, float), np.zeros(m)])
        self.feas_tol = feas_tol
        self.dual_tol = dual_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after

        self.basic = np.arange(n, n + m)
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[n:] = True
        self.x = np.zeros(n + m)
        self.d = self.cost.copy()
        self.Binv = -np.eye(m)
        self.wts = np.ones(m)
        self.artificial = np.zeros(n + m, dtype=bool)
        self.since_refactor = 0
        self.iterations = 0
        self.status = None
        self.used_artificial = False
        self._place_nonbasic(np.flatnonzero(~self.is_basic))
        self._recompute_primal()

    # -- helpers ------------------------------------------------------------

    def _column(self, j):
        """Return ``(row_indices, values)`` of column ``j`` of ``[A, -I]``."""
        if j < self.n:
            a, b = self.A.indptr[j], self.A.indptr[j + 1]
            return self.A.indices[a:b], self.A.data[a:b]
        return np.array([j - self.n]), np.array([-1.0])

    def _place_nonbasic(self, idx):
        """Put nonbasic variables at the bound their reduced cost asks for."""
        for j in idx:
            lo, hi, dj = self.lo[j], self.hi[j], self.d[j]
            self.artificial[j] = False
            if lo == hi:
                self.x[j] = lo
            elif dj > self.dual_tol:
                if lo == -math.inf:
                    self.artificial[j] = True
                    self.used_artificial = True
                    self.x[j] = -ARTIFICIAL_BOUND
                else:
                    self.x[j] = lo
            elif dj < -self.dual_tol:
                if hi == math.inf:
                    self.artificial[j] = True
                    self.used_artificial = True
                    self.x[j] = ARTIFICIAL_BOUND
                else:
                    self.x[j] = hi
            else:
                # zero reduced cost: keep the current side if it is still a bound
                if self.x[j] == hi and hi != math.inf:
                    continue
                if lo != -math.inf:
                    self.x[j] = lo
                elif hi != math.inf:
                    self.x[j] = hi
                else:
                    self.x[j] = 0.0

    def _recompute_primal(self):
        n = self.n
        xn = np.where(self.is_basic, 0.0, self.x)
        t = self.A @ xn[:n] - xn[n:]
        self.x[self.basic] = -(self.Binv @ t)

    def _recompute_dual(self):
        pi = self.cost[self.basic] @ self.Binv
        self.d[: self.n] = self.cost[: self.n] - self.AT @ pi
        self.d[self.n:] = pi
        self.d[self.basic] = 0.0

    def _basis_matrix(self):
        return self._full[:, self.basic]

    def refactor(self):
        B = self._basis_matrix()
        try:
            # solving with the transpose yields the inverse already row-major
            inv = spla.splu(B.T.tocsc()).solve(np.eye(self.m)).T
            if not np.all(np.isfinite(inv)):
                raise RuntimeError("non-finite inverse")
        except RuntimeError:
            inv = self._repair_basis(B.toarray())
        self.Binv = np.ascontiguousarray(inv)
        self.wts = np.maximum(np.einsum("ij,ij->i", self.Binv, self.Binv), 1e-12)
        self.since_refactor = 0
        self._recompute_dual()
        self._place_nonbasic(np.flatnonzero(~self.is_basic))
        self._recompute_primal()

    def _repair_basis(self, B):
        """Swap dependent basic columns for logicals; return the new inverse."""
        m = self.m
        _, R, perm = qr(B, pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-9 * max(1.0, diag[0] if len(diag) else 1.0)))
        kept = perm[:rank]
        dropped = perm[rank:]
        Q = np.linalg.qr(B[:, kept])[0] if rank else np.zeros((m, 0))
        _, _, rows = qr(np.eye(m) - Q @ Q.T, pivoting=True)
        for pos, i in zip(dropped, rows[: m - rank]):
            old = self.basic[pos]
            new = self.n + i
            if self.is_basic[new]:
                continue
            self.is_basic[old] = False
            self.basic[pos] = new
            self.is_basic[new] = True
        return np.linalg.inv(self._basis_matrix().toarray())

    # -- public API ---------------------------------------------------------

    def set_bounds(self, idx, lb, ub):
        """Replace structural bounds of variables ``idx``."""
        idx = np.asarray(idx, dtype=int)
        self.lo[idx] = lb
        self.hi[idx] = ub
        nb = idx[~self.is_basic[idx]]
        if len(nb):
            self._place_nonbasic(nb)
        self._recompute_primal()

    def structural_bounds(self):
        return self.lo[: self.n].copy(), self.hi[: self.n].copy()

    @property
    def values(self) -> np.ndarray:
        return self.x[: self.n].copy()

    @property
    def objective(self) -> float:
        return float(self.cost[: self.n] @ self.x[: self.n])

    def solve(self, max_iterations: int | None = None) -> str:
        if max_iterations is None:
            max_iterations = 50 * (self.m + self.n) + 10000
        degenerate = 0
        retried = False
        done = 0
        A = self.A
        while done < max_iterations:
            if self.since_refactor >= self.refactor_every:
                self.refactor()
            budget = min(self.refactor_every - self.since_refactor, max_iterations - done)
            code, pivots, degenerate = _pivot_loop(
                A.indptr, A.indices, A.data, self.n, self.m, self.lo, self.hi, self.cost,
                self.x, self.d, self.basic, self.is_basic, self.artificial, self.Binv, self.wts,
                self.feas_tol, self.dual_tol, self.pivot_tol, budget, self.since_refactor,
                degenerate, self.bland_after)
            done += pivots
            self.iterations += pivots
            self.since_refactor += pivots
            if pivots:
                retried = False
            if code == _FEASIBLE:
                if self._fix_dual_infeasibility():
                    continue
                if self.used_artificial and self.since_refactor:
                    # huge artificial values cancel inexactly; clean up once
                    self.used_artificial = False
                    self.refactor()
                    continue
                self.status = UNBOUNDED if self._artificial_active() else OPTIMAL
                return self.status
            if code == _NO_ENTERING:
                if not retried and self.since_refactor > 0:
                    retried = True
                    self.refactor()
                    continue
                self.status = INFEASIBLE
                return self.status
            if code == _DRIFT:
                self.refactor()
        self.status = ITERATION_LIMIT
        return self.status

    def _fix_dual_infeasibility(self) -> bool:
        """Flip boxed nonbasics whose reduced cost drifted to the wrong sign."""
        nonbasic = ~self.is_basic
        x, lo, hi, d = self.x, self.lo, self.hi, self.d
        wrong = nonbasic & (lo != hi) & (((x == lo) & (d < -1e-7)) | ((x == hi) & (d > 1e-7)))
        idx = np.flatnonzero(wrong)
        if len(idx) == 0:
            return False
        self._place_nonbasic(idx)
        self._recompute_primal()
        return True

    def _artificial_active(self) -> bool:
        idx = np.flatnonzero(self.artificial & ~self.is_basic)
        return bool(len(idx) and np.any(np.abs(self.d[idx]) > self.dual_tol))
