"""Bounded-variable revised simplex on dense numpy arrays.

Solves  min c'x  s.t.  A x (<=, =, >=) b,  lo <= x <= up.

Internally every row gets a slack column (a x + s = b with sign-appropriate
slack bounds) plus an artificial column used only by the primal phase-1;
artificials are pinned to [0, 0] everywhere else.  The basis inverse is
kept explicitly and refactorized periodically; pricing is Dantzig with a
switch to Bland's rule after a streak of degenerate pivots.

The dual simplex accepts any dual-feasible basis, which makes it the
warm-start engine for branch-and-bound: children change only variable
bounds, so the parent's optimal basis stays dual feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

NB_LOWER = 0
NB_UPPER = 1
BASIC = 2
NB_FREE = 3

INF = float("inf")


class NumericalFailure(RuntimeError):
    """Simplex could not make progress within numerical safeguards."""


class Basis(NamedTuple):
    basic: np.ndarray  # (m,) work-column indices
    vstat: np.ndarray  # (num_work_columns,) status codes


@dataclass
class LpResult:
    status: str
    objective: float
    x: np.ndarray            # structural variable values, (nv,)
    basis: Optional[Basis]
    iterations: int


class BoundedSimplex:
    """Reusable solver for one constraint matrix with varying bounds."""

    CUTOFF = "cutoff"  # dual bound crossed the caller's cutoff; node prunable

    def __init__(self, a, senses, rhs, c,
                 feas_tol=1e-7, opt_tol=1e-7, pivot_tol=1e-9,
                 refactor_every=100, bland_after=60, max_iterations=None,
                 perturb=True):
        a = np.asarray(a, dtype=float)
        self.m, self.nv = a.shape
        m, nv = self.m, self.nv
        self.num_cols = nv + 2 * m  # structurals | slacks | artificials
        self.A = np.zeros((m, self.num_cols))
        self.A[:, :nv] = a
        self.A[:, nv:nv + m] = np.eye(m)
        self.A[:, nv + m:] = np.eye(m)
        self.b = np.asarray(rhs, dtype=float)
        self.c_struct = np.asarray(c, dtype=float)
        self.senses = list(senses)

        self.slack_lo = np.zeros(m)
        self.slack_up = np.zeros(m)
        for i, s in enumerate(senses):
            if s == "<=":
                self.slack_lo[i], self.slack_up[i] = 0.0, INF
            elif s == ">=":
                self.slack_lo[i], self.slack_up[i] = -INF, 0.0
            elif s == "=":
                self.slack_lo[i], self.slack_up[i] = 0.0, 0.0
            else:
                raise ValueError(f"unknown sense {s!r}")

        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iterations = max_iterations or (20000 + 50 * (m + self.num_cols))

        # Deterministic tiny cost perturbation: breaks the massive dual
        # degeneracy of models whose objective touches few variables.  The
        # true costs are restored before the final re-optimization, so
        # reported objectives are exact.
        self.perturb = perturb
        weights = np.arange(1, self.num_cols + 1, dtype=float)
        weights = 0.5 + ((weights * 2654435761.0) % 1048576.0) / 1048576.0
        self.pert = 1e-8 * weights
        self.pert[nv + m:] = 0.0  # keep artificials clean

        # Working state, set up per solve.
        self.lo = np.zeros(self.num_cols)
        self.up = np.zeros(self.num_cols)
        self.cost = np.zeros(self.num_cols)
        self.basic = np.arange(nv, nv + m, dtype=np.int64)
        self.vstat = np.full(self.num_cols, NB_LOWER, dtype=np.int8)
        self.x = np.zeros(self.num_cols)
        self.binv = np.eye(m)
        self.pivots_since_refactor = 0
        self.degenerate_streak = 0
        self.iterations = 0

    # -- bound / cost assembly --------------------------------------------

    def _load_bounds(self, lo, up):
        nv, m = self.nv, self.m
        self.lo[:nv] = lo
        self.up[:nv] = up
        self.lo[nv:nv + m] = self.slack_lo
        self.up[nv:nv + m] = self.slack_up
        self.lo[nv + m:] = 0.0
        self.up[nv + m:] = 0.0

    def _load_cost(self, phase1=False, phase1_sign=None):
        self.cost[:] = 0.0
        if phase1:
            self.cost[self.nv + self.m:] = phase1_sign
        else:
            self.cost[:self.nv] = self.c_struct

    def _nonbasic_value(self, j):
        st = self.vstat[j]
        if st == NB_LOWER:
            return self.lo[j]
        if st == NB_UPPER:
            return self.up[j]
        return 0.0  # free, pinned at zero

    def _place_nonbasic(self):
        """Snap every nonbasic variable onto a valid bound for current lo/up."""
        for j in range(self.num_cols):
            if self.vstat[j] == BASIC:
                continue
            if self.lo[j] == -INF and self.up[j] == INF:
                self.vstat[j] = NB_FREE
                self.x[j] = 0.0
                continue
            if self.vstat[j] == NB_UPPER and self.up[j] != INF:
                self.x[j] = self.up[j]
            elif self.lo[j] != -INF:
                self.vstat[j] = NB_LOWER
                self.x[j] = self.lo[j]
            else:
                self.vstat[j] = NB_UPPER
                self.x[j] = self.up[j]

    def _refactor(self):
        try:
            self.binv = np.linalg.inv(self.A[:, self.basic])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        if not np.all(np.isfinite(self.binv)):
            raise NumericalFailure("non-finite basis inverse")
        self._recompute_basics()
        self.pivots_since_refactor = 0

    def _recompute_basics(self):
        xn = self.x.copy()
        xn[self.basic] = 0.0
        self.x[self.basic] = self.binv @ (self.b - self.A @ xn)

    def _reduced_costs(self):
        y = self.binv.T @ self.cost[self.basic]
        return self.cost - y @ self.A

    def _lagrangian_bound(self):
        """Exact LP lower bound from the current basis's duals (true costs).

        Weak duality with bounds: g(y) = y'b + sum_j min over [lo_j, up_j]
        of (c_j - y'A_j) x_j.  Valid for any y, so it is safe even while the
        working costs are perturbed.
        """
        cost = np.zeros(self.num_cols)
        cost[:self.nv] = self.c_struct
        y = self.binv.T @ cost[self.basic]
        d = cost - y @ self.A
        pos = d > 1e-12
        neg = d < -1e-12
        if np.any(pos & (self.lo == -INF)) or np.any(neg & (self.up == INF)):
            return -INF
        total = float(y @ self.b)
        total += float(d[pos] @ self.lo[pos])
        total += float(d[neg] @ self.up[neg])
        return total

    def _update_binv(self, w, r):
        piv = w[r]
        if abs(piv) < self.pivot_tol:
            raise NumericalFailure("pivot element below tolerance")
        row = self.binv[r] / piv
        w = w.copy()
        w[r] = 0.0
        self.binv -= np.outer(w, row)
        self.binv[r] = row
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= self.refactor_every:
            self._refactor()

    # -- primal simplex ----------------------------------------------------

    def _primal_iterate(self):
        """Run primal pivots until optimal or unbounded. Returns status."""
        bland_countdown = 0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericalFailure("iteration limit exceeded")
            d = self._reduced_costs()
            at_lo = self.vstat == NB_LOWER
            at_up = self.vstat == NB_UPPER
            free = self.vstat == NB_FREE
            movable = (self.up - self.lo) > 0
            cand = ((at_lo & movable & (d < -self.opt_tol))
                    | (at_up & movable & (d > self.opt_tol))
                    | (free & (np.abs(d) > self.opt_tol)))
            idx = np.nonzero(cand)[0]
            if idx.size == 0:
                return OPTIMAL
            if bland_countdown > 0:
                j = int(idx[0])
                bland_countdown -= 1
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if (d[j] < 0) else -1.0

            w = self.binv @ self.A[:, j]
            rate = -direction * w  # change of basic values per unit step
            xb = self.x[self.basic]
            lob = self.lo[self.basic]
            upb = self.up[self.basic]

            theta = self.up[j] - self.lo[j]  # bound-flip step (inf if one-sided)
            leave_pos = -1
            dec = rate < -self.pivot_tol
            inc = rate > self.pivot_tol
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where(dec & (lob != -INF), (xb - lob) / -rate, INF)
                t_inc = np.where(inc & (upb != INF), (upb - xb) / rate, INF)
            steps = np.minimum(t_dec, t_inc)
            steps = np.maximum(steps, 0.0)
            rmin = steps.min() if steps.size else INF
            if rmin < theta:
                theta = rmin
                achievers = np.nonzero(steps <= rmin + 1e-12)[0]
                leave_pos = int(achievers[np.argmax(np.abs(rate[achievers]))])
            if theta == INF:
                return UNBOUNDED

            if theta < 1e-11:
                self.degenerate_streak += 1
                if self.degenerate_streak >= self.bland_after:
                    bland_countdown = 200
                    self.degenerate_streak = 0
            else:
                self.degenerate_streak = 0

            self.x[self.basic] += rate * theta
            self.x[j] += direction * theta
            if leave_pos < 0:
                # bound flip: j moves to its opposite bound, basis unchanged
                self.vstat[j] = NB_UPPER if direction > 0 else NB_LOWER
                self.x[j] = self.up[j] if direction > 0 else self.lo[j]
                continue
            leaving = self.basic[leave_pos]
            to_lower = rate[leave_pos] < 0
            self.vstat[leaving] = NB_LOWER if to_lower else NB_UPPER
            self.x[leaving] = self.lo[leaving] if to_lower else self.up[leaving]
            self.vstat[j] = BASIC
            self.basic[leave_pos] = j
            self._update_binv(w, leave_pos)

    def solve_primal(self, lo, up):
        """Two-phase primal solve from the all-slack basis.

        Phase 1 re-seats each out-of-bounds slack onto its bound and gives
        the row's artificial the residual, which is only sound because the
        starting basis is the identity.
        """
        self._load_bounds(lo, up)
        self.basic = np.arange(self.nv, self.nv + self.m, dtype=np.int64)
        self.vstat[:] = NB_LOWER
        self.vstat[self.basic] = BASIC
        self._place_nonbasic()
        self._refactor()
        self.iterations = 0
        self.degenerate_streak = 0

        # Phase 1: open an artificial for every out-of-bounds basic variable.
        xb = self.x[self.basic]
        viol_lo = xb < self.lo[self.basic] - self.feas_tol
        viol_up = xb > self.up[self.basic] + self.feas_tol
        if viol_lo.any() or viol_up.any():
            phase1_sign = np.zeros(self.m)
            for pos in np.nonzero(viol_lo | viol_up)[0]:
                var = self.basic[pos]
                art = self.nv + self.m + pos
                target = self.lo[var] if viol_lo[pos] else self.up[var]
                gap = self.x[var] - target
                self.vstat[var] = NB_LOWER if viol_lo[pos] else NB_UPPER
                self.x[var] = target
                self.basic[pos] = art
                self.vstat[art] = BASIC
                if gap > 0:
                    self.lo[art], self.up[art] = 0.0, INF
                    phase1_sign[pos] = 1.0
                else:
                    self.lo[art], self.up[art] = -INF, 0.0
                    phase1_sign[pos] = -1.0
            self._refactor()
            self._load_cost(phase1=True, phase1_sign=phase1_sign)
            status = self._primal_iterate()
            art_cols = np.arange(self.nv + self.m, self.num_cols)
            infeas = float(np.abs(self.x[art_cols]).sum())
            if status != OPTIMAL or infeas > 1e-6:
                return LpResult(INFEASIBLE, INF, self.x[:self.nv].copy(), None,
                                self.iterations)
            self.lo[art_cols] = 0.0
            self.up[art_cols] = 0.0
            self.x[art_cols] = np.where(self.vstat[art_cols] == BASIC,
                                        self.x[art_cols], 0.0)

        self._load_cost(phase1=False)
        status = self._primal_iterate()
        return self._finish(status)

    # -- dual simplex -------------------------------------------------------

    def solve_dual(self, lo, up, basis, cutoff=INF):
        """Dual simplex from a dual-feasible basis (bound changes allowed).

        The basic solution's objective equals the dual objective, so it is a
        valid and monotone LP lower bound: once it crosses `cutoff` the solve
        stops early with status CUTOFF (used for branch-and-bound pruning).
        """
        self._load_bounds(lo, up)
        self.basic = basis.basic.copy()
        self.vstat = basis.vstat.copy()
        self._place_nonbasic()
        self._load_cost(phase1=False)
        if self.perturb:
            self.cost = self.cost + self.pert
            finite = np.maximum(np.abs(np.where(np.isfinite(self.lo), self.lo, 0.0)),
                                np.abs(np.where(np.isfinite(self.up), self.up, 0.0)))
            margin = float(self.pert @ finite) + 1e-9
        else:
            margin = 1e-9
        self._refactor()
        self.iterations = 0
        self.degenerate_streak = 0

        d = self._reduced_costs()
        # Repair dual feasibility by flipping nonbasic variables when possible.
        for j in np.nonzero((self.vstat == NB_LOWER) & (d < -self.opt_tol))[0]:
            if self.up[j] != INF:
                self.vstat[j] = NB_UPPER
                self.x[j] = self.up[j]
            else:
                return self.solve_primal(lo, up)
        for j in np.nonzero((self.vstat == NB_UPPER) & (d > self.opt_tol))[0]:
            if self.lo[j] != -INF:
                self.vstat[j] = NB_LOWER
                self.x[j] = self.lo[j]
            else:
                return self.solve_primal(lo, up)
        if np.any((self.vstat == NB_FREE) & (np.abs(d) > self.opt_tol)):
            return self.solve_primal(lo, up)
        self._recompute_basics()

        bland_countdown = 0
        cutoff_cooldown = 0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise NumericalFailure("iteration limit exceeded")
            if cutoff_cooldown > 0:
                cutoff_cooldown -= 1
            if self.pivots_since_refactor == 0:
                d = self._reduced_costs()

            if cutoff != INF and cutoff_cooldown == 0:
                zdual = float(self.cost @ self.x)
                if zdual - margin >= cutoff:
                    exact = self._lagrangian_bound()
                    if exact >= cutoff:
                        return LpResult(self.CUTOFF, exact,
                                        self.x[:self.nv].copy(), None,
                                        self.iterations)
                    cutoff_cooldown = 50

            xb = self.x[self.basic]
            below = self.lo[self.basic] - xb
            above = xb - self.up[self.basic]
            viol = np.maximum(below, above)
            if viol.max(initial=-INF) <= self.feas_tol:
                self._load_cost(phase1=False)  # drop the perturbation
                status = self._primal_iterate()
                return self._finish(status)
            if bland_countdown > 0:
                bland_countdown -= 1
                r = int(np.nonzero(viol > self.feas_tol)[0][0])
            else:
                r = int(np.argmax(viol))
            below_lower = below[r] > above[r]

            alpha = self.binv[r] @ self.A
            sigma = -1.0 if below_lower else 1.0
            sa = sigma * alpha
            at_lo = (self.vstat == NB_LOWER) & ((self.up - self.lo) > 0)
            at_up = (self.vstat == NB_UPPER) & ((self.up - self.lo) > 0)
            free = self.vstat == NB_FREE
            cand = ((at_lo & (sa > self.pivot_tol))
                    | (at_up & (sa < -self.pivot_tol))
                    | (free & (np.abs(sa) > self.pivot_tol)))
            idx = np.nonzero(cand)[0]
            if idx.size == 0:
                return LpResult(INFEASIBLE, INF, self.x[:self.nv].copy(), None,
                                self.iterations)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.abs(d[idx]) / np.abs(alpha[idx])
            best = ratios.min()
            near = idx[ratios <= best + 1e-10]
            if bland_countdown > 0:
                j = int(near[0])
            else:
                j = int(near[np.argmax(np.abs(alpha[near]))])

            theta_dual = abs(d[j]) / max(abs(alpha[j]), 1e-300)
            if theta_dual < 1e-11:
                self.degenerate_streak += 1
                if self.degenerate_streak >= self.bland_after:
                    bland_countdown = 500
                    self.degenerate_streak = 0
            else:
                self.degenerate_streak = 0

            target = self.lo[self.basic[r]] if below_lower else self.up[self.basic[r]]
            delta = (self.x[self.basic[r]] - target) / alpha[j]
            w = self.binv @ self.A[:, j]
            leaving = self.basic[r]
            self.x[self.basic] -= delta * w
            self.x[j] = self._nonbasic_value(j) + delta
            self.vstat[leaving] = NB_LOWER if below_lower else NB_UPPER
            self.x[leaving] = target
            self.vstat[j] = BASIC
            self.basic[r] = j
            d = d - (d[j] / alpha[j]) * alpha  # incremental dual update
            d[j] = 0.0
            self._update_binv(w, r)

    # -- shared ------------------------------------------------------------

    def _finish(self, status):
        if status == UNBOUNDED:
            return LpResult(UNBOUNDED, -INF, self.x[:self.nv].copy(), None,
                            self.iterations)
        self._refactor()
        xb = self.x[self.basic]
        drift = np.maximum(self.lo[self.basic] - xb, xb - self.up[self.basic])
        if drift.max(initial=0.0) > 1e-5:
            raise NumericalFailure("primal feasibility lost; basis unstable")
        xs = np.clip(self.x[:self.nv], self.lo[:self.nv], self.up[:self.nv])
        obj = float(self.c_struct @ xs)
        basis = Basis(self.basic.copy(), self.vstat.copy())
        return LpResult(OPTIMAL, obj, xs, basis, self.iterations)

    def solve(self, lo, up, basis=None, cutoff=INF):
        """Dual-first when warm or when the cold slack basis is dual feasible."""
        if basis is not None:
            return self.solve_dual(lo, up, basis, cutoff=cutoff)
        self._load_bounds(lo, up)
        self.basic = np.arange(self.nv, self.nv + self.m, dtype=np.int64)
        self.vstat[:] = NB_LOWER
        self.vstat[self.basic] = BASIC
        # Point every structural variable at the bound its cost prefers.
        ok = True
        for j in range(self.nv):
            cj = self.c_struct[j]
            if cj == 0 and self.lo[j] == -INF and self.up[j] == INF:
                self.vstat[j] = NB_FREE
            elif cj >= 0 and self.lo[j] != -INF:
                self.vstat[j] = NB_LOWER
            elif cj >= 0:
                ok = cj == 0 and self.up[j] != INF
                self.vstat[j] = NB_UPPER
            elif self.up[j] != INF:
                self.vstat[j] = NB_UPPER
            else:
                ok = False
            if not ok:
                break
        if ok:
            start = Basis(self.basic.copy(), self.vstat.copy())
            return self.solve_dual(lo, up, start)
        return self.solve_primal(lo, up)
