"""LP backends for the restricted master problem.

All backends solve ``min c x`` subject to row constraints with senses
``E`` (=), ``L`` (<=) or ``G`` (>=) and ``x >= 0``, and return row duals
``y`` with the convention that reduced costs are ``c - A^T y``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

log = logging.getLogger(__name__)


class LPError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str            # "optimal", "infeasible" or "unbounded"
    x: np.ndarray
    objective: float
    y: np.ndarray
    iterations: int = 0


def _split(A, senses, b):
    senses = np.asarray(senses)
    eq = np.flatnonzero(senses == "E")
    le = np.flatnonzero(senses == "L")
    ge = np.flatnonzero(senses == "G")
    return eq, le, ge


def solve_highs(c, A, senses, b) -> LPResult:
    """Dual simplex of HiGHS through scipy."""
    A = sparse.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    eq, le, ge = _split(A, senses, b)
    ub_rows = np.concatenate([le, ge])
    sign = np.concatenate([np.ones(len(le)), -np.ones(len(ge))])
    A_ub = sparse.diags(sign) @ A[ub_rows] if len(ub_rows) else None
    b_ub = sign * b[ub_rows] if len(ub_rows) else None
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A[eq] if len(eq) else None,
                  b_eq=b[eq] if len(eq) else None, bounds=(0, None), method="highs-ds")
    m = A.shape[0]
    if res.status == 2:
        return LPResult("infeasible", np.zeros(A.shape[1]), np.inf, np.zeros(m))
    if res.status == 3:
        return LPResult("unbounded", np.zeros(A.shape[1]), -np.inf, np.zeros(m))
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    y = np.zeros(m)
    if len(eq):
        y[eq] = res.eqlin.marginals
    if len(ub_rows):
        y[ub_rows] = sign * res.ineqlin.marginals
    return LPResult("optimal", res.x, float(res.fun), y, int(getattr(res, "nit", 0)))


class RevisedSimplex:
    """Dense two-phase revised simplex with an explicit basis inverse.

    Dantzig pricing is used until a run of degenerate pivots is detected,
    then Bland's rule takes over until the objective moves again.
    """

    def __init__(self, tol: float = 1e-9, max_iter: int = 100000, refactor: int = 50,
                 degenerate_limit: int = 30):
        self.tol = tol
        self.max_iter = max_iter
        self.refactor = refactor
        self.degenerate_limit = degenerate_limit

    def solve(self, c, A, senses, b) -> LPResult:
        A = A.toarray() if sparse.issparse(A) else np.array(A, dtype=float)
        c = np.asarray(c, dtype=float)
        b = np.array(b, dtype=float)
        senses = list(senses)
        m, n = A.shape
        flip = b < 0
        A[flip] *= -1
        b[flip] *= -1
        for i in np.flatnonzero(flip):
            senses[i] = {"L": "G", "G": "L", "E": "E"}[senses[i]]
        # structural | slacks | artificials
        cols = [A]
        basis = [-1] * m
        n_slack = sum(s != "E" for s in senses)
        S = np.zeros((m, n_slack))
        k = 0
        for i, s in enumerate(senses):
            if s == "L":
                S[i, k] = 1.0
                basis[i] = n + k
                k += 1
            elif s == "G":
                S[i, k] = -1.0
                k += 1
        cols.append(S)
        art_rows = [i for i in range(m) if basis[i] < 0]
        R = np.zeros((m, len(art_rows)))
        first_art = n + n_slack
        for j, i in enumerate(art_rows):
            R[i, j] = 1.0
            basis[i] = first_art + j
        full = np.hstack(cols + [R])
        total = full.shape[1]
        it = 0
        if art_rows:
            c1 = np.zeros(total)
            c1[first_art:] = 1.0
            status, basis, it = self._run(full, b, c1, basis, total, it)
            x = self._primal(full, b, basis, total)
            if x[first_art:].sum() > 1e-7 * max(1.0, np.abs(b).max()):
                return LPResult("infeasible", np.zeros(n), np.inf, np.zeros(m), it)
            basis, full, b, keep = self._drive_out(full, b, basis, first_art)
        else:
            keep = np.arange(m)
        c2 = np.zeros(full.shape[1])
        c2[:n] = c
        status, basis, it = self._run(full, b, c2, basis, first_art, it)
        if status == "unbounded":
            return LPResult("unbounded", np.zeros(n), -np.inf, np.zeros(m), it)
        x = self._primal(full, b, basis, full.shape[1])
        B_inv = np.linalg.inv(full[:, basis])
        y_red = c2[basis] @ B_inv
        y = np.zeros(m)
        y[keep] = y_red
        y[flip] *= -1
        return LPResult("optimal", x[:n], float(c @ x[:n]), y, it)

    def _primal(self, full, b, basis, total):
        x = np.zeros(total)
        x[basis] = np.linalg.solve(full[:, basis], b)
        return x

    def _run(self, A, b, c, basis, allowed, it):
        """Simplex iterations; only columns below ``allowed`` may enter."""
        m = A.shape[0]
        B_inv = np.linalg.inv(A[:, basis])
        xb = B_inv @ b
        since = 0
        degenerate = 0
        bland = False
        tol = self.tol
        while it < self.max_iter:
            it += 1
            y = c[basis] @ B_inv
            d = c[:allowed] - y @ A[:, :allowed]
            d[basis_mask(basis, allowed)] = 0.0
            cand = np.flatnonzero(d < -tol)
            if cand.size == 0:
                return "optimal", basis, it
            j = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            u = B_inv @ A[:, j]
            pos = np.flatnonzero(u > tol)
            if pos.size == 0:
                return "unbounded", basis, it
            ratios = xb[pos] / u[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol]
            r = int(min(ties, key=lambda i: basis[i])) if bland else int(ties[np.argmax(u[ties])])
            theta = xb[r] / u[r]
            if theta <= tol:
                degenerate += 1
                if degenerate >= self.degenerate_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False
            # rank-one update of the basis inverse
            piv = B_inv[r] / u[r]
            B_inv -= np.outer(u, piv)
            B_inv[r] = piv
            xb = xb - theta * u
            xb[r] = theta
            basis[r] = j
            since += 1
            if since >= self.refactor:
                B_inv = np.linalg.inv(A[:, basis])
                xb = B_inv @ b
                since = 0
            xb[np.abs(xb) < 1e-13] = 0.0
        raise LPError(f"simplex iteration limit {self.max_iter} reached")

    def _drive_out(self, A, b, basis, first_art):
        """Pivot basic artificials out; drop rows that turn out redundant."""
        m = A.shape[0]
        keep = list(range(m))
        B_inv = np.linalg.inv(A[:, basis])
        for r in range(m):
            if basis[r] < first_art:
                continue
            row = B_inv[r] @ A[:, :first_art]
            nz = [j for j in np.flatnonzero(np.abs(row) > 1e-9) if j not in basis]
            if nz:
                basis[r] = int(nz[0])
                B_inv = np.linalg.inv(A[:, basis])
            else:
                keep.remove(r)
        keep = np.array(keep, dtype=int)
        if len(keep) < m:
            basis = [basis[i] for i in keep]
            A = A[keep]
            b = b[keep]
        return basis, A[:, :first_art], b, keep


def basis_mask(basis, allowed):
    return [j for j in basis if j < allowed]


class LPSession:
    """LP whose columns arrive incrementally; rows are fixed at creation.

    ``solve`` returns values for all columns added so far, in order.
    """

    def __init__(self, senses, rhs):
        self.senses = list(senses)
        self.rhs = np.asarray(rhs, dtype=float)
        self.costs: list = []
        self.col_rows: list = []

    @property
    def n_cols(self) -> int:
        return len(self.costs)

    def add_columns(self, costs, rows) -> None:
        self.costs.extend(float(c) for c in costs)
        self.col_rows.extend(np.asarray(r, dtype=np.int64) for r in rows)

    def matrix(self):
        m = len(self.senses)
        lens = np.array([len(r) for r in self.col_rows], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(lens)])
        indices = np.concatenate(self.col_rows) if self.col_rows else np.zeros(0, dtype=np.int64)
        return sparse.csc_matrix((np.ones(len(indices)), indices, indptr), shape=(m, self.n_cols))

    def solve(self) -> LPResult:
        raise NotImplementedError


class RebuildSession(LPSession):
    """Re-solves from scratch with one of the stateless backends."""

    def __init__(self, senses, rhs, backend: str):
        super().__init__(senses, rhs)
        self.backend = backend

    def solve(self) -> LPResult:
        return solve_lp(np.array(self.costs), self.matrix(), self.senses, self.rhs, self.backend)


class HighsSession(LPSession):
    """Persistent HiGHS model, warm-started from the previous basis."""

    def __init__(self, senses, rhs):
        super().__init__(senses, rhs)
        import highspy
        self._h = h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("threads", 1)
        inf = highspy.kHighsInf
        lo = np.array([-inf if s == "L" else b for s, b in zip(self.senses, self.rhs)])
        hi = np.array([inf if s == "G" else b for s, b in zip(self.senses, self.rhs)])
        m = len(self.senses)
        h.addRows(m, lo, hi, 0, np.zeros(m, dtype=np.int32), np.zeros(0, dtype=np.int32),
                  np.zeros(0))
        self._inf = inf

    def add_columns(self, costs, rows) -> None:
        rows = [np.asarray(r, dtype=np.int32) for r in rows]
        if not rows:
            return
        super().add_columns(costs, rows)
        lens = np.array([len(r) for r in rows], dtype=np.int32)
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int32)
        idx = np.concatenate(rows).astype(np.int32)
        k = len(rows)
        self._h.addCols(k, np.asarray(costs, dtype=float), np.zeros(k), np.full(k, self._inf),
                        len(idx), starts, idx, np.ones(len(idx)))

    def solve(self) -> LPResult:
        import highspy
        h = self._h
        h.run()
        status = h.getModelStatus()
        if status not in (highspy.HighsModelStatus.kOptimal, highspy.HighsModelStatus.kInfeasible,
                          highspy.HighsModelStatus.kUnbounded):
            # warm start ran into numerical trouble: retry from scratch
            log.debug("HiGHS warm start ended with %s, re-solving cold",
                      h.modelStatusToString(status))
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            return LPResult("infeasible", np.zeros(self.n_cols), np.inf, np.zeros(len(self.senses)))
        if status == highspy.HighsModelStatus.kUnbounded:
            return LPResult("unbounded", np.zeros(self.n_cols), -np.inf, np.zeros(len(self.senses)))
        if status != highspy.HighsModelStatus.kOptimal:
            raise LPError(f"HiGHS status {h.modelStatusToString(status)}")
        sol = h.getSolution()
        return LPResult("optimal", np.array(sol.col_value), h.getInfo().objective_function_value,
                        np.array(sol.row_dual), int(h.getInfo().simplex_iteration_count))


def make_session(senses, rhs, backend: str = "highs") -> LPSession:
    if backend == "highs":
        return HighsSession(senses, rhs)
    if backend in BACKENDS:
        return RebuildSession(senses, rhs, backend)
    raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS) + ['highs']}")


BACKENDS = {"scipy": solve_highs, "simplex": lambda c, A, s, b: RevisedSimplex().solve(c, A, s, b)}


def solve_lp(c, A, senses, b, backend: str = "scipy") -> LPResult:
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    return fn(c, A, senses, b)
