"""Real-valued conic program IR with linear, second-order-cone and
exponential-cone blocks, solved through an interior-point backend.

The program is self-describing: every block can be evaluated directly at a
candidate point, and `solve` re-checks the returned primal against all
blocks so an inaccurate solve is reported as a failure rather than silently
accepted.

Complex quantities enter as interleaved real variables: a complex vector of
dimension n occupies 2n reals [Re z_0, Im z_0, Re z_1, ...], and |z|^2 terms
become squared 2-norms of that embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

import clarabel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"
ITERATION_LIMIT = "iteration-limit"

DEFAULT_TOLERANCE = 1e-8


@dataclass
class LinExpr:
    """Affine expression coef . x + const over variable indices idx."""

    idx: np.ndarray
    coef: np.ndarray
    const: float = 0.0

    @classmethod
    def make(cls, terms=None, const=0.0):
        terms = terms or {}
        idx = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
        coef = np.fromiter(terms.values(), dtype=float, count=len(terms))
        return cls(idx=idx, coef=coef, const=float(const))

    def value(self, x):
        return float(self.coef @ x[self.idx] + self.const)

    def scaled(self, s):
        return LinExpr(self.idx, self.coef * s, self.const * s)

    def plus(self, other):
        return LinExpr(
            np.concatenate([self.idx, other.idx]),
            np.concatenate([self.coef, other.coef]),
            self.const + other.const,
        )

    def minus(self, other):
        return self.plus(other.scaled(-1.0))

    def shifted(self, delta):
        return LinExpr(self.idx, self.coef, self.const + delta)


def lin(terms=None, const=0.0):
    return LinExpr.make(terms, const)


def complex_rows(a, indices):
    """Affine rows for Re(a^H w) and Im(a^H w), with w stored interleaved
    over `indices` (length 2 * len(a))."""
    n = len(a)
    idx = np.asarray(indices, dtype=np.int64)
    re_coef = np.empty(2 * n)
    re_coef[0::2] = a.real
    re_coef[1::2] = a.imag
    im_coef = np.empty(2 * n)
    im_coef[0::2] = -a.imag
    im_coef[1::2] = a.real
    return LinExpr(idx, re_coef), LinExpr(idx, im_coef)


def embed_complex(z):
    """Interleaved real embedding of a complex vector."""
    out = np.empty(2 * len(z))
    out[0::2] = np.real(z)
    out[1::2] = np.imag(z)
    return out


def extract_complex(x, indices):
    """Inverse of `embed_complex` for a solution vector."""
    vals = x[np.asarray(indices, dtype=np.int64)]
    return vals[0::2] + 1j * vals[1::2]


@dataclass
class LinearBlock:
    expr: LinExpr          # expr(x) <= 0 or expr(x) == 0
    equality: bool

    def violation(self, x):
        """Residual normalized by the block magnitude (floor 1, so plain
        absolute for O(1) data)."""
        v = self.expr.value(x)
        v = abs(v) if self.equality else v
        return v / max(1.0, abs(self.expr.const))


@dataclass
class SocBlock:
    rows: list             # vector part A x + d
    bound: LinExpr         # g . x + h

    def violation(self, x):
        norm = math.sqrt(sum(r.value(x) ** 2 for r in self.rows))
        bound = self.bound.value(x)
        return (norm - bound) / max(1.0, abs(bound))


@dataclass
class ExpBlock:
    """(p, q, r) constrained to q > 0, q * exp(p / q) <= r."""

    p: LinExpr
    q: LinExpr
    r: LinExpr

    def violation(self, x):
        p, q, r = self.p.value(x), self.q.value(x), self.r.value(x)
        if q <= 0.0:
            # closure of the cone: p <= 0, q = 0, r >= 0
            return max(-q, p, -r)
        return (q * math.exp(min(p / q, 700.0)) - r) / max(1.0, abs(r))


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray | None
    objective: float | None


class ConicProgram:
    """Maximize c . x subject to linear / SOC / exponential-cone blocks and
    variable bounds."""

    def __init__(self):
        self.num_vars = 0
        self.objective = {}
        self.lower = []
        self.upper = []
        self.blocks = []

    # -- construction ------------------------------------------------------

    def add_variables(self, count=1, lb=-np.inf, ub=np.inf):
        start = self.num_vars
        self.num_vars += count
        self.lower.extend([lb] * count)
        self.upper.extend([ub] * count)
        return range(start, start + count)

    def add_variable(self, lb=-np.inf, ub=np.inf):
        return self.add_variables(1, lb, ub)[0]

    def set_objective(self, terms):
        self.objective = dict(terms)

    def _check(self, *exprs):
        for e in exprs:
            if len(e.idx) and (e.idx.min() < 0 or e.idx.max() >= self.num_vars):
                raise IndexError("constraint references an unknown variable")

    def add_linear(self, expr, equality=False):
        self._check(expr)
        self.blocks.append(LinearBlock(expr=expr, equality=equality))
        return len(self.blocks) - 1

    def add_soc(self, rows, bound):
        self._check(*rows, bound)
        self.blocks.append(SocBlock(rows=list(rows), bound=bound))
        return len(self.blocks) - 1

    def add_exp(self, p, q, r):
        self._check(p, q, r)
        self.blocks.append(ExpBlock(p=p, q=q, r=r))
        return len(self.blocks) - 1

    def add_quad_le_product(self, rows, f, g):
        """||v||^2 <= f(x) * g(x) with f, g affine and nonnegative at any
        feasible point, as the SOC ||(2v, f - g)||_2 <= f + g."""
        scaled = [r.scaled(2.0) for r in rows]
        scaled.append(f.minus(g))
        return self.add_soc(scaled, f.plus(g))

    def add_quad_le_affine(self, rows, affine):
        """||v||^2 <= a(x) via the rotated-cone reduction with unit partner."""
        return self.add_quad_le_product(rows, affine, lin(const=1.0))

    # -- introspection -----------------------------------------------------

    def blocks_of(self, kind):
        return [b for b in self.blocks if isinstance(b, kind)]

    @property
    def num_linear_blocks(self):
        return len(self.blocks_of(LinearBlock))

    @property
    def num_soc_blocks(self):
        return len(self.blocks_of(SocBlock))

    @property
    def num_exp_blocks(self):
        return len(self.blocks_of(ExpBlock))

    def objective_value(self, x):
        return float(sum(c * x[i] for i, c in self.objective.items()))

    def max_violation(self, x):
        """Worst constraint violation at x, bounds included (<= 0 is feasible)."""
        worst = 0.0
        for block in self.blocks:
            worst = max(worst, block.violation(x))
        for i in range(self.num_vars):
            if self.lower[i] > -np.inf:
                worst = max(worst, self.lower[i] - x[i])
            if self.upper[i] < np.inf:
                worst = max(worst, x[i] - self.upper[i])
        return worst

    def dump(self):
        """One line per block; a plain-text form for cross-checking solvers."""

        def fmt(e):
            terms = " ".join(f"{i}:{c:.17g}" for i, c in zip(e.idx, e.coef))
            return f"[{terms} | {e.const:.17g}]"

        lines = [f"vars {self.num_vars}"]
        obj = " ".join(f"{i}:{c:.17g}" for i, c in sorted(self.objective.items()))
        lines.append(f"max {obj}")
        for i in range(self.num_vars):
            if self.lower[i] > -np.inf or self.upper[i] < np.inf:
                lines.append(f"bound {i} {self.lower[i]:.17g} {self.upper[i]:.17g}")
        for block in self.blocks:
            if isinstance(block, LinearBlock):
                op = "eq" if block.equality else "le"
                lines.append(f"lin {op} {fmt(block.expr)}")
            elif isinstance(block, SocBlock):
                rows = " ".join(fmt(r) for r in block.rows)
                lines.append(f"soc {fmt(block.bound)} {rows}")
            else:
                lines.append(f"exp {fmt(block.p)} {fmt(block.q)} {fmt(block.r)}")
        return "\n".join(lines) + "\n"

    # -- solving -----------------------------------------------------------

    def _assemble(self):
        """Clarabel form: min c'x  s.t.  A x + s = b, s in K."""
        rows_a = []     # (row_index, LinExpr with sign folded), b value
        b_vals = []
        cones = []

        def push(expr, bval):
            rows_a.append(expr)
            b_vals.append(bval)

        eq_blocks = self.blocks_of(LinearBlock)
        n_eq = sum(1 for blk in eq_blocks if blk.equality)
        for blk in eq_blocks:
            if blk.equality:
                push(blk.expr, -blk.expr.const)
        if n_eq:
            cones.append(clarabel.ZeroConeT(n_eq))

        n_ineq = 0
        for blk in eq_blocks:
            if not blk.equality:
                push(blk.expr, -blk.expr.const)
                n_ineq += 1
        for i in range(self.num_vars):
            if self.lower[i] > -np.inf:
                push(lin({i: -1.0}), -self.lower[i])
                n_ineq += 1
            if self.upper[i] < np.inf:
                push(lin({i: 1.0}), self.upper[i])
                n_ineq += 1
        if n_ineq:
            cones.append(clarabel.NonnegativeConeT(n_ineq))

        for blk in self.blocks_of(SocBlock):
            push(blk.bound.scaled(-1.0), blk.bound.const)
            for r in blk.rows:
                push(r.scaled(-1.0), r.const)
            cones.append(clarabel.SecondOrderConeT(1 + len(blk.rows)))

        for blk in self.blocks_of(ExpBlock):
            for e in (blk.p, blk.q, blk.r):
                push(e.scaled(-1.0), e.const)
            cones.append(clarabel.ExponentialConeT())

        m = len(rows_a)
        nnz_rows = []
        nnz_cols = []
        nnz_vals = []
        for r, expr in enumerate(rows_a):
            nnz_rows.append(np.full(len(expr.idx), r, dtype=np.int64))
            nnz_cols.append(expr.idx)
            nnz_vals.append(expr.coef)
        a_mat = sparse.csc_matrix(
            (
                np.concatenate(nnz_vals) if nnz_vals else np.empty(0),
                (
                    np.concatenate(nnz_rows) if nnz_rows else np.empty(0, dtype=np.int64),
                    np.concatenate(nnz_cols) if nnz_cols else np.empty(0, dtype=np.int64),
                ),
            ),
            shape=(m, self.num_vars),
        )
        c = np.zeros(self.num_vars)
        for i, coef in self.objective.items():
            c[i] = -coef  # backend minimizes
        return a_mat, np.asarray(b_vals), c, cones

    def solve(self, tolerance=DEFAULT_TOLERANCE, max_iter=200):
        """Solve the program; an `optimal` status means the returned point
        passed this module's own feasibility re-check at 10x tolerance."""
        if not self.blocks and not any(
            l > -np.inf or u < np.inf for l, u in zip(self.lower, self.upper)
        ):
            raise ValueError("program has no constraints")
        a_mat, b, c, cones = self._assemble()
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = max_iter
        settings.tol_gap_abs = tolerance
        settings.tol_gap_rel = tolerance
        settings.tol_feas = tolerance
        p_mat = sparse.csc_matrix((self.num_vars, self.num_vars))
        solver = clarabel.DefaultSolver(p_mat, c, a_mat, b, cones, settings)
        result = solver.solve()
        status = _map_status(result.status)
        if status != OPTIMAL:
            return ConicSolution(status=status, x=None, objective=None)
        # the backend's criteria apply to the equilibrated problem; accept a
        # point (including reduced-accuracy ones) only if it passes a direct
        # feasibility re-check and the duality gap certificate
        x = np.asarray(result.x)
        gap = abs(result.obj_val - result.obj_val_dual)
        gap_ok = gap <= tolerance * max(1.0, abs(result.obj_val), abs(result.obj_val_dual))
        if not gap_ok or self.max_violation(x) > 10.0 * tolerance:
            return ConicSolution(status=NUMERICAL_FAILURE, x=None, objective=None)
        return ConicSolution(status=OPTIMAL, x=x, objective=self.objective_value(x))


def _map_status(status):
    s = str(status).split(".")[-1]
    if s in ("Solved", "AlmostSolved"):
        # subject to the caller's own feasibility and gap verification
        return OPTIMAL
    if s == "PrimalInfeasible":
        return INFEASIBLE
    if s in ("MaxIterations", "MaxTime"):
        return ITERATION_LIMIT
    return NUMERICAL_FAILURE
