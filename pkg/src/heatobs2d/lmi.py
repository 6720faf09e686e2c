"""Affine symmetric-block matrix inequalities and dense SDP feasibility.

Constraints are affine matrix expressions in structured decision variables
(symmetric, symmetric positive definite, full, scalar).  Feasibility is
decided by a phase-I problem

    minimize t   s.t.   S_c(x)/s_c + eps_c I <= t I   for every <=-sense
                        constraint, hard PSD floors for >=-sense constraints
                        and positive-definite variables, t >= -1,

solved with the Clarabel primal-dual interior-point method.  Each block is
pre-scaled by the Frobenius norm of its constant term (s_c) and strict
inequalities carry an explicit margin eps_c, so "feasible" always means
"feasible with a checkable margin".  Every verdict is re-checked by a plain
symmetric eigensolver on the returned witness, independently of the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import time

import numpy as np
import clarabel
from scipy import sparse

from .errors import DesignInfeasible, PivotSingular

__all__ = [
    "Var",
    "DecisionLayout",
    "AffExpr",
    "const",
    "mul",
    "sym",
    "block",
    "AffineConstraint",
    "SolverTolerances",
    "ConstraintMargin",
    "FeasibilityResult",
    "solve_feasibility",
    "solve_min_norm",
    "verify_witness",
    "schur_reduce",
    "export_problem",
]

_STRUCTURES = ("symmetric-PD", "symmetric", "full", "scalar-positive", "scalar")


@dataclass(frozen=True)
class Var:
    name: str
    shape: tuple
    structure: str

    def __post_init__(self):
        if self.structure not in _STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        r, c = self.shape
        if self.structure.startswith("symmetric") and r != c:
            raise ValueError("symmetric variables must be square")
        if self.structure.startswith("scalar") and self.shape != (1, 1):
            raise ValueError("scalar variables have shape (1, 1)")

    @property
    def nparams(self):
        r, c = self.shape
        if self.structure.startswith("symmetric"):
            return r * (r + 1) // 2
        if self.structure.startswith("scalar"):
            return 1
        return r * c

    def basis(self):
        """Unit matrices spanning the variable's free entries."""
        r, c = self.shape
        out = []
        if self.structure.startswith("symmetric"):
            for i in range(r):
                for j in range(i, r):
                    E = np.zeros((r, r))
                    E[i, j] = 1.0
                    E[j, i] = 1.0
                    out.append(E)
        elif self.structure.startswith("scalar"):
            out.append(np.ones((1, 1)))
        else:
            for i in range(r):
                for j in range(c):
                    E = np.zeros((r, c))
                    E[i, j] = 1.0
                    out.append(E)
        return out

    def pack(self, M):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        r, c = self.shape
        if M.shape != (r, c):
            raise ValueError(f"value for {self.name} has shape {M.shape}, want {self.shape}")
        if self.structure.startswith("symmetric"):
            return np.array([M[i, j] for i in range(r) for j in range(i, r)])
        return M.reshape(-1)

    def unpack(self, vec):
        r, c = self.shape
        if self.structure.startswith("symmetric"):
            M = np.zeros((r, r))
            idx = 0
            for i in range(r):
                for j in range(i, r):
                    M[i, j] = vec[idx]
                    M[j, i] = vec[idx]
                    idx += 1
            return M
        return np.asarray(vec, dtype=float).reshape(self.shape)


class DecisionLayout:
    """Ordered collection of decision variables with flat parameterization."""

    def __init__(self, variables):
        self.variables = tuple(variables)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        self.slices = {}
        start = 0
        for v in self.variables:
            self.slices[v.name] = slice(start, start + v.nparams)
            start += v.nparams
        self.nparams = start
        self._by_name = {v.name: v for v in self.variables}

    def var(self, name):
        return self._by_name[name]

    def pack(self, witness):
        x = np.zeros(self.nparams)
        for v in self.variables:
            x[self.slices[v.name]] = v.pack(witness[v.name])
        return x

    def unpack(self, x):
        return {v.name: v.unpack(x[self.slices[v.name]]) for v in self.variables}


@dataclass(frozen=True)
class AffExpr:
    """Matrix-valued affine expression: const + sum_i L_i X_{v_i}^{(T)} R_i."""

    shape: tuple
    const: np.ndarray
    terms: tuple = ()   # (varname, L, R, transpose)

    def eval(self, witness):
        out = self.const.copy()
        for name, L, R, tr in self.terms:
            X = np.atleast_2d(np.asarray(witness[name], dtype=float))
            if tr:
                X = X.T
            out += L @ X @ R
        return out

    @property
    def T(self):
        return AffExpr(
            (self.shape[1], self.shape[0]), self.const.T.copy(),
            tuple((n, R.T, L.T, not tr) for n, L, R, tr in self.terms))

    def __add__(self, other):
        other = _as_expr(other, self.shape)
        if other.shape != self.shape:
            raise ValueError("shape mismatch in AffExpr addition")
        return AffExpr(self.shape, self.const + other.const, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        return self + (-_as_expr(other, self.shape))

    def __rsub__(self, other):
        return _as_expr(other, self.shape) + (-self)

    def __mul__(self, scalar):
        s = float(scalar)
        return AffExpr(self.shape, s * self.const,
                       tuple((n, s * L, R, tr) for n, L, R, tr in self.terms))

    __rmul__ = __mul__


def _as_expr(x, shape=None):
    if isinstance(x, AffExpr):
        return x
    M = np.atleast_2d(np.asarray(x, dtype=float))
    if shape is not None and M.shape == (1, 1) and shape != (1, 1):
        M = M[0, 0] * np.eye(*shape) if shape[0] == shape[1] else np.full(shape, M[0, 0])
    return AffExpr(M.shape, M)


def const(M):
    return _as_expr(M)


def mul(L, var, R=None, transpose=False):
    """Expression L @ X @ R (X the named variable, optionally transposed)."""
    name, shape = var.name, var.shape
    r, c = (shape[1], shape[0]) if transpose else shape
    L = np.eye(r) if L is None else np.atleast_2d(np.asarray(L, dtype=float))
    R = np.eye(c) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    out_shape = (L.shape[0], R.shape[1])
    return AffExpr(out_shape, np.zeros(out_shape), ((name, L, R, transpose),))


def sym(expr):
    return expr + expr.T


def block(grid):
    """Assemble a block matrix of AffExpr / ndarray / scalar-zero entries."""
    rows = len(grid)
    cols = len(grid[0])
    rdims = [None] * rows
    cdims = [None] * cols
    for i, row in enumerate(grid):
        if len(row) != cols:
            raise ValueError("ragged block grid")
        for j, e in enumerate(row):
            if e is None or (np.isscalar(e) and e == 0):
                continue
            sh = e.shape if isinstance(e, AffExpr) else np.atleast_2d(np.asarray(e)).shape
            rdims[i] = sh[0] if rdims[i] is None else rdims[i]
            cdims[j] = sh[1] if cdims[j] is None else cdims[j]
            if (rdims[i], cdims[j]) != sh:
                raise ValueError(f"block ({i},{j}) has shape {sh}, expected ({rdims[i]},{cdims[j]})")
    if any(d is None for d in rdims) or any(d is None for d in cdims):
        raise ValueError("could not infer all block dimensions")
    total = (sum(rdims), sum(cdims))
    out = AffExpr(total, np.zeros(total))
    roff = 0
    for i, row in enumerate(grid):
        coff = 0
        for j, e in enumerate(row):
            if e is not None and not (np.isscalar(e) and e == 0):
                e = _as_expr(e)
                P = np.zeros((total[0], rdims[i]))
                P[roff:roff + rdims[i], :] = np.eye(rdims[i])
                Q = np.zeros((cdims[j], total[1]))
                Q[:, coff:coff + cdims[j]] = np.eye(cdims[j])
                lifted = AffExpr(total, P @ e.const @ Q,
                                 tuple((n, P @ L, R @ Q, tr) for n, L, R, tr in e.terms))
                out = out + lifted
            coff += cdims[j]
        roff += rdims[i]
    return out


_SENSES = ("neg-def", "neg-semidef", "pos-semidef")


@dataclass(frozen=True)
class AffineConstraint:
    name: str
    expr: AffExpr
    sense: str

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.expr.shape[0] != self.expr.shape[1]:
            raise ValueError("constraint blocks must be square")

    @property
    def dim(self):
        return self.expr.shape[0]


@dataclass(frozen=True)
class SolverTolerances:
    eps_strict: float = 1e-7     # margin per unit scale for <=-sense blocks
    eps_pd: float = 1e-7         # floor for positive-definite variables
    feas_check: float = 1e-8     # eigensolver re-check allowance
    t_cap: float = 1.0
    max_iter: int = 200
    solver_tol: float = 1e-9


@dataclass(frozen=True)
class ConstraintMargin:
    eig_min: float
    eig_max: float
    scale: float
    ok: bool


@dataclass(frozen=True)
class FeasibilityResult:
    status: str                  # "feasible" | "infeasible" | "inconclusive"
    witness: dict = None
    margins: dict = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == "feasible"


def _svec(M):
    """Clarabel's scaled upper-triangle vectorization (column-major)."""
    n = M.shape[0]
    out = np.empty(n * (n + 1) // 2)
    r2 = np.sqrt(2.0)
    idx = 0
    for j in range(n):
        for i in range(j + 1):
            out[idx] = M[i, j] if i == j else M[i, j] * r2
            idx += 1
    return out


def _constraint_scale(expr):
    return max(1.0, float(np.linalg.norm(expr.const)))


class _Compiled:
    """Constant term and per-parameter coefficient matrices of one block."""

    def __init__(self, constraint, layout):
        self.constraint = constraint
        expr = constraint.expr
        self.C = expr.eval({v.name: np.zeros(v.shape) for v in layout.variables})
        self.scale = _constraint_scale(expr)
        dim = constraint.dim
        self.cols = np.zeros((layout.nparams, dim, dim))
        for name, L, R, tr in expr.terms:
            v = layout.var(name)
            sl = layout.slices[name]
            for j, E in enumerate(v.basis()):
                B = E.T if tr else E
                self.cols[sl.start + j] += L @ B @ R


def _assemble_cones(layout, compiled, tol, t_active, rhs_shift=None):
    """Common clarabel cone assembly.

    With t_active the last decision coordinate is the phase-I level t;
    otherwise constraint blocks use fixed right-hand shifts from rhs_shift
    (a mapping name -> level, in the scaled units of each block).
    """
    nx = layout.nparams + (1 if t_active else 0)
    A_rows, b_parts, cones = [], [], []

    # scalar floors: positive scalars, plus the t cap when active
    lin_rows, lin_b = [], []
    for v in layout.variables:
        if v.structure == "scalar-positive":
            row = np.zeros(nx)
            row[layout.slices[v.name].start] = -1.0
            lin_rows.append(row)
            lin_b.append(-tol.eps_pd)
    if t_active:
        row = np.zeros(nx)
        row[-1] = -1.0
        lin_rows.append(row)
        lin_b.append(tol.t_cap)
    if lin_rows:
        A_rows.append(np.vstack(lin_rows))
        b_parts.append(np.array(lin_b))
        cones.append(clarabel.NonnegativeConeT(len(lin_rows)))

    # hard PD floors for matrix variables
    for v in layout.variables:
        if v.structure == "symmetric-PD":
            n = v.shape[0]
            rows = np.zeros((n * (n + 1) // 2, nx))
            for j, E in enumerate(v.basis()):
                rows[:, layout.slices[v.name].start + j] = -_svec(E)
            A_rows.append(rows)
            b_parts.append(_svec(-tol.eps_pd * np.eye(n)))
            cones.append(clarabel.PSDTriangleConeT(n))

    for comp in compiled:
        c = comp.constraint
        dim = c.dim
        s = comp.scale
        if c.sense == "pos-semidef":
            rows = np.zeros((dim * (dim + 1) // 2, nx))
            for p in range(layout.nparams):
                col = comp.cols[p]
                if np.any(col):
                    rows[:, p] = -_svec(col)
            A_rows.append(rows)
            b_parts.append(_svec(comp.C))
            cones.append(clarabel.PSDTriangleConeT(dim))
            continue
        eps_c = tol.eps_strict  # both neg senses carry the margin
        rows = np.zeros((dim * (dim + 1) // 2, nx))
        for p in range(layout.nparams):
            col = comp.cols[p]
            if np.any(col):
                rows[:, p] = _svec(col / s)
        rhs = -comp.C / s - eps_c * np.eye(dim)
        if t_active:
            rows[:, -1] = -_svec(np.eye(dim))
        else:
            rhs = rhs + float(rhs_shift.get(c.name, 0.0)) * np.eye(dim)
        A_rows.append(rows)
        b_parts.append(_svec(rhs))
        cones.append(clarabel.PSDTriangleConeT(dim))

    A = sparse.csc_matrix(np.vstack(A_rows))
    b = np.concatenate(b_parts)
    return nx, A, b, cones


def _settings(tol):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = tol.max_iter
    s.tol_gap_abs = tol.solver_tol
    s.tol_gap_rel = tol.solver_tol
    s.tol_feas = tol.solver_tol
    return s


def solve_feasibility(layout, constraints, tol=None):
    """Phase-I feasibility with margins; witness independently re-verified."""
    tol = tol or SolverTolerances()
    compiled = [_Compiled(c, layout) for c in constraints]
    nx, A, b, cones = _assemble_cones(layout, compiled, tol, t_active=True)
    q = np.zeros(nx)
    q[-1] = 1.0
    P = sparse.csc_matrix((nx, nx))
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(P, q, A, b, cones, _settings(tol))
    sol = solver.solve()
    elapsed = time.perf_counter() - t0
    status = str(sol.status)
    diagnostics = {
        "solver_status": status,
        "iterations": sol.iterations,
        "solve_time": elapsed,
        "scales": {c.constraint.name: c.scale for c in compiled},
    }
    if status not in ("SolverStatus.Solved", "Solved", "SolverStatus.AlmostSolved", "AlmostSolved"):
        return FeasibilityResult("inconclusive", diagnostics=diagnostics)
    x = np.asarray(sol.x)
    t_star = float(x[-1])
    diagnostics["t_star"] = t_star
    witness = layout.unpack(x[:-1])
    if t_star >= 0.0:
        return FeasibilityResult("infeasible", diagnostics=diagnostics)
    margins = verify_witness(constraints, witness, tol)
    if all(m.ok for m in margins.values()):
        return FeasibilityResult("feasible", witness, margins, diagnostics)
    return FeasibilityResult("inconclusive", witness, margins, diagnostics)


def solve_min_norm(layout, constraints, norm_terms, margins, tol=None):
    """Minimize sum_i ||L_i X_{v_i} R_i - T_i||_F^2 at fixed block levels.

    margins maps constraint name -> required level (in scaled units, must be
    <= 0); unnamed constraints sit at level 0.  Raises DesignInfeasible when
    the restricted problem has no solution.
    """
    tol = tol or SolverTolerances()
    compiled = [_Compiled(c, layout) for c in constraints]
    nx, A, b, cones = _assemble_cones(layout, compiled, tol, t_active=False,
                                      rhs_shift=margins or {})
    Jrows, targets = [], []
    for name, L, R, T in norm_terms:
        v = layout.var(name)
        L = np.eye(v.shape[0]) if L is None else np.atleast_2d(L)
        R = np.eye(v.shape[1]) if R is None else np.atleast_2d(R)
        T = np.zeros((L.shape[0], R.shape[1])) if T is None else np.atleast_2d(T)
        J = np.zeros((T.size, nx))
        for j, E in enumerate(v.basis()):
            J[:, layout.slices[name].start + j] = (L @ E @ R).reshape(-1)
        Jrows.append(J)
        targets.append(T.reshape(-1))
    J = np.vstack(Jrows)
    tvec = np.concatenate(targets)
    P = sparse.csc_matrix(2.0 * (J.T @ J))
    q = -2.0 * (J.T @ tvec)
    solver = clarabel.DefaultSolver(P, q, A, b, cones, _settings(tol))
    sol = solver.solve()
    status = str(sol.status)
    if status not in ("SolverStatus.Solved", "Solved", "SolverStatus.AlmostSolved", "AlmostSolved"):
        raise DesignInfeasible(f"norm-minimization stage failed: {status}")
    return layout.unpack(np.asarray(sol.x))


def verify_witness(constraints, witness, tol=None):
    """Solver-independent margins from a plain symmetric eigensolver."""
    tol = tol or SolverTolerances()
    out = {}
    for c in constraints:
        M = c.expr.eval(witness)
        M = 0.5 * (M + M.T)
        eigs = np.linalg.eigvalsh(M)
        s = _constraint_scale(c.expr)
        if c.sense == "pos-semidef":
            ok = eigs[0] >= -tol.feas_check * s
        elif c.sense == "neg-semidef":
            ok = eigs[-1] <= tol.feas_check * s
        else:  # neg-def: require at least half the built-in margin
            ok = eigs[-1] <= -0.5 * tol.eps_strict * s
        out[c.name] = ConstraintMargin(float(eigs[0]), float(eigs[-1]), s, bool(ok))
    return out


def schur_reduce(M, pivot):
    """Schur complement of the (sign-definite) pivot block of a symmetric M.

    pivot is an index array/list selecting the block to eliminate; returns
    the reduced symmetric matrix on the complementary indices.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    pivot = np.asarray(pivot, dtype=int)
    keep = np.setdiff1d(np.arange(n), pivot)
    D = M[np.ix_(pivot, pivot)]
    eigs = np.linalg.eigvalsh(D)
    if eigs[0] * eigs[-1] <= 0 or np.min(np.abs(eigs)) < 1e-12 * max(1.0, np.max(np.abs(eigs))):
        raise PivotSingular("pivot block is singular or not sign-definite")
    A = M[np.ix_(keep, keep)]
    B = M[np.ix_(keep, pivot)]
    return A - B @ np.linalg.solve(D, B.T)


def export_problem(layout, constraints, path, manifest=None):
    """Plain-text export: layout header, then per-constraint coefficient triples.

    Format (one record per line):
        variables <n>
        var <name> <rows> <cols> <structure>
        constraints <n>
        constraint <name> <sense> <dim>
        const <i> <j> <value>              # upper-triangle nonzeros
        coef <var> <param> <i> <j> <value> # d(block)/d(param), upper triangle
    Parameters enumerate each variable's free entries: symmetric variables
    row-major over the upper triangle, full variables row-major, scalars a
    single parameter.
    """
    lines = []
    if manifest:
        lines.append("# manifest " + json.dumps(manifest, sort_keys=True))
    lines.append(f"variables {len(layout.variables)}")
    for v in layout.variables:
        lines.append(f"var {v.name} {v.shape[0]} {v.shape[1]} {v.structure}")
    lines.append(f"constraints {len(constraints)}")
    for c in constraints:
        comp = _Compiled(c, layout)
        lines.append(f"constraint {c.name} {c.sense} {c.dim}")
        for i in range(c.dim):
            for j in range(i, c.dim):
                if comp.C[i, j] != 0.0:
                    lines.append(f"const {i} {j} {comp.C[i, j]!r}")
        for v in layout.variables:
            sl = layout.slices[v.name]
            for p in range(v.nparams):
                col = comp.cols[sl.start + p]
                for i in range(c.dim):
                    for j in range(i, c.dim):
                        if col[i, j] != 0.0:
                            lines.append(f"coef {v.name} {p} {i} {j} {col[i, j]!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
