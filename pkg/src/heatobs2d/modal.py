"""Modal projections, reduced matrices and tail bounds.

Projects actuation/sensing shapes onto the rectangle eigenbasis, assembles
the finite matrices (A0, A1, B0, B1, C0, C1) of the reduced design model,
and computes the tail quantities that enter the stability certificates:

    b_tail      = ||b||^2_N      (interior actuation)
    c_tail      = ||c||^2_N      (interior sensing)
    grad_b_tail = ||grad b||^2_N (H1 interior actuation, spectral identity)
    varrho_N    = boundary-sensing tail bound, capped by a2 sum_j ||c_j||^2
    rho_N       = boundary-actuation tail bound, same cap structure
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import InconsistentQuadrature
from .spectral import multiplicity_partition

__all__ = [
    "VARIANTS",
    "TailBounds",
    "ModalSystem",
    "RankReport",
    "project_interior",
    "project_boundary",
    "coefficient_matrix",
    "tail_interior",
    "tail_boundary",
    "assemble_modal_system",
    "check_rank",
]

# actuation kind first, sensing kind second
VARIANTS = {
    "interior-interior": ("interior", "interior"),
    "interior-boundary": ("interior", "boundary"),
    "boundary-interior": ("boundary", "interior"),
}

_TAIL_TOL = 1e-8


def project_interior(shape, basis, n, method="closed-form", tol=1e-10):
    """<shape, phi_n> over the rectangle, exact by separable factor calculus."""
    if shape.kind != "interior":
        raise ValueError("project_interior needs an interior shape")
    mode = basis.mode(n)
    dom = basis.domain
    wx = mode.m * math.pi / dom.a1
    wy = (mode.k - 0.5) * math.pi / dom.a2
    if method == "closed-form":
        return mode.normalization * shape.fx.inner_trig("sin", wx) * shape.fy.inner_trig("cos", wy)
    if method == "quadrature":
        return mode.normalization * shape.quad_inner(
            lambda x: math.sin(wx * x), lambda y: math.cos(wy * y), tol=tol)
    raise ValueError(f"unknown method {method!r}")


def project_boundary(shape, basis, n, method="closed-form", tol=1e-10):
    """Integral of shape(x1) * phi_n(x1, 0) over the Neumann edge."""
    if shape.kind != "boundary":
        raise ValueError("project_boundary needs a boundary shape")
    mode = basis.mode(n)
    wx = mode.m * math.pi / basis.domain.a1
    if method == "closed-form":
        return mode.normalization * shape.fx.inner_trig("sin", wx)
    if method == "quadrature":
        return mode.normalization * shape.quad_inner(lambda x: math.sin(wx * x), tol=tol)
    raise ValueError(f"unknown method {method!r}")


def coefficient_matrix(shapes, basis, N, method="closed-form"):
    """Stack modal coefficients of the shape tuple into an (N, d) array."""
    cols = []
    for shape in shapes:
        proj = project_interior if shape.kind == "interior" else project_boundary
        cols.append([proj(shape, basis, n, method=method) for n in range(1, N + 1)])
    return np.array(cols).T


def tail_interior(shapes, basis, N, gradient=False):
    """||f||^2_N (or ||grad f||^2_N) summed over the shape components.

    The gradient version uses the spectral identity ||grad f||^2 =
    sum_n lambda_n <f, phi_n>^2, valid for H1 shapes vanishing on the
    Dirichlet part of the boundary, so the tail is the exact H1 seminorm
    minus the first N weighted coefficients.
    """
    coefs = coefficient_matrix(shapes, basis, N)
    total = 0.0
    for j, shape in enumerate(shapes):
        if shape.kind != "interior":
            raise ValueError("tail_interior needs interior shapes")
        if gradient:
            full = shape.h1_seminorm_sq()
            head = float(np.sum(basis.lambdas[:N] * coefs[:, j] ** 2))
        else:
            full = shape.l2_norm_sq()
            head = float(np.sum(coefs[:, j] ** 2))
        total += full - head
    if total < -_TAIL_TOL * max(1.0, abs(total)):
        raise InconsistentQuadrature(f"negative tail {total} at N={N}")
    return max(total, 0.0)


def tail_boundary(shapes, basis, N, which="varrho"):
    """Boundary tail bound: returns (tail_N, cap).

    cap = a2 * sum_j ||shape_j||^2_{L2(0,a1)} and
    tail_N = cap - sum_{n<=N} |coef_n|^2 / lambda_n.
    """
    if which not in ("varrho", "rho"):
        raise ValueError("which must be 'varrho' or 'rho'")
    for shape in shapes:
        if shape.kind != "boundary":
            raise ValueError("tail_boundary needs boundary shapes")
    cap = basis.domain.a2 * sum(shape.l2_norm_sq() for shape in shapes)
    coefs = coefficient_matrix(shapes, basis, N)
    head = float(np.sum(np.sum(coefs ** 2, axis=1) / basis.lambdas[:N]))
    tail = cap - head
    if tail < -_TAIL_TOL * max(1.0, cap):
        raise InconsistentQuadrature(f"negative boundary tail {tail} at N={N}")
    return max(tail, 0.0), cap


@dataclass(frozen=True)
class TailBounds:
    b_tail: float = None
    c_tail: float = None
    grad_b_tail: float = None
    varrho_N: float = None
    varrho_cap: float = None
    rho_N: float = None
    rho_cap: float = None
    lambda_Nplus1: float = None
    lambda_N: float = None


@dataclass(frozen=True)
class ModalSystem:
    basis: object
    variant: str
    q: float
    delta: float
    N0: int
    N: int
    d: int
    A0: np.ndarray
    A1: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    tails: TailBounds
    partition: object
    b_shapes: tuple = None
    c_shapes: tuple = None


def assemble_modal_system(basis, q, delta, N, b_shapes, c_shapes, variant,
                          N0=None, tie_tol=1e-9):
    """Build the reduced model and every tail quantity the variant needs."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
    bkind, ckind = VARIANTS[variant]
    b_shapes, c_shapes = tuple(b_shapes), tuple(c_shapes)
    if any(s.kind != bkind for s in b_shapes):
        raise ValueError(f"variant {variant} expects {bkind} actuation shapes")
    if any(s.kind != ckind for s in c_shapes):
        raise ValueError(f"variant {variant} expects {ckind} sensing shapes")
    if len(b_shapes) != len(c_shapes):
        raise ValueError("need as many sensing as actuation shapes (d columns)")
    d = len(b_shapes)
    if N0 is None:
        from .spectral import count_unstable_modes
        N0 = count_unstable_modes(basis, q, delta)
        if N0 == 0:
            N0 = 1  # keep a nontrivial design block even for stable plants
    if N < N0:
        raise ValueError(f"N={N} must be at least N0={N0}")
    if basis.count < N + 1:
        raise ValueError(f"basis too short: need {N + 1} modes, have {basis.count}")
    lams = basis.lambdas
    if np.any(-lams[N0:basis.count] + q + delta >= 0):
        raise ValueError("modes beyond N0 are not all delta-stable; increase N0")

    bcoef = coefficient_matrix(b_shapes, basis, N)
    ccoef = coefficient_matrix(c_shapes, basis, N)
    A0 = np.diag(q - lams[:N0])
    A1 = np.diag(q - lams[N0:N])
    B0, B1 = bcoef[:N0], bcoef[N0:]
    C0, C1 = ccoef[:N0].T, ccoef[N0:].T

    kw = dict(lambda_Nplus1=float(lams[N]), lambda_N=float(lams[N - 1]))
    if variant == "interior-interior":
        kw["b_tail"] = tail_interior(b_shapes, basis, N)
        kw["c_tail"] = tail_interior(c_shapes, basis, N)
    elif variant == "interior-boundary":
        kw["b_tail"] = tail_interior(b_shapes, basis, N)
        kw["grad_b_tail"] = tail_interior(b_shapes, basis, N, gradient=True)
        kw["varrho_N"], kw["varrho_cap"] = tail_boundary(c_shapes, basis, N, "varrho")
    else:  # boundary-interior
        kw["rho_N"], kw["rho_cap"] = tail_boundary(b_shapes, basis, N, "rho")
        kw["c_tail"] = tail_interior(c_shapes, basis, N)

    part = multiplicity_partition(basis, N0, tol=tie_tol)
    return ModalSystem(basis, variant, q, delta, N0, N, d, A0, A1, B0, B1,
                       C0, C1, TailBounds(**kw), part, b_shapes, c_shapes)


@dataclass(frozen=True)
class RankReport:
    b_ranks: tuple
    c_ranks: tuple
    sizes: tuple
    b_ok: bool
    c_ok: bool
    pbh_controllable: bool
    pbh_observable: bool

    @property
    def ok(self):
        return self.b_ok and self.c_ok


def _pbh_rank_ok(A, M, stack_rows):
    """Hautus test: [A - lam I, M] (or its transpose layout) full rank at each eigenvalue."""
    n = A.shape[0]
    ok = True
    for lam in np.unique(np.diag(A)):
        if stack_rows:
            T = np.hstack([A - lam * np.eye(n), M])
        else:
            T = np.vstack([A - lam * np.eye(n), M])
        ok = ok and np.linalg.matrix_rank(T, tol=1e-9 * max(1.0, np.linalg.norm(T))) == n
    return ok


def check_rank(system, sv_tol=1e-9):
    """Per-cluster rank test of Assumption-1 type plus a PBH cross-check."""
    slices = system.partition.cluster_slices()
    b_ranks, c_ranks = [], []
    for sl in slices:
        Bj = system.B0[sl, :]
        Cj = system.C0[:, sl]
        def rank(M):
            s = np.linalg.svd(M, compute_uv=False)
            if s.size == 0 or s[0] == 0.0:
                return 0
            return int(np.sum(s > sv_tol * s[0]))
        b_ranks.append(rank(Bj))
        c_ranks.append(rank(Cj))
    sizes = system.partition.sizes
    b_ok = all(r == s for r, s in zip(b_ranks, sizes))
    c_ok = all(r == s for r, s in zip(c_ranks, sizes))
    ctrb = _pbh_rank_ok(system.A0, system.B0, stack_rows=True)
    obsv = _pbh_rank_ok(system.A0, system.C0, stack_rows=False)
    return RankReport(tuple(b_ranks), tuple(c_ranks), sizes, b_ok, c_ok, ctrb, obsv)
