"""Separable actuation/sensing shapes with exact 1D factor calculus.

Every shape used by the toolkit is a product u(x1) * v(x2) (interior) or a
single factor u(x1) on the Neumann edge (boundary), where each factor is a
finite sum of atoms  poly(x) * {1, sin(w x), cos(w x)}  supported on an
interval.  Products against the eigenfunction factors, squares, and
derivatives stay inside this class, so every modal coefficient, L2 norm and
H1 seminorm the toolkit needs has a closed form.  An independent adaptive
Gauss-Kronrod path is kept alongside for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure

__all__ = [
    "Atom",
    "Factor",
    "ShapeFunction",
    "catalog",
    "paper_initial_condition",
    "factor_from_config",
]

_ONE, _SIN, _COS = "one", "sin", "cos"


@dataclass(frozen=True)
class Atom:
    """poly(x) * trig(w x) with poly coefficients in ascending order."""

    coeffs: tuple
    kind: str = _ONE
    freq: float = 0.0

    def __post_init__(self):
        if self.kind not in (_ONE, _SIN, _COS):
            raise ValueError(f"unknown trig kind {self.kind!r}")
        if self.kind == _ONE and self.freq != 0.0:
            raise ValueError("constant atom cannot carry a frequency")

    def __call__(self, x):
        p = np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))
        if self.kind == _SIN:
            return p * np.sin(self.freq * x)
        if self.kind == _COS:
            return p * np.cos(self.freq * x)
        return p


def _poly_trig_antider_eval(coeffs, kind, a, x):
    """Evaluate an antiderivative of poly(x)*{1,sin(ax),cos(ax)} at x.

    Integration by parts gives the standard recursion; a == 0 degenerates to
    plain polynomial integration (sin -> 0, cos -> 1).
    """
    coeffs = list(coeffs)
    if kind == _ONE or a == 0.0:
        if kind == _SIN:
            return 0.0
        integ = np.polynomial.polynomial.polyint(coeffs)
        return float(np.polynomial.polynomial.polyval(x, integ))
    # recursion on descending powers; work with the full polynomial at once:
    #   I_sin = -poly cos/a + (1/a) int poly' cos
    #   I_cos =  poly sin/a - (1/a) int poly' sin
    sinx, cosx = math.sin(a * x), math.cos(a * x)
    total = 0.0
    poly = np.asarray(coeffs, dtype=float)
    sign = 1.0
    want = kind
    while poly.size and np.any(poly != 0.0):
        pval = float(np.polynomial.polynomial.polyval(x, poly))
        if want == _SIN:
            total += sign * (-pval * cosx / a)
            want, sign = _COS, sign / a
        else:
            total += sign * (pval * sinx / a)
            want, sign = _SIN, -sign / a
        poly = np.polynomial.polynomial.polyder(poly)
    return total


def integrate_atom(atom, lo, hi):
    """Exact integral of an atom over [lo, hi]."""
    return (_poly_trig_antider_eval(atom.coeffs, atom.kind, atom.freq, hi)
            - _poly_trig_antider_eval(atom.coeffs, atom.kind, atom.freq, lo))


def _poly_mul(a, b):
    return tuple(np.polynomial.polynomial.polymul(np.asarray(a), np.asarray(b)))


def _atom_product(a, b):
    """Product of two atoms as a list of atoms (product-to-sum for trig)."""
    coeffs = _poly_mul(a.coeffs, b.coeffs)
    ka, kb = a.kind, b.kind
    wa, wb = a.freq, b.freq
    if ka == _ONE:
        return [Atom(coeffs, kb, wb)]
    if kb == _ONE:
        return [Atom(coeffs, ka, wa)]
    half = tuple(0.5 * c for c in coeffs)
    if ka == _SIN and kb == _SIN:
        # sin a sin b = (cos(a-b) - cos(a+b))/2
        return [_mk(half, _COS, wa - wb), _mk(tuple(-c for c in half), _COS, wa + wb)]
    if ka == _COS and kb == _COS:
        return [_mk(half, _COS, wa - wb), _mk(half, _COS, wa + wb)]
    if ka == _SIN and kb == _COS:
        return [_mk(half, _SIN, wa + wb), _mk(half, _SIN, wa - wb)]
    # cos * sin
    return [_mk(half, _SIN, wa + wb), _mk(tuple(-c for c in half), _SIN, wb - wa)]


def _mk(coeffs, kind, freq):
    """Normalize frequency sign and zero-frequency trig atoms."""
    if kind == _SIN:
        if freq == 0.0:
            return Atom((0.0,), _ONE, 0.0)
        if freq < 0.0:
            return Atom(tuple(-c for c in coeffs), _SIN, -freq)
    if kind == _COS:
        if freq == 0.0:
            return Atom(coeffs, _ONE, 0.0)
        if freq < 0.0:
            return Atom(coeffs, _COS, -freq)
    return Atom(coeffs, kind, freq)


def _atom_derivative(atom):
    der = tuple(np.polynomial.polynomial.polyder(np.asarray(atom.coeffs)))
    if not der:
        der = (0.0,)
    out = [Atom(der, atom.kind, atom.freq)]
    if atom.kind == _SIN:
        out.append(Atom(tuple(atom.freq * c for c in atom.coeffs), _COS, atom.freq))
    elif atom.kind == _COS:
        out.append(Atom(tuple(-atom.freq * c for c in atom.coeffs), _SIN, atom.freq))
    return out


@dataclass(frozen=True)
class Factor:
    """Sum of atoms supported on [lo, hi] (zero outside)."""

    atoms: tuple
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("factor support must have positive length")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        val = sum(a(x) for a in self.atoms)
        return np.where(inside, val, 0.0)

    def integral(self):
        return sum(integrate_atom(a, self.lo, self.hi) for a in self.atoms)

    def mul_trig(self, kind, freq):
        probe = Atom((1.0,), kind, freq)
        out = []
        for a in self.atoms:
            out.extend(_atom_product(a, probe))
        return Factor(tuple(out), self.lo, self.hi)

    def inner_trig(self, kind, freq):
        """Exact integral of factor(x) * trig(freq x) over the support."""
        return self.mul_trig(kind, freq).integral()

    def square_integral(self):
        total = 0.0
        for a in self.atoms:
            for b in self.atoms:
                for prod in _atom_product(a, b):
                    total += integrate_atom(prod, self.lo, self.hi)
        return total

    def derivative(self):
        out = []
        for a in self.atoms:
            out.extend(_atom_derivative(a))
        return Factor(tuple(out), self.lo, self.hi)


@dataclass(frozen=True)
class ShapeFunction:
    """Separable shape: interior u(x1)v(x2) or boundary u(x1) on the edge."""

    name: str
    kind: str                 # "interior" | "boundary"
    fx: Factor
    fy: Factor = None

    def __post_init__(self):
        if self.kind not in ("interior", "boundary"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "interior" and self.fy is None:
            raise ValueError("interior shapes need both factors")
        if self.kind == "boundary" and self.fy is not None:
            raise ValueError("boundary shapes are functions of x1 only")

    def __call__(self, x1, x2=None):
        if self.kind == "boundary":
            return self.fx(x1)
        return self.fx(x1) * self.fy(x2)

    def l2_norm_sq(self):
        if self.kind == "boundary":
            return self.fx.square_integral()
        return self.fx.square_integral() * self.fy.square_integral()

    def h1_seminorm_sq(self):
        """Integral of |grad shape|^2 over the rectangle; interior only.

        Only meaningful for shapes that are genuinely H1 on the whole
        rectangle (no jump at the support box edges); callers are expected
        to use it for the catalog's f3/f4-style shapes.
        """
        if self.kind != "interior":
            raise ValueError("gradient norm is defined for interior shapes")
        dx, dy = self.fx.derivative(), self.fy.derivative()
        return (dx.square_integral() * self.fy.square_integral()
                + self.fx.square_integral() * dy.square_integral())

    def quad_inner(self, gx, gy=None, tol=1e-10):
        """Adaptive-quadrature inner product against callables gx (and gy).

        Independent of the closed-form path; used for cross-checks and for
        shapes that were supplied as raw callables.
        """
        ix, ex = integrate.quad(lambda x: float(self.fx(x)) * gx(x),
                                self.fx.lo, self.fx.hi, epsabs=tol, limit=400)
        if ex > max(tol, 1e-9 * abs(ix)) * 10:
            raise QuadratureFailure("x1 quadrature did not converge", achieved=ex)
        if self.kind == "boundary":
            return ix
        iy, ey = integrate.quad(lambda y: float(self.fy(y)) * gy(y),
                                self.fy.lo, self.fy.hi, epsabs=tol, limit=400)
        if ey > max(tol, 1e-9 * abs(iy)) * 10:
            raise QuadratureFailure("x2 quadrature did not converge", achieved=ey)
        return ix * iy


def _poly_factor(coeffs, lo, hi):
    return Factor((Atom(tuple(float(c) for c in coeffs)),), lo, hi)


def _sin_factor(freq, lo, hi, amplitude=1.0):
    return Factor((Atom((float(amplitude),), _SIN, float(freq)),), lo, hi)


def catalog(domain):
    """The built-in shape catalog f1..f6, g1..g4 on the given rectangle."""
    a1, a2 = domain.a1, domain.a2
    shapes = {
        # 20 x1 (x2 - x2^2) on [0, a1/2] x [0, a2/2]
        "f1": ShapeFunction("f1", "interior",
                            _poly_factor([0.0, 20.0], 0.0, a1 / 2),
                            _poly_factor([0.0, 1.0, -1.0], 0.0, a2 / 2)),
        # x1 (x2 - x2^2) on [a1/2, 3a1/4] x [a2/2, a2]
        "f2": ShapeFunction("f2", "interior",
                            _poly_factor([0.0, 1.0], a1 / 2, 3 * a1 / 4),
                            _poly_factor([0.0, 1.0, -1.0], a2 / 2, a2)),
        # (x1^2 - a1 x1)(x2^3 - a2 x2^2) on the whole rectangle (H1, zero on Gamma_D)
        "f3": ShapeFunction("f3", "interior",
                            _poly_factor([0.0, -a1, 1.0], 0.0, a1),
                            _poly_factor([0.0, 0.0, -a2, 1.0], 0.0, a2)),
        # (x2 - a2) sin(2 pi x1/a1) on the whole rectangle (H1, zero on Gamma_D)
        "f4": ShapeFunction("f4", "interior",
                            _sin_factor(2 * math.pi / a1, 0.0, a1),
                            _poly_factor([-a2, 1.0], 0.0, a2)),
        # sin(2 pi x1/a1) on [0, a1/2] (boundary)
        "f5": ShapeFunction("f5", "boundary",
                            _sin_factor(2 * math.pi / a1, 0.0, a1 / 2)),
        # sin(3 pi x1/a1) on [a1/3, 2a1/3] (boundary)
        "f6": ShapeFunction("f6", "boundary",
                            _sin_factor(3 * math.pi / a1, a1 / 3, 2 * a1 / 3)),
        # indicator boxes
        "g1": ShapeFunction("g1", "interior",
                            _poly_factor([1.0], 0.0, a1),
                            _poly_factor([1.0], 0.0, a2 / 2)),
        "g2": ShapeFunction("g2", "interior",
                            _poly_factor([1.0], a1 / 2, a1),
                            _poly_factor([1.0], 0.0, a2)),
        "g3": ShapeFunction("g3", "boundary",
                            _poly_factor([0.2], 0.0, a1 / 4)),
        "g4": ShapeFunction("g4", "boundary",
                            _poly_factor([0.2], a1 / 4, a1)),
    }
    return shapes


def paper_initial_condition(domain):
    """x1 (a1 - x1) cos(pi x2 / (2 a2)): the simulation initial state."""
    a1, a2 = domain.a1, domain.a2
    fy = Factor((Atom((1.0,), _COS, math.pi / (2 * a2)),), 0.0, a2)
    return ShapeFunction("z0", "interior",
                         _poly_factor([0.0, a1, -1.0], 0.0, a1), fy)


def factor_from_config(spec):
    """Build a Factor from a config mapping.

    Expected keys: support: [lo, hi]; poly: [c0, c1, ...] (optional,
    default [1]); trig: {kind: sin|cos, freq: w} (optional).
    """
    known = {"support", "poly", "trig"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown factor keys: {sorted(unknown)}")
    lo, hi = (float(v) for v in spec["support"])
    coeffs = tuple(float(c) for c in spec.get("poly", [1.0]))
    trig = spec.get("trig")
    if trig is None:
        return _poly_factor(coeffs, lo, hi)
    kind = trig["kind"]
    if kind not in (_SIN, _COS):
        raise ValueError(f"trig kind must be sin or cos, got {kind!r}")
    return Factor((Atom(coeffs, kind, float(trig["freq"])),), lo, hi)
