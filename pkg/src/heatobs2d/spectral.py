"""Spectrum of the negative Laplacian on a rectangle with mixed boundary.

The rectangle (0, a1) x (0, a2) carries homogeneous Dirichlet conditions on
the left, right and top edges and a homogeneous Neumann condition on the
bottom edge x2 = 0.  Eigenpairs are available in closed form,

    lambda_{m,k} = pi^2 [ m^2/a1^2 + (k - 1/2)^2/a2^2 ],
    phi_{m,k}(x) = 2/sqrt(a1 a2) * sin(m pi x1/a1) * cos((k-1/2) pi x2/a2),

for positive integers m, k.  `rectangle_spectrum` enumerates them in
non-decreasing order with a provably exhaustive search box.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import InsufficientBasis

__all__ = [
    "RectangleDomain",
    "Mode",
    "SpectralBasis",
    "MultiplicityPartition",
    "rectangle_spectrum",
    "basis_from_eigenvalues",
    "count_unstable_modes",
    "multiplicity_partition",
    "asymptotic_slope",
]


@dataclass(frozen=True)
class RectangleDomain:
    """Rectangle (0, a1) x (0, a2) with the fixed Dirichlet/Neumann split."""

    a1: float
    a2: float

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError("domain side lengths must be positive")

    @property
    def area(self):
        return self.a1 * self.a2

    @property
    def normalization(self):
        """L2-normalization constant of every eigenfunction."""
        return 2.0 / math.sqrt(self.area)

    def eigenvalue(self, m, k):
        return math.pi ** 2 * (m * m / self.a1 ** 2 + (k - 0.5) ** 2 / self.a2 ** 2)


@dataclass(frozen=True)
class Mode:
    n: int          # 1-based position in the ordered spectrum
    m: int
    k: int
    lam: float
    normalization: float


class SpectralBasis:
    """Ordered rectangle eigenpairs, or a user-supplied eigenvalue table.

    For rectangle bases every mode carries its (m, k) pair; the seam
    constructor `basis_from_eigenvalues` produces a basis with eigenvalues
    only, which is sufficient for `count_unstable_modes` and
    `multiplicity_partition`.
    """

    def __init__(self, domain, modes):
        self.domain = domain
        self.modes = tuple(modes)
        self.lambdas = np.array([mo.lam for mo in self.modes])

    @property
    def count(self):
        return len(self.modes)

    def mode(self, n):
        """1-based access to the n-th mode."""
        if not 1 <= n <= self.count:
            raise ValueError(f"mode index {n} outside 1..{self.count}")
        return self.modes[n - 1]

    def __repr__(self):
        return f"SpectralBasis(count={self.count}, domain={self.domain!r})"


@dataclass(frozen=True)
class MultiplicityPartition:
    """Cluster sizes n_1..n_p of the leading eigenvalues and d = max n_j."""

    sizes: tuple
    d: int

    @property
    def p(self):
        return len(self.sizes)

    def cluster_slices(self):
        out, start = [], 0
        for s in self.sizes:
            out.append(slice(start, start + s))
            start += s
        return out


def _enumerate_box(domain, box):
    pairs = []
    for m in range(1, box + 1):
        for k in range(1, box + 1):
            pairs.append((domain.eigenvalue(m, k), m, k))
    pairs.sort()
    return pairs


def rectangle_spectrum(domain, count):
    """Return the `count` smallest eigenpairs, sorted with (m, k) tie-break.

    The (m, k) search box starts at ceil(sqrt(count)*max(a1,a2)*2)+8 and is
    doubled until the smallest candidate outside the box strictly exceeds
    the largest retained eigenvalue, which makes the enumeration exhaustive
    (eigenvalues increase in both m and k).
    """
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ValueError("count must be a positive integer")
    box = math.ceil(math.sqrt(count) * max(domain.a1, domain.a2) * 2) + 8
    while True:
        pairs = _enumerate_box(domain, box)
        retained = pairs[:count]
        lam_max = retained[-1][0]
        outside = min(domain.eigenvalue(box + 1, 1), domain.eigenvalue(1, box + 1))
        if len(pairs) >= count and outside > lam_max:
            break
        box *= 2
    norm = domain.normalization
    modes = [Mode(i + 1, m, k, lam, norm) for i, (lam, m, k) in enumerate(retained)]
    return SpectralBasis(domain, modes)


def basis_from_eigenvalues(lambdas):
    """Seam for non-rectangle domains: wrap a non-decreasing eigenvalue table."""
    lams = np.asarray(lambdas, dtype=float)
    if lams.ndim != 1 or lams.size == 0:
        raise ValueError("expected a non-empty 1-d eigenvalue table")
    if np.any(np.diff(lams) < 0):
        raise ValueError("eigenvalues must be non-decreasing")
    modes = [Mode(i + 1, 0, 0, float(l), float("nan")) for i, l in enumerate(lams)]
    return SpectralBasis(None, modes)


def count_unstable_modes(basis, q, delta):
    """Smallest N0 with -lambda_n + q + delta < 0 for all n > N0."""
    lams = basis.lambdas
    if -lams[-1] + q + delta >= 0:
        raise InsufficientBasis(
            f"basis of {basis.count} modes never reaches -lambda+q+delta < 0 "
            f"(q={q}, delta={delta})"
        )
    return int(np.searchsorted(lams, q + delta, side="right"))


def multiplicity_partition(basis, N0, tol=1e-9):
    """Group the first N0 eigenvalues into maximal clusters of equal values.

    Equality is relative: lambda joins the current cluster when it is within
    tol * max(1, |cluster head|) of the head.  The default matches exact
    symbolic ties; a looser user tolerance merges near-degenerate pairs.
    """
    if N0 < 1:
        raise ValueError("N0 must be positive")
    if N0 > basis.count:
        raise ValueError(f"N0={N0} exceeds basis.count={basis.count}")
    lams = basis.lambdas[:N0]
    sizes = []
    head = lams[0]
    size = 1
    for lam in lams[1:]:
        if abs(lam - head) <= tol * max(1.0, abs(head)):
            size += 1
        else:
            sizes.append(size)
            head = lam
            size = 1
    sizes.append(size)
    return MultiplicityPartition(tuple(sizes), max(sizes))


def asymptotic_slope(basis):
    """Weyl-law diagnostic lambda_N * |Omega| / (4 pi N) for N = 1..count."""
    if basis.count < 10:
        raise ValueError("need at least 10 modes for the diagnostic")
    if basis.domain is None:
        raise ValueError("diagnostic requires a rectangle basis with an area")
    N = np.arange(1, basis.count + 1)
    return basis.lambdas * basis.domain.area / (4.0 * math.pi * N)
