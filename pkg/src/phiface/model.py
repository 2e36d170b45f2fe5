"""Material model: coefficient fields, two-sided pairs, and the composed field.

The state space carries two coefficient matrices, one per side of the
interface.  Each diagonal entry is a C1 piecewise polynomial so that the
derivative terms entering the growth-bound certificate are exact.  The
composed field selects a side pointwise through indicator (color) values
relative to the interface position.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CoercivityError, DomainError, ProfileError
from .piecewise import PiecewisePoly

SIDE_MINUS = "minus"
SIDE_PLUS = "plus"

# Channel-coupling matrix of the two conservation laws.
P1 = np.array([[0.0, -1.0], [-1.0, 0.0]])

MAX_PROFILE_DEGREE = 5
C1_JUNCTION_TOL = 1e-10
POSITIVITY_SAMPLES = 4096


class CoefficientProfile:
    """A C1, piecewise-polynomial scalar coefficient on [a, b].

    Diagonal entries must be strictly positive (coercivity prerequisite);
    off-diagonal entries may take either sign (``positive=False``).
    """

    __slots__ = ("poly", "positive")

    def __init__(self, poly: PiecewisePoly, positive: bool = True):
        if poly.max_degree > MAX_PROFILE_DEGREE:
            raise ProfileError(
                f"profile degree {poly.max_degree} exceeds {MAX_PROFILE_DEGREE}"
            )
        scale = max(1.0, max(np.max(np.abs(c)) for c in poly.coeffs))
        vgap, dgap = poly.junction_gaps()
        if vgap > C1_JUNCTION_TOL * scale or dgap > C1_JUNCTION_TOL * scale:
            raise ProfileError(
                f"profile is not C1: junction gaps value={vgap:.3e} "
                f"derivative={dgap:.3e} exceed {C1_JUNCTION_TOL:.0e} * scale"
            )
        if positive:
            zmin, _ = poly.extrema()
            if not zmin > 0.0:
                raise CoercivityError(
                    f"profile minimum {zmin:.6e} is not strictly positive"
                )
        self.poly = poly
        self.positive = positive

    @classmethod
    def constant(cls, value, a, b, positive=True):
        return cls(PiecewisePoly.constant(value, a, b), positive=positive)

    @classmethod
    def from_pieces(cls, pieces, positive=True):
        return cls(PiecewisePoly.from_pieces(pieces), positive=positive)

    @property
    def a(self):
        return self.poly.a

    @property
    def b(self):
        return self.poly.b

    def __call__(self, z):
        return self.poly(z)

    def deriv(self, z):
        return self.poly.derivative()(z)

    def min_value(self):
        lo, _ = self.poly.extrema()
        return lo

    def max_value(self):
        _, hi = self.poly.extrema()
        return hi


@dataclass(frozen=True)
class DomainSpec:
    """Spatial interval [a, b] with a < 0 < b and a reference interface l0."""

    a: float
    b: float
    l0: float = 0.0

    def __post_init__(self):
        if not (self.a < 0.0 < self.b):
            raise DomainError(f"need a < 0 < b, got a={self.a}, b={self.b}")
        if not (self.a < self.l0 < self.b):
            raise DomainError(f"reference interface l0={self.l0} outside ({self.a}, {self.b})")


@dataclass(frozen=True, eq=False)
class MaterialPair:
    """The two 2x2 symmetric coefficient fields plus coercivity bounds.

    ``m`` and ``M`` satisfy m*I <= Q(z) <= M*I for both sides at every
    sampled z; use :func:`MaterialPair.build` so they are filled in.
    """

    qminus11: CoefficientProfile
    qminus22: CoefficientProfile
    qplus11: CoefficientProfile
    qplus22: CoefficientProfile
    qminus12: CoefficientProfile | None = None
    qplus12: CoefficientProfile | None = None
    m: float = float("nan")
    M: float = float("nan")

    def __post_init__(self):
        profiles = self.profiles()
        a, b = profiles[0].a, profiles[0].b
        for p in profiles[1:]:
            if abs(p.a - a) > 1e-12 or abs(p.b - b) > 1e-12:
                raise ProfileError("all profiles must share the same interval")

    @classmethod
    def build(cls, qminus11, qminus22, qplus11, qplus22,
              qminus12=None, qplus12=None, nsamples=POSITIVITY_SAMPLES):
        mat = cls(qminus11, qminus22, qplus11, qplus22, qminus12, qplus12)
        m, M = coercivity_bounds(mat, nsamples)
        return replace(mat, m=m, M=M)

    @classmethod
    def isotropic(cls, qminus, qplus, nsamples=POSITIVITY_SAMPLES):
        """Both channels share one profile per side."""
        return cls.build(qminus, qminus, qplus, qplus, nsamples=nsamples)

    def profiles(self):
        out = [self.qminus11, self.qminus22, self.qplus11, self.qplus22]
        if self.qminus12 is not None:
            out.append(self.qminus12)
        if self.qplus12 is not None:
            out.append(self.qplus12)
        return out

    @property
    def a(self):
        return self.qminus11.a

    @property
    def b(self):
        return self.qminus11.b

    @property
    def has_offdiagonal(self):
        return self.qminus12 is not None or self.qplus12 is not None

    def entry_profiles(self, side):
        if side == SIDE_MINUS:
            return self.qminus11, self.qminus22, self.qminus12
        if side == SIDE_PLUS:
            return self.qplus11, self.qplus22, self.qplus12
        raise ValueError(f"unknown side {side!r}")

    def matrix(self, side, z):
        return eval_material(self, side, z)

    def matrix_deriv(self, side, z):
        """d/dz of the side matrix at z (exact piecewise derivative)."""
        q11, q22, q12 = self.entry_profiles(side)
        off = 0.0 if q12 is None else q12.deriv(z)
        return np.array([[q11.deriv(z), off], [off, q22.deriv(z)]])


def eval_material(mat: MaterialPair, side: str, z: float) -> np.ndarray:
    """The 2x2 symmetric coefficient matrix of one side at z."""
    q11, q22, q12 = mat.entry_profiles(side)
    if not (mat.a - 1e-12 <= z <= mat.b + 1e-12):
        raise DomainError(f"z={z} outside [{mat.a}, {mat.b}]")
    off = 0.0 if q12 is None else q12(z)
    return np.array([[q11(z), off], [off, q22(z)]])


def color(l: float, z: float) -> tuple[int, int]:
    """Indicator pair (c_minus, c_plus) of the subdomains split at l.

    The minus indicator is 1 on [a, l) and the plus indicator on (l, b];
    both vanish at z = l, where one-sided traces take over.
    """
    if z < l:
        return 1, 0
    if z > l:
        return 0, 1
    return 0, 0


def eval_Q_l(mat: MaterialPair, l: float, z: float):
    """Composed coefficient matrix at z for interface position l.

    Away from the interface this selects exactly one side.  At z == l the
    one-sided pair ``(Q_minus(l), Q_plus(l))`` is returned; no averaging
    convention is invented.
    """
    cm, cp = color(l, z)
    if cm:
        return eval_material(mat, SIDE_MINUS, z)
    if cp:
        return eval_material(mat, SIDE_PLUS, z)
    return eval_material(mat, SIDE_MINUS, z), eval_material(mat, SIDE_PLUS, z)


def _eig_bounds_at(mat, side, z):
    q = eval_material(mat, side, z)
    ev = np.linalg.eigvalsh(q)
    return ev[0], ev[-1]


def coercivity_bounds(mat: MaterialPair, nsamples: int = POSITIVITY_SAMPLES):
    """Smallest and largest eigenvalue of both side matrices over [a, b].

    Diagonal pairs are handled exactly through piecewise-polynomial extrema;
    with off-diagonal entries present, a sampling sweep with local refinement
    around the detected extremes is used instead.
    """
    if nsamples < 2:
        raise ValueError("nsamples must be at least 2")
    if not mat.has_offdiagonal:
        mins, maxs = [], []
        for p in mat.profiles():
            lo, hi = p.poly.extrema()
            mins.append(lo)
            maxs.append(hi)
        m, M = min(mins), max(maxs)
    else:
        zs = np.linspace(mat.a, mat.b, nsamples)
        h = (mat.b - mat.a) / (nsamples - 1)
        m, M = np.inf, -np.inf
        for side in (SIDE_MINUS, SIDE_PLUS):
            zmin = zmax = mat.a
            side_m, side_M = np.inf, -np.inf
            for z in zs:
                lo, hi = _eig_bounds_at(mat, side, z)
                if lo < side_m:
                    side_m, zmin = lo, z
                if hi > side_M:
                    side_M, zmax = hi, z
            for z0 in (zmin, zmax):
                local = np.linspace(max(mat.a, z0 - h), min(mat.b, z0 + h), 64)
                for z in local:
                    lo, hi = _eig_bounds_at(mat, side, z)
                    side_m = min(side_m, lo)
                    side_M = max(side_M, hi)
            m = min(m, side_m)
            M = max(M, side_M)
    if not m > 0.0:
        raise CoercivityError(
            f"material is not coercive: smallest eigenvalue {m:.6e} <= 0"
        )
    return float(m), float(M)


@dataclass(frozen=True, eq=False)
class InterfacePath:
    """C1 piecewise-cubic interface trajectory l(t) on [0, tau].

    The range must stay a positive margin away from the spatial boundary.
    """

    tau: float
    knots_t: np.ndarray
    knots_l: np.ndarray
    spline: CubicSpline = field(repr=False)
    margin: float

    @classmethod
    def from_knots(cls, dom: DomainSpec, t, l, margin=None):
        t = np.asarray(t, dtype=float)
        l = np.asarray(l, dtype=float)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0:
            raise DomainError("path knots must start at t=0 and contain >= 2 points")
        if not np.all(np.diff(t) > 0):
            raise DomainError("path knot times must be strictly increasing")
        if l.shape != t.shape:
            raise DomainError("path needs one position per knot time")
        tau = float(t[-1])
        if margin is None:
            margin = 0.05 * (dom.b - dom.a)
        spline = CubicSpline(t, l, bc_type="natural")
        path = cls(tau=tau, knots_t=t, knots_l=l, spline=spline, margin=float(margin))
        lmin, lmax = path._range()
        if not (dom.a + margin <= lmin and lmax <= dom.b - margin):
            raise DomainError(
                f"path range [{lmin:.6g}, {lmax:.6g}] leaves "
                f"({dom.a + margin:.6g}, {dom.b - margin:.6g})"
            )
        return path

    @classmethod
    def constant(cls, dom: DomainSpec, l0, tau):
        return cls.from_knots(dom, [0.0, tau], [l0, l0])

    def _range(self):
        """Exact range over [0, tau] via per-piece cubic extrema."""
        ts = list(self.spline.x)
        dspl = self.spline.derivative()
        for i in range(len(self.spline.x) - 1):
            t0, t1 = self.spline.x[i], self.spline.x[i + 1]
            roots = np.roots(dspl.c[:, i])
            for r in roots:
                if abs(r.imag) < 1e-12 and 0.0 <= r.real <= t1 - t0:
                    ts.append(t0 + r.real)
        vals = self.spline(np.asarray(ts))
        return float(vals.min()), float(vals.max())

    def l(self, t):
        t = np.clip(t, 0.0, self.tau)
        return float(self.spline(t))

    def lprime(self, t):
        t = np.clip(t, 0.0, self.tau)
        return float(self.spline(t, 1))

    @property
    def is_constant(self):
        return bool(np.all(self.knots_l == self.knots_l[0]))
