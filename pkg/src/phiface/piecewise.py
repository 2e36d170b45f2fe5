"""Piecewise-polynomial scalar fields with exact evaluation and calculus.

Each piece stores its coefficients in the local variable t = z - z0 (z0 the
piece's left endpoint), so narrow pieces far from the origin evaluate
without cancellation.  User-facing constructors accept global-z
coefficients and shift them once.  Keeping the representation polynomial
means derivatives, extrema and integrals of products are exact up to
rounding, which the certificate and quadrature code rely on.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.polynomial import Polynomial

from .errors import DomainError, ProfileError

# Composite Gauss-Legendre order used for integrals of piecewise data.
# 12 points integrate polynomials up to degree 23 exactly; products of
# degree <= 5 factors stay well inside that.
_GL_POINTS = 12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_POINTS)


class PiecewisePoly:
    """Scalar piecewise polynomial on a closed interval.

    Parameters
    ----------
    breaks:
        Strictly increasing breakpoints, length ``npieces + 1``.
    coeffs:
        One coefficient array per piece, increasing powers of the local
        variable ``z - z0`` with ``z0`` the piece's left endpoint.
    """

    __slots__ = ("breaks", "coeffs")

    def __init__(self, breaks, coeffs):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.ndim != 1 or breaks.size < 2:
            raise ProfileError("need at least two breakpoints")
        if not np.all(np.isfinite(breaks)):
            raise ProfileError("breakpoints must be finite")
        if not np.all(np.diff(breaks) > 0):
            raise ProfileError("breakpoints must be strictly increasing")
        if len(coeffs) != breaks.size - 1:
            raise ProfileError(
                f"got {len(coeffs)} coefficient sets for {breaks.size - 1} pieces"
            )
        cleaned = []
        for c in coeffs:
            c = np.atleast_1d(np.asarray(c, dtype=float))
            if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
                raise ProfileError("piece coefficients must be finite 1-d arrays")
            cleaned.append(c.copy())
        self.breaks = breaks
        self.coeffs = tuple(cleaned)

    # -- construction -------------------------------------------------

    @classmethod
    def constant(cls, value, a, b):
        return cls([a, b], [np.array([float(value)])])

    @classmethod
    def from_pieces(cls, pieces, local=False):
        """Build from ``[(z0, z1, coeffs), ...]``; pieces must tile an interval.

        Coefficients are in global powers of z unless ``local`` is set.
        """
        if not pieces:
            raise ProfileError("empty piece list")
        pieces = sorted(pieces, key=lambda p: p[0])
        breaks = [pieces[0][0]]
        coeffs = []
        for z0, z1, c in pieces:
            if not np.isclose(z0, breaks[-1], rtol=0.0, atol=1e-12):
                raise ProfileError(
                    f"pieces do not tile the interval: gap or overlap at z={z0!r}"
                )
            if not z1 > z0:
                raise ProfileError(f"piece [{z0}, {z1}] has nonpositive length")
            breaks.append(z1)
            coeffs.append(c if local else global_to_local(c, z0))
        return cls(breaks, coeffs)

    # -- basic queries -------------------------------------------------

    @property
    def a(self):
        return float(self.breaks[0])

    @property
    def b(self):
        return float(self.breaks[-1])

    @property
    def npieces(self):
        return len(self.coeffs)

    @property
    def max_degree(self):
        return max(c.size - 1 for c in self.coeffs)

    def piece_index(self, z):
        """Indices of the pieces containing z (right-continuous at breaks)."""
        z = np.asarray(z, dtype=float)
        idx = np.searchsorted(self.breaks, z, side="right") - 1
        return np.clip(idx, 0, self.npieces - 1)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        zf = np.atleast_1d(z)
        if zf.size and (zf.min() < self.a - 1e-12 or zf.max() > self.b + 1e-12):
            raise DomainError(f"evaluation outside [{self.a}, {self.b}]")
        out = np.empty_like(zf)
        idx = self.piece_index(zf)
        for i in np.unique(idx):
            sel = idx == i
            out[sel] = npoly.polyval(zf[sel] - self.breaks[i], self.coeffs[i])
        return float(out[0]) if scalar else out

    def derivative(self):
        return PiecewisePoly(
            self.breaks,
            [npoly.polyder(c) if c.size > 1 else np.array([0.0]) for c in self.coeffs],
        )

    # -- algebra -------------------------------------------------------

    def affine(self, scale, shift=0.0):
        """Return scale * p + shift as a new piecewise polynomial."""
        out = []
        for c in self.coeffs:
            c = c * float(scale)
            c[0] += float(shift)
            out.append(c)
        return PiecewisePoly(self.breaks, out)

    # -- analysis ------------------------------------------------------

    def junction_gaps(self):
        """Max |value jump| and |derivative jump| over interior breakpoints."""
        dpoly = self.derivative()
        vgap = 0.0
        dgap = 0.0
        for i in range(self.npieces - 1):
            z = self.breaks[i + 1]
            left_v = npoly.polyval(z - self.breaks[i], self.coeffs[i])
            right_v = npoly.polyval(0.0, self.coeffs[i + 1])
            vgap = max(vgap, abs(left_v - right_v))
            left_d = npoly.polyval(z - self.breaks[i], dpoly.coeffs[i])
            right_d = npoly.polyval(0.0, dpoly.coeffs[i + 1])
            dgap = max(dgap, abs(left_d - right_d))
        return vgap, dgap

    def extrema(self, lo=None, hi=None):
        """Exact (min, max) over [lo, hi] via critical points of each piece.

        Root finding runs in unit piece coordinates for stability on very
        narrow pieces.
        """
        lo = self.a if lo is None else float(lo)
        hi = self.b if hi is None else float(hi)
        if not (self.a - 1e-12 <= lo < hi <= self.b + 1e-12):
            raise DomainError(f"range [{lo}, {hi}] outside [{self.a}, {self.b}]")
        candidates = [lo, hi]
        for i in range(self.npieces):
            z0 = float(self.breaks[i])
            z1 = float(self.breaks[i + 1])
            s0, s1 = max(z0, lo), min(z1, hi)
            if s1 <= s0:
                continue
            candidates.extend((s0, s1))
            c = self.coeffs[i]
            if c.size > 2:
                width = z1 - z0
                cu = c * width ** np.arange(c.size)  # unit coordinates u = t/width
                roots = npoly.polyroots(npoly.polyder(cu))
                for r in roots:
                    if abs(r.imag) < 1e-10 and 0.0 <= r.real <= 1.0:
                        zr = z0 + width * float(r.real)
                        if s0 <= zr <= s1:
                            candidates.append(zr)
        vals = self(np.array(candidates))
        return float(vals.min()), float(vals.max())

    def sup_abs(self, lo=None, hi=None):
        vmin, vmax = self.extrema(lo, hi)
        return max(abs(vmin), abs(vmax))

    def quad_nodes(self, lo=None, hi=None, extra_breaks=(), min_subdiv=1):
        """Composite Gauss-Legendre nodes/weights aligned with all breakpoints."""
        lo = self.a if lo is None else float(lo)
        hi = self.b if hi is None else float(hi)
        pts = merge_breakpoints([self], lo, hi, extra=extra_breaks)
        return gauss_on_partition(pts, min_subdiv=min_subdiv)

    def integrate(self, lo=None, hi=None):
        nodes, weights = self.quad_nodes(lo, hi)
        return float(weights @ self(nodes))

    def l2_norm(self, lo=None, hi=None):
        nodes, weights = self.quad_nodes(lo, hi)
        v = self(nodes)
        return float(np.sqrt(weights @ (v * v)))


def global_to_local(coeffs, z0):
    """Re-express global-z polynomial coefficients in powers of (z - z0)."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.size == 1:
        return c.copy()
    shifted = Polynomial(c)(Polynomial([float(z0), 1.0]))
    return shifted.coef


def merge_breakpoints(polys, lo, hi, extra=()):
    """Sorted unique breakpoints of several fields restricted to [lo, hi]."""
    pts = [lo, hi]
    for p in polys:
        pts.extend(float(z) for z in p.breaks if lo < z < hi)
    pts.extend(float(z) for z in extra if lo < z < hi)
    pts = np.unique(np.asarray(pts, dtype=float))
    if pts.size < 2:
        raise DomainError("empty integration interval")
    return pts


def gauss_on_partition(partition, min_subdiv=1):
    """Gauss-Legendre nodes and weights on every cell of a partition.

    ``min_subdiv`` splits each cell into equal subcells first, which only
    adds nodes (the rule is already exact for the target degrees).
    """
    nodes = []
    weights = []
    for z0, z1 in zip(partition[:-1], partition[1:]):
        edges = np.linspace(z0, z1, min_subdiv + 1)
        for s0, s1 in zip(edges[:-1], edges[1:]):
            half = 0.5 * (s1 - s0)
            mid = 0.5 * (s0 + s1)
            nodes.append(mid + half * _GL_NODES)
            weights.append(half * _GL_WEIGHTS)
    return np.concatenate(nodes), np.concatenate(weights)


def smoothstep_coeffs(z0, z1, rising=True):
    """Quintic smoothstep on [z0, z1] as local (z - z0) coefficients.

    The rising variant goes 0 -> 1 with zero first and second derivative at
    both ends; the falling variant is its mirror image.
    """
    w = float(z1) - float(z0)
    if w <= 0:
        raise ProfileError("smoothstep needs z1 > z0")
    u = Polynomial([0.0, 1.0 / w])  # u = (z - z0) / w in local coordinates
    s = 10.0 * u**3 - 15.0 * u**4 + 6.0 * u**5
    if not rising:
        s = Polynomial([1.0]) - s
    return s.coef
