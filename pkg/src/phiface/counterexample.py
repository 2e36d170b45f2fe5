"""Divergence construction: materials violating the ratio assumption.

On the fixed domain [-2, 2] with interface at -1, a smoothed indicator bump
in one coefficient product makes the energy quadratic form grow without
bound along a family of unit-norm states: a tall, narrow channel-1 spike
whose peak sits at the bump edge, against a channel-2 plateau that cuts off
sharply to the right of it.  All fields are C1 piecewise polynomials, so
every integral below is evaluated exactly by breakpoint-aligned quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResolutionError
from .model import CoefficientProfile, DomainSpec, MaterialPair
from .piecewise import (
    PiecewisePoly,
    gauss_on_partition,
    merge_breakpoints,
    smoothstep_coeffs,
)

DOMAIN = DomainSpec(a=-2.0, b=2.0, l0=-1.0)
SUPPORT = (-0.75, -0.25)
X2_TARGET_NORM = 1.0 / 3.0
X1_NORM_BUDGET = 2.0 / 3.0

# Quintic smoothstep L2 shape constant: integral of s(u)^2 over [0, 1].
_S = np.polynomial.polynomial.Polynomial(smoothstep_coeffs(0.0, 1.0))
SMOOTHSTEP_L2SQ = float((_S * _S).integ()(1.0) - (_S * _S).integ()(0.0))


@dataclass(frozen=True)
class CounterexampleSpec:
    """Parameters of the divergence construction."""

    epsilon: float = 0.1
    xi1: float = -0.7
    xi2: float = -0.55
    sigma: float | None = None
    klist: tuple = (1, 2, 4, 8, 16, 32)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise DomainError("epsilon must be positive")
        if not (-0.75 < self.xi1 < self.xi2 < -0.5):
            raise DomainError(
                f"bump interval [{self.xi1}, {self.xi2}] must sit inside (-3/4, -1/2)"
            )
        if self.sigma is None:
            object.__setattr__(self, "sigma", (self.xi2 - self.xi1) / 16.0)
        if not 0.0 < self.sigma < (self.xi2 - self.xi1) / 4.0:
            raise DomainError(
                f"smoothing width {self.sigma} must lie in (0, (xi2-xi1)/4)"
            )
        ks = tuple(int(k) for k in self.klist)
        if not ks or any(k < 1 for k in ks) or list(ks) != sorted(set(ks)):
            raise DomainError("klist must be strictly increasing positive integers")
        object.__setattr__(self, "klist", ks)

    @property
    def spike_scale(self):
        """Spike half-width at k=1; shrinks as 1/k^2 along the family."""
        return self.sigma / 2.0

    @property
    def x2_ramp_right(self):
        """Width of the plateau cutoff; far below the narrowest spike."""
        return self.spike_scale / (8.0 * max(self.klist) ** 2)

    def spike_width(self, k):
        return self.spike_scale / float(k) ** 2


def mollified_indicator(spec: CounterexampleSpec) -> PiecewisePoly:
    """C1 bump: 1 on the interior of [xi1, xi2], 0 outside the collars.

    The smoothing collars straddle the edges symmetrically, so the bump
    passes through 1/2 exactly at xi1 and xi2.
    """
    a, b = DOMAIN.a, DOMAIN.b
    x1l, x1r = spec.xi1 - spec.sigma, spec.xi1 + spec.sigma
    x2l, x2r = spec.xi2 - spec.sigma, spec.xi2 + spec.sigma
    pieces = [
        (a, x1l, [0.0]),
        (x1l, x1r, smoothstep_coeffs(x1l, x1r, rising=True)),
        (x1r, x2l, [1.0]),
        (x2l, x2r, smoothstep_coeffs(x2l, x2r, rising=False)),
        (x2r, b, [0.0]),
    ]
    return PiecewisePoly.from_pieces(pieces, local=True)


def mollification_l2_norm(spec: CounterexampleSpec) -> float:
    """L2 norm of the difference between the smoothed and sharp indicators."""
    bump = mollified_indicator(spec)
    nodes, weights = bump.quad_nodes(extra_breaks=(spec.xi1, spec.xi2))
    sharp = ((nodes >= spec.xi1) & (nodes <= spec.xi2)).astype(float)
    diff = bump(nodes) - sharp
    return float(np.sqrt(weights @ (diff * diff)))


def build_materials(spec: CounterexampleSpec) -> MaterialPair:
    """Diagonal coercive pair whose coefficient products are eps and eps + bump.

    Three entries are the constant sqrt(eps); the remaining minus-side entry
    carries the smoothed indicator, so the two side-ratio functions disagree
    exactly on the bump and the ratio check fails there.
    """
    se = float(np.sqrt(spec.epsilon))
    a, b = DOMAIN.a, DOMAIN.b
    const = CoefficientProfile.constant(se, a, b)
    bump = mollified_indicator(spec)
    q22 = CoefficientProfile(bump.affine(1.0 / se, shift=se))
    return MaterialPair.build(
        qminus11=const, qminus22=q22, qplus11=const, qplus22=const,
    )


@dataclass(frozen=True, eq=False)
class SpikeState:
    """One member of the bounded-norm family: channel fields and metadata."""

    x1: PiecewisePoly
    x2: PiecewisePoly
    k: int
    spike_width: float
    x1_norm: float
    x2_norm: float
    total_norm: float
    x2_norm_target_met: bool

    def values(self, z):
        return np.vstack([self.x1(z), self.x2(z)])


def _plateau(spec: CounterexampleSpec) -> tuple[PiecewisePoly, bool]:
    """Channel-2 field: -1 on [xi1, xi2], cut off sharply on the right.

    The left ramp width is tuned so the L2 norm hits the 1/3 target when the
    plateau is short enough to allow it; otherwise the narrowest admissible
    ramps are used and the miss is flagged.
    """
    a, b = DOMAIN.a, DOMAIN.b
    tau_r = spec.x2_ramp_right
    length = spec.xi2 - spec.xi1
    room_left = spec.xi1 - SUPPORT[0]
    need = X2_TARGET_NORM**2 - length - tau_r * SMOOTHSTEP_L2SQ
    tau_l = need / SMOOTHSTEP_L2SQ if need > 0 else -1.0
    met = 0.0 < tau_l <= room_left
    if not met:
        tau_l = min(spec.sigma, 0.5 * room_left)
    zl = spec.xi1 - tau_l
    zr = spec.xi2 + tau_r
    pieces = [
        (a, zl, [0.0]),
        (zl, spec.xi1, -np.asarray(smoothstep_coeffs(zl, spec.xi1, rising=True))),
        (spec.xi1, spec.xi2, [-1.0]),
        (spec.xi2, zr, -np.asarray(smoothstep_coeffs(spec.xi2, zr, rising=False))),
        (zr, b, [0.0]),
    ]
    return PiecewisePoly.from_pieces(pieces, local=True), met


def build_xk(spec: CounterexampleSpec, k: int) -> SpikeState:
    """The k-th family member: spike of height k, plateau shared across k.

    The spike peak sits exactly at xi2 with half-width proportional to
    1/k^2, so the height-width scaling keeps the channel-1 norm constant
    while the endpoint gap grows linearly.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    w = spec.spike_width(k)
    if spec.xi2 + w > SUPPORT[1] - 1e-9 or spec.xi2 - w < spec.xi1:
        raise DomainError(f"spike of half-width {w} does not fit the support window")
    a, b = DOMAIN.a, DOMAIN.b
    rise = float(k) * np.asarray(smoothstep_coeffs(spec.xi2 - w, spec.xi2, rising=True))
    fall = float(k) * np.asarray(smoothstep_coeffs(spec.xi2, spec.xi2 + w, rising=False))
    x1 = PiecewisePoly.from_pieces([
        (a, spec.xi2 - w, [0.0]),
        (spec.xi2 - w, spec.xi2, rise),
        (spec.xi2, spec.xi2 + w, fall),
        (spec.xi2 + w, b, [0.0]),
    ], local=True)
    x2, met = _plateau(spec)
    n1 = x1.l2_norm()
    n2 = x2.l2_norm()
    if n1 > X1_NORM_BUDGET + 1e-12:
        raise DomainError(f"spike norm {n1} exceeds its budget {X1_NORM_BUDGET}")
    return SpikeState(
        x1=x1, x2=x2, k=int(k), spike_width=w, x1_norm=n1, x2_norm=n2,
        total_norm=float(np.hypot(n1, n2)), x2_norm_target_met=met,
    )


@dataclass(frozen=True)
class FormValue:
    total: float
    deriv_term: float
    xprime_term: float
    quad_points: int


def quadratic_form(mat: MaterialPair, state: SpikeState, nquad: int = 2048) -> FormValue:
    """Energy quadratic form of the frozen generator on a supported state.

    Evaluates the window integral of x^T Q_minus P1 d/dz(Q_plus x) split into
    the coefficient-derivative part and the state-derivative part, with
    Gauss-Legendre panels aligned to every polynomial breakpoint (exact for
    the piecewise-polynomial data used here).
    """
    if nquad < 1024:
        raise ResolutionError("nquad must be at least 1024")
    lo, hi = SUPPORT
    fields = [mat.qminus11.poly, mat.qminus22.poly, mat.qplus11.poly,
              mat.qplus22.poly, state.x1, state.x2]
    partition = merge_breakpoints(fields, lo, hi)
    subdiv = max(1, int(round(nquad / (12.0 * (partition.size - 1)))))
    nodes, weights = gauss_on_partition(partition, min_subdiv=subdiv)
    spike_lo, spike_hi = state.x1.breaks[1], state.x1.breaks[-2]
    in_spike = int(np.sum((nodes >= spike_lo) & (nodes <= spike_hi)))
    if in_spike < 32:
        raise ResolutionError(
            f"only {in_spike} quadrature points resolve the spike; raise nquad"
        )
    q11m = mat.qminus11(nodes)
    q22m = mat.qminus22(nodes)
    q11p = mat.qplus11(nodes)
    q22p = mat.qplus22(nodes)
    dq11p = mat.qplus11.poly.derivative()(nodes)
    dq22p = mat.qplus22.poly.derivative()(nodes)
    x1 = state.x1(nodes)
    x2 = state.x2(nodes)
    dx1 = state.x1.derivative()(nodes)
    dx2 = state.x2.derivative()(nodes)
    deriv_term = float(weights @ (-(q11m * dq22p + q22m * dq11p) * x1 * x2))
    xprime_term = float(weights @ (-(q11m * q22p) * x1 * dx2 - (q22m * q11p) * x2 * dx1))
    return FormValue(total=deriv_term + xprime_term, deriv_term=deriv_term,
                     xprime_term=xprime_term, quad_points=nodes.size)


@dataclass(frozen=True)
class SweepResult:
    ks: tuple
    values: tuple
    norms: tuple
    deriv_terms: tuple
    xprime_terms: tuple
    slope: float
    intercept: float
    r2: float
    strictly_increasing: bool

    def rows(self):
        return list(zip(self.ks, self.values, self.norms,
                        self.deriv_terms, self.xprime_terms))

    def lines(self):
        return [
            f"sweep_slope = {self.slope:.17g}",
            f"sweep_intercept = {self.intercept:.17g}",
            f"sweep_r2 = {self.r2:.17g}",
            f"sweep_strictly_increasing = {str(self.strictly_increasing).lower()}",
        ]


def divergence_sweep(spec: CounterexampleSpec, klist=None, nquad: int = 2048) -> SweepResult:
    """Form values along the spike family, with a linear fit in k.

    The growth is linear with slope about one half: the rising edge of the
    spike sees the full bump weight near its half-way crossing while the
    falling edge is cut off by the plateau edge.
    """
    mat = build_materials(spec)
    ks = tuple(int(k) for k in (spec.klist if klist is None else klist))
    vals, norms, dts, xps = [], [], [], []
    for k in ks:
        st = build_xk(spec, k)
        fv = quadratic_form(mat, st, nquad=nquad)
        vals.append(fv.total)
        norms.append(st.total_norm)
        dts.append(fv.deriv_term)
        xps.append(fv.xprime_term)
    karr = np.asarray(ks, dtype=float)
    varr = np.asarray(vals)
    slope, intercept = np.polyfit(karr, varr, 1)
    fitted = slope * karr + intercept
    ss_res = float(np.sum((varr - fitted) ** 2))
    ss_tot = float(np.sum((varr - varr.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SweepResult(
        ks=ks, values=tuple(vals), norms=tuple(norms), deriv_terms=tuple(dts),
        xprime_terms=tuple(xps), slope=float(slope), intercept=float(intercept),
        r2=r2, strictly_increasing=bool(np.all(np.diff(varr) > 0)),
    )
