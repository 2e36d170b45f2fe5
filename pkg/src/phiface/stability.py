"""Growth-bound certificates and their spectral verification.

The certificate bounds the energy quadratic form of every frozen-interface
generator by a constant obtained from two families of symmetric matrix
pencils in the coefficient fields (one driven by the coefficient
derivative, one by the derivative of a mixed product).  Verification is
spectral, on the discretized generator: Rayleigh quotients, shifted-inverse
norms, products of shifted inverses for monotone interface sequences, and
matrix-exponential norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CertificateRefusedError, CoercivityError, ResolventError
from .model import DomainSpec, MaterialPair, P1, SIDE_MINUS, SIDE_PLUS
from .discretization import (
    PanelGrid,
    J_matrix,
    Q_matrix,
    build_multisplit_grid,
    mass_inverse,
    mass_matrix,
    nodal_Q_field,
)
from .ports import BoundarySpec, check_A1, check_A2, constraint_projector

PENCIL_REFINE_ROUNDS = 2
PENCIL_REFINE_FACTOR = 32


def qtilde(mat: MaterialPair, z: float, side: str = SIDE_MINUS) -> np.ndarray:
    """Mixed product (Q_s - Q_o) P1 Q_o at z, with o the opposite side.

    For diagonal materials this is purely anti-diagonal, and it is symmetric
    exactly when the two side-ratio functions coincide.
    """
    other = SIDE_PLUS if side == SIDE_MINUS else SIDE_MINUS
    Qs = mat.matrix(side, z)
    Qo = mat.matrix(other, z)
    return (Qs - Qo) @ P1 @ Qo


def qtilde_deriv(mat: MaterialPair, z: float, side: str = SIDE_MINUS) -> np.ndarray:
    """Exact derivative of :func:`qtilde` via the product rule."""
    other = SIDE_PLUS if side == SIDE_MINUS else SIDE_MINUS
    Qs = mat.matrix(side, z)
    Qo = mat.matrix(other, z)
    dQs = mat.matrix_deriv(side, z)
    dQo = mat.matrix_deriv(other, z)
    return (dQs - dQo) @ P1 @ Qo + (Qs - Qo) @ P1 @ dQo


def _pencil_lambda_max(numerator, weight):
    """Largest generalized eigenvalue of sym(numerator) against SPD weight.

    Scalar reference implementation; the lattice sweeps use the closed-form
    batch variant below, which this one cross-checks in the tests.
    """
    sym = 0.5 * (numerator + numerator.T)
    try:
        ev = sla.eigh(sym, weight, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise CoercivityError(f"pencil weight is not positive definite: {exc}") from exc
    return float(ev[-1])


def _batch_pencil_max(S, Q):
    """Per-sample largest eigenvalue of the 2x2 pencil sym(S) x = lam Q x."""
    s11, s22 = S[:, 0, 0], S[:, 1, 1]
    s12 = 0.5 * (S[:, 0, 1] + S[:, 1, 0])
    q11, q22, q12 = Q[:, 0, 0], Q[:, 1, 1], Q[:, 0, 1]
    a = q11 * q22 - q12 * q12
    if np.any(a <= 0.0) or np.any(q11 <= 0.0):
        raise CoercivityError("pencil weight is not positive definite")
    b = s11 * q22 + s22 * q11 - 2.0 * s12 * q12
    c = s11 * s22 - s12 * s12
    disc = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    return (b + disc) / (2.0 * a)


def _side_matrices(mat, side, zs, deriv=False):
    """Vectorized (n, 2, 2) arrays of one side's field or its derivative."""
    q11, q22, q12 = mat.entry_profiles(side)
    if deriv:
        q11, q22 = q11.poly.derivative(), q22.poly.derivative()
        q12 = None if q12 is None else q12.poly.derivative()
    out = np.zeros((zs.size, 2, 2))
    out[:, 0, 0] = q11(zs)
    out[:, 1, 1] = q22(zs)
    if q12 is not None:
        off = q12(zs)
        out[:, 0, 1] = off
        out[:, 1, 0] = off
    return out


def _pencil_sup(mat, numerators_at, weight_side, nsamples):
    """Supremum over z of the pencil eigenvalue, with local lattice refinement.

    The pencils are piecewise smooth in z, so a lattice sweep followed by
    zoomed sweeps around the running argmax certifies the supremum to well
    below the 1% refinement-agreement target.
    """
    breaks = np.unique(np.concatenate([p.poly.breaks for p in mat.profiles()]))
    zs = np.unique(np.concatenate([np.linspace(mat.a, mat.b, max(2, nsamples)), breaks]))

    def sweep(points):
        vals = _batch_pencil_max(numerators_at(points),
                                 _side_matrices(mat, weight_side, points))
        i = int(np.argmax(vals))
        return float(vals[i]), float(points[i])

    best_v, best_z = sweep(zs)
    span = (mat.b - mat.a) / max(2, nsamples - 1)
    for _ in range(PENCIL_REFINE_ROUNDS):
        lo = max(mat.a, best_z - span)
        hi = min(mat.b, best_z + span)
        v, z = sweep(np.linspace(lo, hi, PENCIL_REFINE_FACTOR + 1))
        if v > best_v:
            best_v, best_z = v, z
        span /= PENCIL_REFINE_FACTOR
    return best_v, best_z


def omega_one(mat: MaterialPair, side: str, nsamples: int = 2048) -> float:
    """Pencil bound on the coefficient-derivative term of one side."""
    return _omega_one_detail(mat, side, nsamples)[0]


def _omega_one_detail(mat, side, nsamples):
    other = SIDE_PLUS if side == SIDE_MINUS else SIDE_MINUS

    def numerators(zs):
        diff = _side_matrices(mat, side, zs) - _side_matrices(mat, other, zs)
        dother = _side_matrices(mat, other, zs, deriv=True)
        return np.einsum("nij,jk,nkl->nil", diff, P1, dother)

    sup, argz = _pencil_sup(mat, numerators, side, nsamples)
    return max(0.0, sup), argz, sup


def omega_two(mat: MaterialPair, side: str, nsamples: int = 2048) -> float:
    """Pencil bound on the derivative of the mixed product of one side."""
    return _omega_two_detail(mat, side, nsamples)[0]


def _omega_two_detail(mat, side, nsamples):
    other = SIDE_PLUS if side == SIDE_MINUS else SIDE_MINUS

    def numerators(zs):
        Qs = _side_matrices(mat, side, zs)
        Qo = _side_matrices(mat, other, zs)
        dQs = _side_matrices(mat, side, zs, deriv=True)
        dQo = _side_matrices(mat, other, zs, deriv=True)
        dqt = (np.einsum("nij,jk,nkl->nil", dQs - dQo, P1, Qo)
               + np.einsum("nij,jk,nkl->nil", Qs - Qo, P1, dQo))
        return -dqt

    sup, argz = _pencil_sup(mat, numerators, side, nsamples)
    return max(0.0, sup), argz, sup


@dataclass(frozen=True)
class StabilityCertificate:
    """Growth-bound constants with provenance of the pencil suprema.

    All values are lattice-certified lower bounds of the corresponding
    suprema (the lattice is refined around detected maxima); negative
    pencil maxima are clamped at zero so dissipative pairs report zero.
    Verification records (Rayleigh, shifted-inverse, exponential reports)
    can be attached after the fact.
    """

    omega1_minus: float
    omega2_minus: float
    omega_minus: float
    omega1_plus: float
    omega2_plus: float
    omega_plus: float
    omega: float
    m: float
    M: float
    argmax: dict
    nsamples: int
    pencil_scale: float
    verification: tuple = ()

    def with_verification(self, *reports):
        from dataclasses import replace

        return replace(self, verification=self.verification + tuple(reports))

    def lines(self):
        out = [
            f"omega = {self.omega:.17g}",
            f"omega_minus = {self.omega_minus:.17g}",
            f"omega_plus = {self.omega_plus:.17g}",
            f"omega1_minus = {self.omega1_minus:.17g}",
            f"omega2_minus = {self.omega2_minus:.17g}",
            f"omega1_plus = {self.omega1_plus:.17g}",
            f"omega2_plus = {self.omega2_plus:.17g}",
            f"coercivity_m = {self.m:.17g}",
            f"coercivity_M = {self.M:.17g}",
            f"pencil_scale = {self.pencil_scale:.17g}",
            f"pencil_nsamples = {self.nsamples}",
        ]
        for k, v in self.argmax.items():
            out.append(f"argmax_{k} = {v:.17g}")
        for rep in self.verification:
            out.extend(rep.lines())
        return out


def _sup_matrix_norm(mat, matrix_at, nsamples):
    zs = np.linspace(mat.a, mat.b, nsamples)
    return max(float(np.linalg.norm(matrix_at(z), 2)) for z in zs)


def omega_bound(mat: MaterialPair, nsamples: int = 2048, a1_tol: float = 1e-9) -> StabilityCertificate:
    """Certificate for the frozen-interface family built from ``mat``.

    Refuses when the ratio assumption fails; the divergence sweep in
    :mod:`phiface.counterexample` shows why no certificate of this form can
    be expected in that case.
    """
    report = check_A1(mat, nsamples=max(nsamples, 512), tol=a1_tol)
    if not report.passed:
        raise CertificateRefusedError(
            "material pair violates the diagonal/ratio assumption "
            f"(off-diagonal={report.off_diagonal_present}, "
            f"ratio deviation at 0={report.ratio_at_zero_deviation:.3e}, "
            f"max ratio mismatch={report.max_ratio_mismatch:.3e}); "
            "no growth-bound certificate is issued -- see "
            "phiface.counterexample for the divergence construction"
        )
    o1m, z1m, _ = _omega_one_detail(mat, SIDE_MINUS, nsamples)
    o2m, z2m, _ = _omega_two_detail(mat, SIDE_MINUS, nsamples)
    o1p, z1p, _ = _omega_one_detail(mat, SIDE_PLUS, nsamples)
    o2p, z2p, _ = _omega_two_detail(mat, SIDE_PLUS, nsamples)
    om = max(o1m, 0.5 * o2m)
    op = max(o1p, 0.5 * o2p)
    m, M = mat.m, mat.M
    if not np.isfinite(m):
        from .model import coercivity_bounds

        m, M = coercivity_bounds(mat, 4096)
    scale = 0.0
    coarse = min(nsamples, 256)
    for side in (SIDE_MINUS, SIDE_PLUS):
        other = SIDE_PLUS if side == SIDE_MINUS else SIDE_MINUS
        scale += _sup_matrix_norm(
            mat,
            lambda z, s=side, o=other: (mat.matrix(s, z) - mat.matrix(o, z))
            @ P1 @ mat.matrix_deriv(o, z),
            coarse,
        )
        scale += _sup_matrix_norm(mat, lambda z, s=side: qtilde_deriv(mat, z, s), coarse)
    return StabilityCertificate(
        omega1_minus=o1m, omega2_minus=o2m, omega_minus=om,
        omega1_plus=o1p, omega2_plus=o2p, omega_plus=op,
        omega=max(om, op), m=m, M=M,
        argmax={"omega1_minus": z1m, "omega2_minus": z2m,
                "omega1_plus": z1p, "omega2_plus": z2p},
        nsamples=nsamples,
        pencil_scale=scale / (2.0 * m),
    )


# -- discrete generator ---------------------------------------------------

@dataclass(eq=False)
class DiscreteGenerator:
    """Projected generator on one grid, with its reference-energy geometry."""

    grid: PanelGrid
    l: float
    A: np.ndarray
    mass: np.ndarray
    mass_inv: np.ndarray
    projector: object
    Qfield: np.ndarray
    Q0field: np.ndarray
    _basis: np.ndarray | None = field(default=None, repr=False)
    _restricted: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def h(self):
        return self.grid.hmax

    def basis(self):
        """Mass-orthonormal basis of the constrained subspace."""
        if self._basis is None:
            K = sla.null_space(self.projector.constraints)
            G = K.T @ self.mass @ K
            R = sla.cholesky(G, lower=False)
            self._basis = sla.solve_triangular(R, K.T, lower=False, trans="T").T
        return self._basis

    def restricted(self):
        """The generator in mass-orthonormal coordinates of its subspace."""
        if self._restricted is None:
            V = self.basis()
            self._restricted = V.T @ self.mass @ self.A @ V
        return self._restricted

    def random_constrained(self, rng, n=1):
        Y = rng.standard_normal((self.dim, n))
        return self.projector.matrix @ Y

    def energy_norm2(self, vec):
        return float(vec @ self.mass @ vec)

    def quadratic_form(self, vec):
        return float(vec @ self.mass @ (self.A @ vec))


def assemble_generator(grid: PanelGrid, mat: MaterialPair, l: float,
                       bc: BoundarySpec) -> DiscreteGenerator:
    """Projected generator P (J Q) P on the given grid.

    The outer projections use the reference-energy inner product, so the
    constrained subspace is invariant and the dissipative trace algebra is
    exact on it.
    """
    a2 = check_A2(bc)
    if not a2.passed:
        raise CertificateRefusedError(
            f"boundary spec fails the admissibility check: rank={a2.rank}, "
            f"r={a2.r}, min eig={a2.eigenvalues[0]:.3e}"
        )
    Qf = nodal_Q_field(mat, grid, l)
    Q0f = nodal_Q_field(mat, grid, 0.0)
    W = mass_matrix(grid, Q0f)
    Winv = mass_inverse(grid, Q0f)
    proj = constraint_projector(grid, mat, l, bc, Qfield=Qf, mass=W, mass_inv=Winv)
    JQ = J_matrix(grid) @ Q_matrix(grid, Qf)
    P = proj.matrix
    A = P @ JQ @ P
    return DiscreteGenerator(grid=grid, l=l, A=A, mass=W, mass_inv=Winv,
                             projector=proj, Qfield=Qf, Q0field=Q0f)


def rayleigh_tolerance(cert: StabilityCertificate, h: float) -> float:
    """Pinned verification tolerance: 1e-8 plus an O(h) commutator slack."""
    return 1e-8 + cert.pencil_scale * h


@dataclass(frozen=True)
class RayleighReport:
    max_quotient: float
    max_random_quotient: float
    omega: float
    tol: float
    h: float
    nsamples: int
    passed: bool

    def lines(self):
        return [
            f"rayleigh_max_quotient = {self.max_quotient:.17g}",
            f"rayleigh_max_random_quotient = {self.max_random_quotient:.17g}",
            f"rayleigh_omega = {self.omega:.17g}",
            f"rayleigh_tol = {self.tol:.17g}",
            f"rayleigh_h = {self.h:.17g}",
            f"rayleigh_pass = {str(self.passed).lower()}",
        ]


def rayleigh_max_exact(gen: DiscreteGenerator) -> float:
    """Largest energy Rayleigh quotient of the generator (spectral, exact)."""
    WA = gen.mass @ gen.A
    sym = 0.5 * (WA + WA.T)
    n = sym.shape[0]
    ev = sla.eigh(sym, gen.mass, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    return float(ev[-1])


def rayleigh_check(gen: DiscreteGenerator, omega: float, tol: float,
                   nsamples: int = 0, rng=None) -> RayleighReport:
    """Compare the generator's largest Rayleigh quotient against the bound.

    The exact spectral maximum is always computed; optional random
    constrained states provide an independent sampling cross-check (they
    can only lie below the spectral maximum).
    """
    exact = rayleigh_max_exact(gen)
    max_rand = -np.inf
    if nsamples > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        X = gen.random_constrained(rng, nsamples)
        WX = gen.mass @ X
        num = np.einsum("ij,ij->j", WX, gen.A @ X)
        den = np.einsum("ij,ij->j", WX, X)
        ok = den > 1e-14 * float(np.max(den))
        max_rand = float(np.max(num[ok] / den[ok]))
    passed = bool(exact <= omega + tol)
    return RayleighReport(
        max_quotient=exact, max_random_quotient=max_rand, omega=omega,
        tol=tol, h=gen.h, nsamples=nsamples, passed=passed,
    )


def resolvent_norm(gen: DiscreteGenerator, lam: float) -> float:
    """Energy operator norm of the shifted inverse on the constrained subspace."""
    Ares = gen.restricted()
    shifted = lam * np.eye(Ares.shape[0]) - Ares
    sv = sla.svdvals(shifted)
    if sv[-1] <= 1e-13 * sv[0]:
        raise ResolventError(
            f"shift {lam} is (numerically) in the spectrum: "
            f"smallest singular value {sv[-1]:.3e}"
        )
    return float(1.0 / sv[-1])


def resolvent_defect(gen: DiscreteGenerator, lam: float) -> float:
    """Max-norm defect of (lam*I - A) applied to the computed inverse."""
    Ares = gen.restricted()
    n = Ares.shape[0]
    shifted = lam * np.eye(n) - Ares
    R = np.linalg.solve(shifted, np.eye(n))
    return float(np.max(np.abs(shifted @ R - np.eye(n))))


def _mass_sqrt_factors(mass):
    ev, U = np.linalg.eigh(mass)
    if ev[0] <= 0:
        raise CoercivityError("mass matrix is not positive definite")
    s = np.sqrt(ev)
    return (U * s) @ U.T, (U / s) @ U.T


@dataclass(frozen=True)
class KatoReport:
    norm: float
    bound: float
    lam: float
    omega: float
    k: int
    dim: int
    passed: bool

    def lines(self):
        return [
            f"kato_product_norm = {self.norm:.17g}",
            f"kato_bound = {self.bound:.17g}",
            f"kato_lambda = {self.lam:.17g}",
            f"kato_k = {self.k}",
            f"kato_dim = {self.dim}",
            f"kato_pass = {str(self.passed).lower()}",
        ]


def kato_product_check(mat: MaterialPair, bc: BoundarySpec, l_values,
                       lam: float, omega: float, dom: DomainSpec | None = None,
                       target_h: float = 0.02, tol: float = 1e-8) -> KatoReport:
    """Uniform bound on products of shifted inverses along an l sequence.

    All interface positions are made splits of one shared grid, so the
    per-position generators act on a common discrete space; positions other
    than a generator's own interface enter it as passive splits carrying
    full co-energy continuity.
    """
    if lam <= omega:
        raise ResolventError(f"shift {lam} must exceed the growth bound {omega}")
    l_values = [float(l) for l in l_values]
    k = len(l_values)
    if dom is None:
        dom = DomainSpec(a=mat.a, b=mat.b, l0=l_values[0])
    grid = build_multisplit_grid(dom, sorted(set(l_values)), target_h)
    dim = 2 * grid.nnodes
    Q0f = nodal_Q_field(mat, grid, 0.0)
    W = mass_matrix(grid, Q0f)
    Winv = mass_inverse(grid, Q0f)
    Jm = J_matrix(grid)
    prod = np.eye(dim)
    for l in l_values:
        Qf = nodal_Q_field(mat, grid, l)
        proj = constraint_projector(grid, mat, l, bc, Qfield=Qf, mass=W, mass_inv=Winv)
        A = proj.matrix @ (Jm @ Q_matrix(grid, Qf)) @ proj.matrix
        shifted = lam * np.eye(dim) - A
        prod = np.linalg.solve(shifted, prod)
    Whalf, Whalf_inv = _mass_sqrt_factors(W)
    norm = float(np.linalg.norm(Whalf @ prod @ Whalf_inv, 2))
    bound = (1.0 + tol) / (lam - omega) ** k
    return KatoReport(norm=norm, bound=bound, lam=lam, omega=omega, k=k,
                      dim=dim, passed=bool(norm <= bound))


@dataclass(frozen=True)
class SemigroupReport:
    max_ratio: float
    omega: float
    s_values: tuple
    passed: bool

    def lines(self):
        return [
            f"semigroup_max_ratio = {self.max_ratio:.17g}",
            f"semigroup_omega = {self.omega:.17g}",
            f"semigroup_pass = {str(self.passed).lower()}",
        ]


def semigroup_norm_check(gen: DiscreteGenerator, s_values, omega: float,
                         tol: float = 1e-8) -> SemigroupReport:
    """Check the exponential's energy norm against exp(omega * s)."""
    if gen.dim > 2000:
        raise ValueError("dense matrix exponential capped at state dimension 2000")
    Ares = gen.restricted()
    worst = 0.0
    for s in s_values:
        E = sla.expm(float(s) * Ares)
        worst = max(worst, float(np.linalg.norm(E, 2) * np.exp(-omega * float(s))))
    return SemigroupReport(max_ratio=worst, omega=omega,
                           s_values=tuple(float(s) for s in s_values),
                           passed=bool(worst <= 1.0 + tol))


@dataclass(frozen=True)
class NormEquivalenceReport:
    min_ratio: float
    max_ratio: float
    lower_bound: float
    upper_bound: float
    nsamples: int
    passed: bool

    def lines(self):
        return [
            f"normequiv_min_ratio = {self.min_ratio:.17g}",
            f"normequiv_max_ratio = {self.max_ratio:.17g}",
            f"normequiv_lower = {self.lower_bound:.17g}",
            f"normequiv_upper = {self.upper_bound:.17g}",
            f"normequiv_pass = {str(self.passed).lower()}",
        ]


def norm_equivalence_check(mat: MaterialPair, grid: PanelGrid, nsamples: int,
                           rng=None, tol: float = 1e-10) -> NormEquivalenceReport:
    """Observed range of the energy-norm ratio across random states and l.

    The ratio of the interface-l energy to the reference energy must stay
    inside [m/M, M/m]; the constants do not depend on where the interface
    sits.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if not (np.isfinite(mat.m) and np.isfinite(mat.M)):
        raise CoercivityError(
            "coercivity bounds missing; construct the pair with MaterialPair.build"
        )
    from .discretization import _side_entries

    zs = grid.nodes
    w = grid.weights
    minus = _side_entries(mat, SIDE_MINUS, zs)
    plus = _side_entries(mat, SIDE_PLUS, zs)
    lo, hi = np.inf, -np.inf
    margin = 0.02 * (mat.b - mat.a)
    for _ in range(nsamples):
        l = rng.uniform(mat.a + margin, mat.b - margin)
        x = rng.standard_normal((2, grid.nnodes))
        qm = np.einsum("in,nij,jn->n", x, minus, x)
        qp = np.einsum("in,nij,jn->n", x, plus, x)
        num = float(w @ np.where(zs <= l, qm, qp))
        den = float(w @ np.where(zs <= 0.0, qm, qp))
        ratio = num / den
        lo = min(lo, ratio)
        hi = max(hi, ratio)
    lb = mat.m / mat.M - tol
    ub = mat.M / mat.m + tol
    return NormEquivalenceReport(
        min_ratio=float(lo), max_ratio=float(hi), lower_bound=lb, upper_bound=ub,
        nsamples=nsamples, passed=bool(lb <= lo and hi <= ub),
    )
