"""Boundary/interface port variables, admissibility checks, constraint projector.

Boundary flow/effort are fixed linear combinations of the co-energy traces
at the two ends; the interface carries the continuous channel-2 trace (flow)
and the channel-1 jump (effort).  Admissible boundary matrices W_B are
checked for full rank and the positive-semidefinite power condition, and
the operator-domain conditions are enforced by an orthogonal projector in
the reference energy inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProjectorError, TraceContinuityError
from .model import MaterialPair, P1, SIDE_MINUS, SIDE_PLUS
from .discretization import PanelGrid, mass_inverse, mass_matrix, nodal_Q_field

SQRT2 = float(np.sqrt(2.0))

# Fixed pairing matrix of the power product on (flow, effort) boundary pairs.
SIGMA = np.block([[np.zeros((2, 2)), np.eye(2)], [np.eye(2), np.zeros((2, 2))]])


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Boundary condition rows W_B (2x4) and interface coupling gain r."""

    W_B: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        W = np.asarray(self.W_B, dtype=float)
        if W.shape != (2, 4) or not np.all(np.isfinite(W)):
            raise ValueError("W_B must be a finite 2x4 matrix")
        object.__setattr__(self, "W_B", W)

    @classmethod
    def dissipative(cls):
        """f + e = 0 at the ends; strictly passive boundary."""
        return cls(W_B=np.hstack([np.eye(2), np.eye(2)]) / SQRT2)

    @classmethod
    def conservative(cls):
        """f = 0 at the ends; no boundary power flow."""
        return cls(W_B=np.hstack([np.eye(2), np.zeros((2, 2))]))


@dataclass(frozen=True)
class PortVariables:
    f_boundary: np.ndarray
    e_boundary: np.ndarray
    f_interface: float
    e_interface: float


def boundary_ports(qx_a, qx_b):
    """Boundary flow/effort from the co-energy traces at a and b."""
    qx_a = np.asarray(qx_a, dtype=float)
    qx_b = np.asarray(qx_b, dtype=float)
    f = (P1 @ (qx_b - qx_a)) / SQRT2
    e = (qx_b + qx_a) / SQRT2
    return f, e


def interface_ports(qx_lminus, qx_lplus, tol=1e-9):
    """Interface flow/effort from the one-sided co-energy traces at l.

    The channel-2 trace must be single-valued; its common value is the flow,
    and the channel-1 jump (with reversed sign) is the effort.
    """
    qx_lminus = np.asarray(qx_lminus, dtype=float)
    qx_lplus = np.asarray(qx_lplus, dtype=float)
    jump2 = qx_lplus[1] - qx_lminus[1]
    scale = max(1.0, float(np.max(np.abs([qx_lminus, qx_lplus]))))
    if abs(jump2) > tol * scale:
        raise TraceContinuityError(
            f"channel-2 co-energy trace must be continuous across the "
            f"interface: {qx_lminus[1]} vs {qx_lplus[1]}"
        )
    f_i = 0.5 * (qx_lminus[1] + qx_lplus[1])
    e_i = -(qx_lplus[0] - qx_lminus[0])
    return float(f_i), float(e_i)


def ports_of_traces(qx_a, qx_b, qx_lminus, qx_lplus, tol=1e-9):
    f, e = boundary_ports(qx_a, qx_b)
    f_i, e_i = interface_ports(qx_lminus, qx_lplus, tol)
    return PortVariables(f_boundary=f, e_boundary=e, f_interface=f_i, e_interface=e_i)


def power_balance_terms(ports: PortVariables):
    """The claimed instantaneous energy rate: <e, f> - e_I * f_I."""
    return float(ports.e_boundary @ ports.f_boundary
                 - ports.e_interface * ports.f_interface)


def power_pairing_gap(qx_traces, qy_traces):
    """Defect of the trace-side pairing identity against the port-side form.

    ``qx_traces``/``qy_traces`` are (at_a, at_b, at_lminus, at_lplus)
    tuples of co-energy traces.  Exact up to rounding for channel-2
    consistent traces.
    """
    xa, xb, xlm, xlp = (np.asarray(v, float) for v in qx_traces)
    ya, yb, ylm, ylp = (np.asarray(v, float) for v in qy_traces)
    lhs = float(xb @ P1 @ yb - xa @ P1 @ ya)
    lhs += 0.5 * (xlm[1] + xlp[1]) * (ylp[0] - ylm[0])
    lhs += 0.5 * (ylm[1] + ylp[1]) * (xlp[0] - xlm[0])
    fx, ex = boundary_ports(xa, xb)
    fy, ey = boundary_ports(ya, yb)
    fix, eix = interface_ports(xlm, xlp, tol=np.inf)
    fiy, eiy = interface_ports(ylm, ylp, tol=np.inf)
    rhs = float(ey @ fx + ex @ fy) - fix * eiy - fiy * eix
    return lhs - rhs


# -- assumption checks ---------------------------------------------------

@dataclass(frozen=True)
class A1Report:
    passed: bool
    off_diagonal_present: bool
    ratio_at_zero_deviation: float
    max_ratio_mismatch: float
    argmax_z: float
    tol: float

    def lines(self):
        return [
            f"a1_pass = {str(self.passed).lower()}",
            f"a1_off_diagonal = {str(self.off_diagonal_present).lower()}",
            f"a1_ratio_at_zero_deviation = {self.ratio_at_zero_deviation:.17g}",
            f"a1_max_ratio_mismatch = {self.max_ratio_mismatch:.17g}",
            f"a1_argmax_z = {self.argmax_z:.17g}",
        ]


def check_A1(mat: MaterialPair, nsamples=2048, tol=1e-9) -> A1Report:
    """Diagonality plus the two coefficient-ratio conditions.

    Passes iff the pair is diagonal, the channel-1 ratio equals one at
    z = 0, and the channel-1 and channel-2 side ratios agree everywhere.
    """
    if mat.has_offdiagonal:
        return A1Report(False, True, float("nan"), float("nan"), float("nan"), tol)
    zs = np.linspace(mat.a, mat.b, nsamples)
    zs = np.unique(np.concatenate([zs, *(p.poly.breaks for p in mat.profiles())]))
    r11 = mat.qplus11(zs) / mat.qminus11(zs)
    r22 = mat.qplus22(zs) / mat.qminus22(zs)
    mism = np.abs(r11 - r22)
    k = int(np.argmax(mism))
    at0 = abs(mat.qplus11(0.0) / mat.qminus11(0.0) - 1.0)
    passed = bool(at0 <= tol and mism[k] <= tol)
    return A1Report(passed, False, float(at0), float(mism[k]), float(zs[k]), tol)


@dataclass(frozen=True)
class A2Report:
    passed: bool
    r: float
    rank: int
    eigenvalues: np.ndarray

    def lines(self):
        ev = ", ".join(f"{v:.17g}" for v in self.eigenvalues)
        return [
            f"a2_pass = {str(self.passed).lower()}",
            f"a2_r = {self.r:.17g}",
            f"a2_rank = {self.rank}",
            f"a2_power_matrix_eigenvalues = [{ev}]",
        ]


def check_A2(bc: BoundarySpec) -> A2Report:
    """Zero interface gain, full-rank W_B, and W_B Sigma W_B^T >= 0."""
    sv = np.linalg.svd(bc.W_B, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0])) if sv[0] > 0 else 0
    S = bc.W_B @ SIGMA @ bc.W_B.T
    ev = np.linalg.eigvalsh(0.5 * (S + S.T))
    passed = bool(bc.r == 0.0 and rank == 2 and ev[0] >= -1e-12)
    return A2Report(passed, float(bc.r), rank, ev)


# -- constraint projector -------------------------------------------------

def constraint_rows(grid: PanelGrid, mat: MaterialPair, l: float,
                    bc: BoundarySpec, Qfield=None):
    """Linear constraint rows C with D(A) surrogate = ker C.

    Rows: W_B applied to the boundary ports (2), channel-2 co-energy
    continuity at the interface (1), interface flow = r * effort (1), and
    full co-energy continuity at any passive split of a multi-split grid
    (2 per split).
    """
    N = grid.nnodes
    if Qfield is None:
        Qfield = nodal_Q_field(mat, grid, l)

    def coenergy_row(node, channel):
        row = np.zeros(2 * N)
        for j in range(2):
            row[j * N + node] = Qfield[node, channel, j]
        return row

    il, ir = grid.split_slots(l)
    u_a = np.array([coenergy_row(0, 0), coenergy_row(0, 1)])
    u_b = np.array([coenergy_row(N - 1, 0), coenergy_row(N - 1, 1)])
    u_lm = np.array([coenergy_row(il, 0), coenergy_row(il, 1)])
    u_lp = np.array([coenergy_row(ir, 0), coenergy_row(ir, 1)])

    f_rows = (P1 @ (u_b - u_a)) / SQRT2
    e_rows = (u_b + u_a) / SQRT2
    rows = [bc.W_B @ np.vstack([f_rows, e_rows])]

    rows.append((u_lp[1] - u_lm[1])[None, :])
    f_i = 0.5 * (u_lp[1] + u_lm[1])
    e_i = -(u_lp[0] - u_lm[0])
    rows.append((f_i - bc.r * e_i)[None, :])

    for s in grid.splits:
        if abs(s - l) <= 1e-12:
            continue
        jl, jr = grid.split_slots(s)
        for ch in range(2):
            row = np.zeros(2 * N)
            for j in range(2):
                row[j * N + jl] -= Qfield[jl, ch, j]
                row[j * N + jr] += Qfield[jr, ch, j]
            rows.append(row[None, :])
    return np.vstack(rows)


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector onto ker(C) in the inner product of ``mass``."""

    matrix: np.ndarray
    constraints: np.ndarray
    mass: np.ndarray

    def __call__(self, vec):
        return self.matrix @ vec

    @property
    def subspace_dim(self):
        return self.matrix.shape[0] - self.constraints.shape[0]


def constraint_projector(grid: PanelGrid, mat: MaterialPair, l: float,
                         bc: BoundarySpec, Qfield=None, mass=None,
                         mass_inv=None) -> Projector:
    """Build the reference-energy orthogonal projector enforcing D(A).

    The projector is idempotent and self-adjoint in the reference energy
    inner product; rank-deficient constraint rows raise.
    """
    C = constraint_rows(grid, mat, l, bc, Qfield)
    if mass is None:
        Q0 = nodal_Q_field(mat, grid, 0.0)
        mass = mass_matrix(grid, Q0)
        mass_inv = mass_inverse(grid, Q0)
    if mass_inv is None:
        mass_inv = np.linalg.inv(mass)
    WinvCt = mass_inv @ C.T
    Mc = C @ WinvCt
    cond = np.linalg.cond(Mc)
    if not np.isfinite(cond) or cond > 1e12:
        raise ProjectorError(
            f"constraint rows are rank deficient (condition {cond:.3e})"
        )
    P = np.eye(C.shape[1]) - WinvCt @ np.linalg.solve(Mc, C)
    return Projector(matrix=P, constraints=C, mass=mass)
