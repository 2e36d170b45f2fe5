"""Panel grids and difference operators with exact discrete structure.

The grid carries one uniform node panel per subdomain and duplicates every
split position, so one-sided traces are genuine degrees of freedom.  The
per-panel derivative is a second-order diagonal-norm operator satisfying
H*D + D^T*H = diag(-1, 0, ..., 0, +1) exactly; this makes the discrete
counterparts of the formal-adjoint and skew-symmetry identities hold to
rounding, not just to truncation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError, TraceContinuityError
from .model import DomainSpec, MaterialPair, P1, SIDE_MINUS, SIDE_PLUS

SBP_IDENTITY_TOL = 1e-13
MIN_PANEL_NODES = 4


@dataclass(frozen=True, eq=False)
class SbpOperator:
    """Dense derivative matrix D, diagonal norm H, boundary matrix B.

    Satisfies H @ D + D.T @ H == B with B = diag(-1, 0, ..., 0, +1).
    """

    D: np.ndarray
    H: np.ndarray  # diagonal entries
    B: np.ndarray

    @classmethod
    def second_order(cls, n, h):
        if n < MIN_PANEL_NODES:
            raise GridError(f"panel needs >= {MIN_PANEL_NODES} nodes, got {n}")
        D = np.zeros((n, n))
        D[0, 0], D[0, 1] = -1.0 / h, 1.0 / h
        D[-1, -2], D[-1, -1] = -1.0 / h, 1.0 / h
        for i in range(1, n - 1):
            D[i, i - 1] = -0.5 / h
            D[i, i + 1] = 0.5 / h
        H = np.full(n, h)
        H[0] = H[-1] = 0.5 * h
        B = np.zeros((n, n))
        B[0, 0], B[-1, -1] = -1.0, 1.0
        return cls(D=D, H=H, B=B)

    def identity_residual(self):
        lhs = self.H[:, None] * self.D + self.D.T * self.H[None, :]
        return float(np.max(np.abs(lhs - self.B)))


@dataclass(frozen=True, eq=False)
class Panel:
    nodes: np.ndarray
    weights: np.ndarray
    h: float
    sbp: SbpOperator

    @classmethod
    def uniform(cls, z0, z1, n):
        if n < MIN_PANEL_NODES:
            raise GridError(f"panel needs >= {MIN_PANEL_NODES} nodes, got {n}")
        if not z1 > z0:
            raise GridError(f"degenerate panel [{z0}, {z1}]")
        nodes = np.linspace(z0, z1, n)
        h = (z1 - z0) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = 0.5 * h
        sbp = SbpOperator.second_order(n, h)
        if sbp.identity_residual() > SBP_IDENTITY_TOL:
            raise GridError(f"summation-by-parts identity violated for n={n}, h={h}")
        return cls(nodes=nodes, weights=weights, h=h, sbp=sbp)


@dataclass(frozen=True, eq=False)
class PanelGrid:
    """Node panels over [a, b] split (and duplicated) at interior positions.

    The classic two-panel grid has ``splits == (l,)``.  Grids with several
    splits back the resolvent-product checks, where operators for different
    interface positions must share one discrete space.
    """

    panels: tuple[Panel, ...]
    splits: tuple[float, ...]

    @property
    def a(self):
        return float(self.panels[0].nodes[0])

    @property
    def b(self):
        return float(self.panels[-1].nodes[-1])

    @property
    def nnodes(self):
        return sum(p.nodes.size for p in self.panels)

    @property
    def nodes(self):
        return np.concatenate([p.nodes for p in self.panels])

    @property
    def weights(self):
        return np.concatenate([p.weights for p in self.panels])

    @property
    def hmax(self):
        return max(p.h for p in self.panels)

    def panel_slices(self):
        out = []
        start = 0
        for p in self.panels:
            out.append(slice(start, start + p.nodes.size))
            start += p.nodes.size
        return out

    def split_slots(self, s):
        """(left slot, right slot) node indices of the duplicated split s."""
        for k, sk in enumerate(self.splits):
            if abs(sk - s) <= 1e-12:
                left_end = sum(p.nodes.size for p in self.panels[: k + 1]) - 1
                return left_end, left_end + 1
        raise GridError(f"{s} is not a split of this grid")

    # Two-panel accessors (the common case).

    def _two_panel(self):
        if len(self.panels) != 2:
            raise GridError("operation needs a two-panel grid")
        return self.panels

    @property
    def l(self):
        if len(self.splits) != 1:
            raise GridError("grid has several splits; interface is ambiguous")
        return self.splits[0]

    @property
    def nodes_minus(self):
        return self._two_panel()[0].nodes

    @property
    def nodes_plus(self):
        return self._two_panel()[1].nodes


def build_grid(dom: DomainSpec, l: float, n_minus: int, n_plus: int) -> PanelGrid:
    """Two uniform panels [a, l] and [l, b] with trapezoid-consistent weights."""
    if not (dom.a < l < dom.b):
        raise GridError(f"interface {l} outside ({dom.a}, {dom.b})")
    if n_minus < MIN_PANEL_NODES or n_plus < MIN_PANEL_NODES:
        raise GridError(f"need >= {MIN_PANEL_NODES} nodes per panel")
    h_minus = (l - dom.a) / (n_minus - 1)
    h_plus = (dom.b - l) / (n_plus - 1)
    if l - dom.a < MIN_PANEL_NODES * h_plus or dom.b - l < MIN_PANEL_NODES * h_minus:
        raise GridError(
            f"degenerate panel: lengths {l - dom.a:.3g}/{dom.b - l:.3g} vs "
            f"spacings {h_minus:.3g}/{h_plus:.3g}"
        )
    return PanelGrid(
        panels=(Panel.uniform(dom.a, l, n_minus), Panel.uniform(l, dom.b, n_plus)),
        splits=(float(l),),
    )


def build_grid_spacing(dom: DomainSpec, l: float, target_h: float) -> PanelGrid:
    """Two-panel grid with node counts chosen for roughly uniform spacing.

    The spacing is capped by the smaller panel's scale so interfaces near a
    boundary never produce a degenerate panel.
    """
    h = min(target_h, (l - dom.a) / MIN_PANEL_NODES, (dom.b - l) / MIN_PANEL_NODES)
    n_minus = max(MIN_PANEL_NODES, int(np.ceil((l - dom.a) / h)) + 1)
    n_plus = max(MIN_PANEL_NODES, int(np.ceil((dom.b - l) / h)) + 1)
    return build_grid(dom, l, n_minus, n_plus)


def build_multisplit_grid(dom: DomainSpec, splits, target_h) -> PanelGrid:
    """Uniform panels between consecutive splits, spacing close to target_h."""
    splits = tuple(sorted(float(s) for s in set(np.round(np.asarray(splits, float), 14))))
    for s in splits:
        if not (dom.a < s < dom.b):
            raise GridError(f"split {s} outside ({dom.a}, {dom.b})")
    edges = [dom.a, *splits, dom.b]
    panels = []
    for z0, z1 in zip(edges[:-1], edges[1:]):
        n = max(MIN_PANEL_NODES, int(np.ceil((z1 - z0) / target_h)) + 1)
        panels.append(Panel.uniform(z0, z1, n))
    return PanelGrid(panels=tuple(panels), splits=splits)


# -- states ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateVector:
    """Discrete two-channel state: values[c, i] is channel c at node i."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != 2:
            raise ValueError(f"state must have shape (2, nnodes), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state contains non-finite entries")

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((2, grid.nnodes)))

    @classmethod
    def from_function(cls, grid, f1, f2=None):
        z = grid.nodes
        x1 = np.asarray([f1(zz) for zz in z], dtype=float)
        x2 = np.zeros_like(x1) if f2 is None else np.asarray([f2(zz) for zz in z], dtype=float)
        return cls(np.vstack([x1, x2]))


def flatten(x2):
    """(2, N) channel-stacked field -> length-2N vector [x1 block; x2 block]."""
    return np.asarray(x2, dtype=float).reshape(-1)


def unflatten(vec, nnodes):
    return np.asarray(vec, dtype=float).reshape(2, nnodes)


# -- difference operators ----------------------------------------------

def apply_D(grid: PanelGrid, f):
    """Per-panel derivative of a scalar nodal field."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    for p, sl in zip(grid.panels, grid.panel_slices()):
        out[sl] = p.sbp.D @ f[sl]
    return out


def apply_dl(grid: PanelGrid, x):
    """Discrete minus-derivative acting on single-trace scalar fields."""
    return -apply_D(grid, x)


def apply_dl_star(grid: PanelGrid, y):
    """Discrete per-panel derivative acting on fields that may jump at splits."""
    return apply_D(grid, y)


def apply_J(grid: PanelGrid, w):
    """Channel-coupled derivative: rows (d_l w2, -d_l* w1).

    On each panel this is exactly the matrix differential action of P1 d/dz.
    """
    w = np.asarray(w, dtype=float)
    return np.vstack([apply_dl(grid, w[1]), -apply_dl_star(grid, w[0])])


def derivative_matrix(grid: PanelGrid):
    """Block-diagonal per-panel derivative on scalar fields."""
    N = grid.nnodes
    D = np.zeros((N, N))
    for p, sl in zip(grid.panels, grid.panel_slices()):
        D[sl, sl] = p.sbp.D
    return D


def J_matrix(grid: PanelGrid):
    """Channel-stacked matrix of apply_J (2N x 2N)."""
    D = derivative_matrix(grid)
    N = grid.nnodes
    J = np.zeros((2 * N, 2 * N))
    J[:N, N:] = -D
    J[N:, :N] = -D
    return J


# -- inner products and nodal fields -----------------------------------

def l2_inner(grid: PanelGrid, f, g):
    """Unweighted discrete L2 pairing; accepts (N,) or (2, N) fields."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    w = grid.weights
    if f.ndim == 1:
        return float(np.sum(w * f * g))
    return float(np.sum(w * np.sum(f * g, axis=0)))


def weighted_inner(grid: PanelGrid, Qfield, x, y):
    """Energy inner product 0.5 * sum_i w_i y_i^T Q(z_i) x_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Qx = np.einsum("nij,jn->in", Qfield, x)
    return 0.5 * float(np.sum(grid.weights * np.sum(y * Qx, axis=0)))


def _side_entries(mat, side, zs):
    q11, q22, q12 = mat.entry_profiles(side)
    out = np.zeros((zs.size, 2, 2))
    out[:, 0, 0] = q11(zs)
    out[:, 1, 1] = q22(zs)
    if q12 is not None:
        off = q12(zs)
        out[:, 0, 1] = off
        out[:, 1, 0] = off
    return out


def nodal_Q_field(mat: MaterialPair, grid: PanelGrid, l: float, tie=SIDE_MINUS):
    """Per-node 2x2 matrices of the composed coefficient field at interface l.

    When l is a split of the grid, the duplicated slots there carry the
    one-sided values.  A non-duplicated node landing exactly on l takes the
    ``tie`` side (a measure-zero convention; both sides coincide there for
    any material satisfying the ratio assumption).
    """
    zs = grid.nodes
    minus = _side_entries(mat, SIDE_MINUS, zs)
    plus = _side_entries(mat, SIDE_PLUS, zs)
    take_plus = zs > l + 1e-14
    at_l = np.abs(zs - l) <= 1e-14
    if np.any(at_l) and tie == SIDE_PLUS:
        take_plus = take_plus | at_l
    for s in grid.splits:
        if abs(s - l) <= 1e-14:
            il, ir = grid.split_slots(s)
            take_plus[il] = False
            take_plus[ir] = True
    out = minus.copy()
    out[take_plus] = plus[take_plus]
    return out


def apply_Q_field(Qfield, x):
    """Nodal multiplication (Q x)[c, i] = sum_j Q[i, c, j] x[j, i]."""
    return np.einsum("nij,jn->in", Qfield, np.asarray(x, dtype=float))


def Q_matrix(grid: PanelGrid, Qfield):
    """Channel-stacked matrix of nodal multiplication by Qfield."""
    N = grid.nnodes
    M = np.zeros((2 * N, 2 * N))
    rng = np.arange(N)
    for i in range(2):
        for j in range(2):
            M[i * N + rng, j * N + rng] = Qfield[:, i, j]
    return M


def mass_matrix(grid: PanelGrid, Qfield):
    """Dense Gram matrix of weighted_inner in the channel-stacked layout."""
    N = grid.nnodes
    W = np.zeros((2 * N, 2 * N))
    rng = np.arange(N)
    for i in range(2):
        for j in range(2):
            W[i * N + rng, j * N + rng] = 0.5 * grid.weights * Qfield[:, i, j]
    return W


def mass_inverse(grid: PanelGrid, Qfield):
    """Inverse of mass_matrix using the per-node 2x2 block structure."""
    N = grid.nnodes
    blocks = 0.5 * grid.weights[:, None, None] * Qfield
    inv = np.linalg.inv(blocks)
    W = np.zeros((2 * N, 2 * N))
    rng = np.arange(N)
    for i in range(2):
        for j in range(2):
            W[i * N + rng, j * N + rng] = inv[:, i, j]
    return W


# -- traces -------------------------------------------------------------

def trace_values(grid: PanelGrid, field2, l):
    """Traces (at a, at b, at l-, at l+) of a (2, N) field."""
    f = np.asarray(field2, dtype=float)
    il, ir = grid.split_slots(l)
    return f[:, 0].copy(), f[:, -1].copy(), f[:, il].copy(), f[:, ir].copy()


# -- structure residuals ------------------------------------------------

def adjoint_residual(grid: PanelGrid, x, y, tol=1e-9):
    """Defect of the discrete formal-adjoint identity for scalar fields.

    ``x`` must be single-trace (continuous) at every split; ``y`` may jump.
    The value vanishes to rounding by the per-panel summation-by-parts
    identity.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = max(1.0, float(np.max(np.abs(x))))
    boundary = x[-1] * y[-1] - x[0] * y[0]
    iface = 0.0
    for s in grid.splits:
        il, ir = grid.split_slots(s)
        if abs(x[il] - x[ir]) > tol * scale:
            raise TraceContinuityError(
                f"first argument jumps at split {s}: {x[il]} vs {x[ir]}"
            )
        iface += x[il] * (y[ir] - y[il])
    return (l2_inner(grid, apply_dl(grid, x), y)
            + boundary - iface
            - l2_inner(grid, x, apply_dl_star(grid, y)))


def skew_residual(grid: PanelGrid, qx, qy, tol=1e-9):
    """Defect of the discrete skew-symmetry identity for co-energy fields.

    Both arguments play the role of composed-coefficient products; their
    second channels must be single-trace at every split.
    """
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    lhs = (l2_inner(grid, apply_J(grid, qx), qy)
           + l2_inner(grid, qx, apply_J(grid, qy)))
    boundary = float(qx[:, -1] @ P1 @ qy[:, -1] - qx[:, 0] @ P1 @ qy[:, 0])
    iface = 0.0
    for s in grid.splits:
        il, ir = grid.split_slots(s)
        for f, name in ((qx, "first"), (qy, "second")):
            if abs(f[1, il] - f[1, ir]) > tol * max(1.0, float(np.max(np.abs(f)))):
                raise TraceContinuityError(
                    f"channel 2 of the {name} argument must be continuous "
                    f"across the split at {s}: {f[1, il]} vs {f[1, ir]}"
                )
        iface += qx[1, il] * (qy[0, ir] - qy[0, il])
        iface += qy[1, il] * (qx[0, ir] - qx[0, il])
    return lhs - boundary - iface
