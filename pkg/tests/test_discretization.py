"""Grid construction and the exact discrete structure identities."""

import numpy as np
import pytest

from phiface import (
    DomainSpec,
    StateVector,
    adjoint_residual,
    apply_dl,
    apply_dl_star,
    apply_J,
    build_grid,
    skew_residual,
    weighted_inner,
)
from phiface.discretization import (
    SbpOperator,
    build_grid_spacing,
    build_multisplit_grid,
    l2_inner,
    nodal_Q_field,
)
from phiface.errors import GridError, TraceContinuityError

from conftest import (
    equal_material,
    random_coenergy_pair,
    random_trace_consistent_scalar,
    ratio_material,
)


class TestGrid:
    def test_uniform_nodes(self, dom):
        grid = build_grid(dom, 0.0, 5, 5)
        assert np.allclose(grid.nodes_minus, [-1.0, -0.75, -0.5, -0.25, 0.0])
        assert np.allclose(grid.nodes_plus, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_trapezoid_weights(self, dom):
        grid = build_grid(dom, 0.0, 5, 5)
        assert np.allclose(grid.panels[0].weights, [0.125, 0.25, 0.25, 0.25, 0.125])
        for p in grid.panels:
            assert np.all(p.weights > 0)
            assert p.weights.sum() == pytest.approx(p.nodes[-1] - p.nodes[0])

    def test_interface_node_duplicated(self, dom):
        grid = build_grid(dom, -0.25, 7, 9)
        il, ir = grid.split_slots(-0.25)
        assert grid.nodes[il] == grid.nodes[ir] == -0.25
        assert ir == il + 1

    def test_interface_at_boundary_rejected(self, dom):
        with pytest.raises(GridError):
            build_grid(dom, dom.a, 5, 5)

    def test_degenerate_panel_rejected(self, dom):
        with pytest.raises(GridError):
            build_grid(dom, -0.9, 5, 5)

    def test_spacing_builder_handles_edge_positions(self, dom):
        grid = build_grid_spacing(dom, -0.9, 0.1)
        assert grid.l == -0.9

    def test_multisplit_grid(self, dom):
        grid = build_multisplit_grid(dom, [-0.5, 0.25], 0.1)
        assert grid.splits == (-0.5, 0.25)
        assert len(grid.panels) == 3
        for s in grid.splits:
            il, ir = grid.split_slots(s)
            assert grid.nodes[il] == grid.nodes[ir] == s


class TestSbpOperator:
    @pytest.mark.parametrize("n", [4, 5, 8, 16, 33, 64])
    def test_identity_exact(self, n):
        op = SbpOperator.second_order(n, 0.731 / (n - 1))
        assert op.identity_residual() <= 1e-13


class TestApplyOperators:
    def test_dl_annihilates_constants(self, dom):
        grid = build_grid(dom, 0.2, 9, 11)
        assert np.allclose(apply_dl(grid, np.full(grid.nnodes, 3.7)), 0.0, atol=1e-13)

    def test_dl_exact_on_linear(self, dom):
        grid = build_grid(dom, 0.2, 9, 11)
        assert np.allclose(apply_dl(grid, grid.nodes.copy()), -1.0, atol=1e-12)

    def test_dl_second_order_on_quadratic(self, dom):
        grid = build_grid(dom, 0.0, 33, 33)
        out = apply_dl(grid, grid.nodes**2)
        interior = np.r_[1 : 32, 34 : 65]
        assert np.allclose(out[interior], -2 * grid.nodes[interior], atol=1e-10)

    def test_dl_star_on_jump_constant(self, dom):
        grid = build_grid(dom, -0.1, 8, 8)
        il, ir = grid.split_slots(-0.1)
        y = np.where(np.arange(grid.nnodes) <= il, 2.0, 5.0)
        assert np.allclose(apply_dl_star(grid, y), 0.0, atol=1e-13)

    def test_dl_star_exact_on_linear(self, dom):
        grid = build_grid(dom, -0.1, 8, 8)
        assert np.allclose(apply_dl_star(grid, grid.nodes.copy()), 1.0, atol=1e-12)

    def test_J_on_constants(self, dom):
        grid = build_grid(dom, 0.3, 12, 7)
        w = np.ones((2, grid.nnodes))
        assert np.allclose(apply_J(grid, w), 0.0, atol=1e-13)

    def test_J_channel_coupling_on_linears(self, dom):
        grid = build_grid(dom, 0.3, 12, 7)
        z = grid.nodes
        out = apply_J(grid, np.vstack([z, np.zeros_like(z)]))
        assert np.allclose(out[0], 0.0, atol=1e-13)
        assert np.allclose(out[1], -1.0, atol=1e-12)
        out = apply_J(grid, np.vstack([np.zeros_like(z), z]))
        assert np.allclose(out[0], -1.0, atol=1e-12)
        assert np.allclose(out[1], 0.0, atol=1e-13)


class TestWeightedInner:
    def test_half_factor(self, dom):
        grid = build_grid(dom, 0.0, 9, 9)
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, grid.nnodes))
        x /= np.sqrt(l2_inner(grid, x, x))
        Qf = np.broadcast_to(np.eye(2), (grid.nnodes, 2, 2))
        assert weighted_inner(grid, Qf, x, x) == pytest.approx(0.5, abs=1e-12)

    def test_orthogonal_states(self, dom):
        grid = build_grid(dom, 0.0, 9, 9)
        x = np.zeros((2, grid.nnodes))
        y = np.zeros((2, grid.nnodes))
        x[0, 3] = 1.0
        y[1, 3] = 1.0
        Qf = np.broadcast_to(np.eye(2), (grid.nnodes, 2, 2))
        assert weighted_inner(grid, Qf, x, y) == 0.0

    def test_bilinearity_in_Q(self, dom):
        grid = build_grid(dom, 0.0, 9, 9)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, grid.nnodes))
        Q1 = np.broadcast_to(np.eye(2), (grid.nnodes, 2, 2))
        Q2 = np.broadcast_to(2 * np.eye(2), (grid.nnodes, 2, 2))
        assert weighted_inner(grid, Q2, x, x) == pytest.approx(
            2 * weighted_inner(grid, Q1, x, x), rel=1e-14)


class TestAdjointResidual:
    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_random_states(self, dom, n):
        rng = np.random.default_rng(n)
        grid = build_grid(dom, 0.17, n, n)
        for _ in range(25):
            x = random_trace_consistent_scalar(rng, grid)
            y = rng.standard_normal(grid.nnodes)
            scale = np.linalg.norm(x) * np.linalg.norm(y)
            assert abs(adjoint_residual(grid, x, y)) <= 1e-12 * max(1.0, scale)

    def test_zero_state(self, dom):
        grid = build_grid(dom, 0.0, 8, 8)
        assert adjoint_residual(grid, np.zeros(grid.nnodes), np.ones(grid.nnodes)) == 0.0

    def test_linear_pair_hand_value(self, dom):
        # Both sides of the identity evaluate to zero for x = z, y = 1.
        grid = build_grid(dom, 0.0, 12, 12)
        assert abs(adjoint_residual(grid, grid.nodes.copy(),
                                    np.ones(grid.nnodes))) <= 1e-13

    def test_jump_in_first_argument_rejected(self, dom):
        grid = build_grid(dom, 0.0, 8, 8)
        x = np.zeros(grid.nnodes)
        il, ir = grid.split_slots(0.0)
        x[ir] = 1.0
        with pytest.raises(TraceContinuityError):
            adjoint_residual(grid, x, x)


class TestSkewResidual:
    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_random_states(self, dom, n):
        rng = np.random.default_rng(100 + n)
        grid = build_grid(dom, -0.2, n, n)
        for _ in range(25):
            qx = random_coenergy_pair(rng, grid)
            qy = random_coenergy_pair(rng, grid)
            scale = np.linalg.norm(qx) * np.linalg.norm(qy)
            assert abs(skew_residual(grid, qx, qy)) <= 1e-12 * max(1.0, scale)

    def test_pure_skewness_for_compact_support(self, dom):
        grid = build_grid(dom, 0.0, 16, 16)
        qx = np.zeros((2, grid.nnodes))
        qx[:, 4:10] = np.random.default_rng(5).standard_normal((2, 6))
        lhs = l2_inner(grid, apply_J(grid, qx), qx)
        assert abs(lhs) <= 1e-13 * max(1.0, np.linalg.norm(qx) ** 2)

    def test_constant_fields(self, dom):
        grid = build_grid(dom, 0.2, 8, 8)
        qx = np.outer([1.0, 2.0], np.ones(grid.nnodes))
        qy = np.outer([-0.5, 3.0], np.ones(grid.nnodes))
        assert abs(skew_residual(grid, qx, qy)) <= 1e-13

    def test_channel2_jump_rejected(self, dom):
        grid = build_grid(dom, 0.2, 8, 8)
        qx = np.ones((2, grid.nnodes))
        il, ir = grid.split_slots(0.2)
        qx[1, ir] += 1.0
        with pytest.raises(TraceContinuityError):
            skew_residual(grid, qx, qx)


class TestNormEquivalenceOnStates:
    def test_ratio_within_coercivity_bounds(self, dom):
        mat = ratio_material(1.0, 2.0, 0.3, 0.4)
        grid = build_grid(dom, -0.3, 16, 24)
        Q0 = nodal_Q_field(mat, grid, 0.0)
        rng = np.random.default_rng(9)
        for _ in range(100):
            l = rng.uniform(-0.9, 0.9)
            Ql = nodal_Q_field(mat, grid, l)
            x = rng.standard_normal((2, grid.nnodes))
            ratio = weighted_inner(grid, Ql, x, x) / weighted_inner(grid, Q0, x, x)
            assert mat.m / mat.M - 1e-12 <= ratio <= mat.M / mat.m + 1e-12


class TestStateVector:
    def test_shape_enforced(self):
        with pytest.raises(ValueError):
            StateVector(np.zeros((3, 4)))

    def test_finite_enforced(self):
        bad = np.zeros((2, 4))
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            StateVector(bad)

    def test_from_function(self, dom):
        grid = build_grid(dom, 0.0, 5, 5)
        sv = StateVector.from_function(grid, lambda z: z, lambda z: 1.0)
        assert np.allclose(sv.values[0], grid.nodes)
        assert np.allclose(sv.values[1], 1.0)
