"""Shared builders for the test suite."""

import numpy as np
import pytest

from phiface import (
    BoundarySpec,
    CoefficientProfile,
    DomainSpec,
    MaterialPair,
)


@pytest.fixture
def dom():
    return DomainSpec(a=-1.0, b=1.0, l0=0.0)


def constant_profile(value, a=-1.0, b=1.0):
    return CoefficientProfile.constant(value, a, b)


def poly_profile(coeffs, a=-1.0, b=1.0):
    return CoefficientProfile.from_pieces([(a, b, list(coeffs))])


def ratio_material(c1, c2, beta, delta, a=-1.0, b=1.0):
    """Diagonal pair with equal side ratios: Q+ = (1 + beta z^2) Q-.

    Q- = diag(c1, c2) (1 + delta z^2); the ratio equals one at z = 0, so the
    pair satisfies the diagonal/ratio assumption by construction.
    """
    gm1 = poly_profile([c1, 0.0, c1 * delta], a, b)
    gm2 = poly_profile([c2, 0.0, c2 * delta], a, b)
    gp1 = poly_profile([c1, 0.0, c1 * (beta + delta), 0.0, c1 * beta * delta], a, b)
    gp2 = poly_profile([c2, 0.0, c2 * (beta + delta), 0.0, c2 * beta * delta], a, b)
    return MaterialPair.build(gm1, gm2, gp1, gp2)


def equal_material(a=-1.0, b=1.0):
    """Identical smooth fields on both sides; certified bound is zero."""
    p1 = poly_profile([1.5, 0.1, 0.3], a, b)
    p2 = poly_profile([2.0, -0.2, 0.1], a, b)
    return MaterialPair.build(p1, p2, p1, p2)


def identity_material(a=-1.0, b=1.0):
    one = constant_profile(1.0, a, b)
    return MaterialPair.build(one, one, one, one)


@pytest.fixture
def a1_material():
    return ratio_material(1.0, 2.0, 0.3, 0.4)


@pytest.fixture
def bc_dissipative():
    return BoundarySpec.dissipative()


@pytest.fixture
def bc_conservative():
    return BoundarySpec.conservative()


def random_trace_consistent_scalar(rng, grid):
    """Scalar field continuous across every split (single trace)."""
    x = rng.standard_normal(grid.nnodes)
    for s in grid.splits:
        il, ir = grid.split_slots(s)
        x[ir] = x[il]
    return x


def random_coenergy_pair(rng, grid):
    """(2, N) field with a single-valued channel-2 trace at every split."""
    u = rng.standard_normal((2, grid.nnodes))
    for s in grid.splits:
        il, ir = grid.split_slots(s)
        u[1, ir] = u[1, il]
    return u
