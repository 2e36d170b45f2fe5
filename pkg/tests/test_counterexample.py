"""Divergence construction: materials, state family, and the growth sweep."""

import numpy as np
import pytest

from phiface import (
    CounterexampleSpec,
    build_materials,
    build_xk,
    check_A1,
    divergence_sweep,
    omega_bound,
    quadratic_form,
)
from phiface.counterexample import (
    DOMAIN,
    SUPPORT,
    SpikeState,
    mollification_l2_norm,
    mollified_indicator,
)
from phiface.errors import CertificateRefusedError, DomainError, ResolutionError
from phiface.piecewise import PiecewisePoly

from conftest import identity_material


class TestSpec:
    def test_defaults(self):
        spec = CounterexampleSpec()
        assert spec.sigma == pytest.approx((spec.xi2 - spec.xi1) / 16.0)
        assert spec.klist == (1, 2, 4, 8, 16, 32)

    def test_interval_validation(self):
        with pytest.raises(DomainError):
            CounterexampleSpec(xi1=-0.8, xi2=-0.55)
        with pytest.raises(DomainError):
            CounterexampleSpec(xi1=-0.6, xi2=-0.45)

    def test_epsilon_validation(self):
        with pytest.raises(DomainError):
            CounterexampleSpec(epsilon=0.0)

    def test_sigma_validation(self):
        with pytest.raises(DomainError):
            CounterexampleSpec(sigma=0.1)


class TestMaterials:
    def test_plateau_and_tail_values(self):
        spec = CounterexampleSpec()
        mat = build_materials(spec)
        se = np.sqrt(spec.epsilon)
        # outside the smoothing collars the bump vanishes
        assert mat.qminus22(-1.5) == pytest.approx(se, abs=1e-13)
        assert mat.qminus22(-0.3) == pytest.approx(se, abs=1e-13)
        # inside the bump plateau the product carries the indicator
        mid = 0.5 * (spec.xi1 + spec.xi2)
        assert mat.qminus22(mid) == pytest.approx((spec.epsilon + 1.0) / se, abs=1e-12)
        # the other three entries are the constant sqrt(eps)
        for prof in (mat.qminus11, mat.qplus11, mat.qplus22):
            assert prof(0.5) == pytest.approx(se)

    def test_products_match_construction(self):
        spec = CounterexampleSpec()
        mat = build_materials(spec)
        bump = mollified_indicator(spec)
        zs = np.linspace(-2.0, 2.0, 401)
        p1 = mat.qminus11(zs) * mat.qplus22(zs)
        p2 = mat.qminus22(zs) * mat.qplus11(zs)
        assert np.allclose(p1, spec.epsilon, atol=1e-13)
        assert np.allclose(p2, spec.epsilon + bump(zs), atol=1e-12)

    def test_ratio_check_fails(self):
        rep = check_A1(build_materials(CounterexampleSpec()))
        assert not rep.passed

    def test_certificate_refused(self):
        with pytest.raises(CertificateRefusedError):
            omega_bound(build_materials(CounterexampleSpec()), nsamples=256)

    def test_mollification_norm_small(self):
        spec = CounterexampleSpec()
        norm = mollification_l2_norm(spec)
        assert 0.0 < norm < np.sqrt(2.0 * spec.sigma)


class TestSpikeFamily:
    def test_norm_budget(self):
        spec = CounterexampleSpec()
        for k in spec.klist:
            st = build_xk(spec, k)
            assert st.total_norm <= 1.0 + 1e-8
            assert st.x1_norm <= 2.0 / 3.0 + 1e-12

    def test_endpoint_gap_equals_k(self):
        spec = CounterexampleSpec()
        for k in (1, 5, 32):
            st = build_xk(spec, k)
            assert st.x1(spec.xi2) - st.x1(spec.xi1) == pytest.approx(float(k), rel=1e-12)

    def test_support_window(self):
        spec = CounterexampleSpec()
        st = build_xk(spec, 8)
        for z in (SUPPORT[0], SUPPORT[1]):
            assert abs(st.x1(z)) <= 1e-12
            assert abs(st.x2(z)) <= 1e-12
        zs = np.linspace(-2.0, SUPPORT[0], 50)
        assert np.max(np.abs(st.x1(zs))) == 0.0
        assert np.max(np.abs(st.x2(zs))) == 0.0

    def test_height_width_scaling(self):
        spec = CounterexampleSpec()
        a = build_xk(spec, 4)
        b = build_xk(spec, 8)
        assert b.x1_norm == pytest.approx(a.x1_norm, rel=1e-10)
        assert b.spike_width == pytest.approx(a.spike_width / 4.0)

    def test_plateau_value(self):
        spec = CounterexampleSpec()
        st = build_xk(spec, 2)
        zs = np.linspace(spec.xi1, spec.xi2, 33)
        assert np.allclose(st.x2(zs), -1.0, atol=1e-13)

    def test_x2_norm_target_met_when_feasible(self):
        # an interval close to the norm-target length leaves ramp room
        spec = CounterexampleSpec(xi1=-0.7, xi2=-0.595)
        st = build_xk(spec, 1)
        assert st.x2_norm_target_met
        assert st.x2_norm == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_x2_norm_flagged_when_infeasible(self):
        # the default interval is longer than the 1/3 target allows
        st = build_xk(CounterexampleSpec(), 1)
        assert not st.x2_norm_target_met
        assert st.x2_norm > 1.0 / 3.0


class TestQuadraticForm:
    def test_identity_material_telescopes_to_zero(self):
        spec = CounterexampleSpec()
        st = build_xk(spec, 4)
        mat = identity_material(a=-2.0, b=2.0)
        fv = quadratic_form(mat, st, nquad=2048)
        # the two split terms cancel a +-k/w-sized integrand, so the zero is
        # exact only up to that cancellation scale
        assert abs(fv.total) <= 1e-15 * st.k / st.spike_width
        assert fv.deriv_term == 0.0

    def test_zero_channel2_kills_coupling(self):
        spec = CounterexampleSpec()
        st = build_xk(spec, 4)
        zeroed = SpikeState(
            x1=st.x1, x2=PiecewisePoly.constant(0.0, DOMAIN.a, DOMAIN.b),
            k=st.k, spike_width=st.spike_width, x1_norm=st.x1_norm,
            x2_norm=0.0, total_norm=st.x1_norm, x2_norm_target_met=False,
        )
        fv = quadratic_form(build_materials(spec), zeroed, nquad=2048)
        assert fv.total == pytest.approx(0.0, abs=1e-13)

    def test_low_nquad_rejected(self):
        spec = CounterexampleSpec()
        st = build_xk(spec, 1)
        with pytest.raises(ResolutionError):
            quadratic_form(build_materials(spec), st, nquad=512)

    def test_doubling_k_doubles_value(self):
        spec = CounterexampleSpec(klist=(10, 20))
        mat = build_materials(spec)
        v10 = quadratic_form(mat, build_xk(spec, 10)).total
        v20 = quadratic_form(mat, build_xk(spec, 20)).total
        assert v20 / v10 == pytest.approx(2.0, rel=0.1)


class TestDivergenceSweep:
    def test_default_spec_growth(self):
        sweep = divergence_sweep(CounterexampleSpec())
        assert sweep.strictly_increasing
        assert sweep.slope > 0.0
        assert sweep.r2 >= 0.99
        assert sweep.values[-1] / sweep.values[0] >= 16.0
        assert all(n <= 1.0 for n in sweep.norms)

    def test_slope_near_half(self):
        # the bump passes through one half at the spike peak, so the linear
        # growth rate approaches 1/2 from above
        sweep = divergence_sweep(CounterexampleSpec())
        assert 0.45 <= sweep.slope <= 0.6

    def test_value_per_k_converges(self):
        spec = CounterexampleSpec(klist=(8, 16, 32))
        sweep = divergence_sweep(spec)
        per_k = np.asarray(sweep.values) / np.asarray(sweep.ks)
        assert np.all(np.abs(per_k - 0.5) < 0.1)
        assert abs(per_k[2] - 0.5) < abs(per_k[0] - 0.5)

    def test_derivative_term_bounded(self):
        # the coefficient-derivative part never sees the spike height
        sweep = divergence_sweep(CounterexampleSpec())
        norms2 = np.asarray(sweep.norms) ** 2
        assert np.all(np.abs(sweep.deriv_terms) <= 10.0 * norms2 + 1e-12)
