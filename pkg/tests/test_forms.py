import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scalelaw import forms
from scalelaw.errors import DomainError
from scalelaw.forms import (
    DenseMeasurement,
    DenseParams,
    PruneJointParams,
    PruneMeasurement,
    PruneParams,
)
from scalelaw.presets import get_preset

IMAGENET = get_preset("ImageNet").params

# frozen from a 50-digit mpmath evaluation of the same closed forms
ORACLE_IMAGENET_CORE_1E6_1E5 = 3.629674441722467795115225
ORACLE_IMAGENET_ENVELOPE_1E6_1E5 = 0.1922977718433782839640109
ORACLE_IMAGENET_IRREDUCIBLE = 0.1922808286369622654087429
ORACLE_IMAGENET_IRREDUCIBLE_APPROX = 0.1959445587797953185613823
ORACLE_MSTAR = 9.60383883499446059295517
ORACLE_JOINT = 0.7252109430069224652347524
ORACLE_LOWER = 0.1345362404707371031716309


def unit_params(**kw):
    base = dict(alpha=1.0, beta=1.0, b=1.0, c_inf=0.0, eta=1.0, eps0=1.0)
    base.update(kw)
    return DenseParams(**base)


positive = st.floats(1e-3, 1e3)
exponent = st.floats(0.05, 3.0)


class TestDenseParams:
    @pytest.mark.parametrize("field,value", [
        ("alpha", -0.1), ("beta", -1.0), ("b", 0.0), ("b", -1.0), ("c_inf", -1e-9),
        ("eta", 0.0), ("eps0", 0.0), ("alpha", math.nan),
    ])
    def test_rejects_invalid(self, field, value):
        with pytest.raises(DomainError):
            unit_params(**{field: value})

    def test_fixed_mode_requires_class_ratio(self):
        with pytest.raises(DomainError):
            DenseParams(1, 1, 1, 0, 1, eps0=0.5, eps0_mode="fixed-from-classes", n_classes=10)
        p = DenseParams.for_classes(1, 1, 1, 0, 1, n_classes=10)
        assert p.eps0 == 0.9 and p.eps0_mode == "fixed-from-classes"

    def test_measurements_validate(self):
        with pytest.raises(DomainError):
            DenseMeasurement(0.0, 1.0, 0.1)
        with pytest.raises(DomainError):
            PruneMeasurement(20, 1, 0.0, 1, 0.1, 0.1)
        with pytest.raises(DomainError):
            PruneMeasurement(20, 1, 1.5, 1, 0.1, 0.1)


class TestDenseForms:
    def test_unit_constants(self):
        assert forms.eval_dense_core(unit_params(), 1.0, 1.0) == 2.0

    def test_core_limit_is_c_inf(self):
        p = unit_params(c_inf=0.3)
        assert forms.eval_dense_core(p, 1e150, 1e150) == pytest.approx(0.3, rel=1e-12)

    def test_core_imagenet_oracle(self):
        got = forms.eval_dense_core(IMAGENET, 1e6, 1e5)
        assert got == pytest.approx(ORACLE_IMAGENET_CORE_1E6_1E5, rel=1e-12)

    def test_envelope_imagenet_oracle(self):
        got = forms.eval_dense_envelope(IMAGENET, 1e6, 1e5)
        assert got == pytest.approx(ORACLE_IMAGENET_ENVELOPE_1E6_1E5, rel=1e-12)

    def test_envelope_at_pole_magnitude(self):
        # core = n^-1 + m^-1 = 2 = eta
        p = unit_params(eta=2.0, eps0=0.8)
        assert forms.eval_dense_envelope(p, 1.0, 1.0) == pytest.approx(0.8 / math.sqrt(2), rel=1e-14)

    def test_envelope_random_guess_limit(self):
        p = unit_params(eps0=0.9, eta=5.0)
        assert forms.eval_dense_envelope(p, 1e-200, 1.0) == pytest.approx(0.9, rel=1e-12)

    def test_envelope_large_scale_limit(self):
        got = forms.eval_dense_envelope(IMAGENET, 1e200, 1e200)
        assert got == pytest.approx(ORACLE_IMAGENET_IRREDUCIBLE, rel=1e-12)

    def test_irreducible_imagenet(self):
        irr = forms.irreducible_error(IMAGENET)
        assert irr.exact == pytest.approx(ORACLE_IMAGENET_IRREDUCIBLE, rel=1e-12)
        assert irr.approx == pytest.approx(ORACLE_IMAGENET_IRREDUCIBLE_APPROX, rel=1e-12)
        assert round(irr.exact, 4) == 0.1923 and round(irr.approx, 4) == 0.1959

    def test_irreducible_zero(self):
        irr = forms.irreducible_error(unit_params())
        assert irr == (0.0, 0.0)

    def test_irreducible_small_c_matches_first_order(self):
        irr = forms.irreducible_error(unit_params(c_inf=1e-6, eta=10.0))
        assert irr.exact == pytest.approx(irr.approx, rel=1e-10)

    @given(exponent, exponent, positive, st.floats(0, 10), positive, st.floats(0.1, 10))
    def test_irreducible_exact_below_approx(self, a, be, b, c, eta, e0):
        irr = forms.irreducible_error(DenseParams(a, be, b, c, eta, e0))
        assert irr.exact <= irr.approx

    def test_nonpositive_sizes_rejected(self):
        with pytest.raises(DomainError):
            forms.eval_dense_core(unit_params(), 0.0, 1.0)
        with pytest.raises(DomainError):
            forms.eval_dense_envelope(unit_params(), 1.0, -1.0)

    def test_vectorized(self):
        m = np.array([1.0, 2.0])
        out = forms.eval_dense_envelope(IMAGENET, m, m)
        assert isinstance(out, np.ndarray) and out.shape == (2,)
        assert isinstance(forms.eval_dense_envelope(IMAGENET, 1.0, 1.0), float)

    @given(exponent, exponent, positive, st.floats(0, 10), positive, st.floats(0.1, 10))
    def test_envelope_bounds_and_monotone(self, a, be, b, c, eta, e0):
        p = DenseParams(a, be, b, c, eta, e0)
        grid = np.geomspace(1e-4, 1e4, 9)
        m, n = np.meshgrid(grid, grid, indexing="ij")
        e = forms.eval_dense_envelope(p, m, n)
        assert np.all(e > 0) and np.all(e <= e0)
        assert np.all(np.diff(e, axis=0) <= 1e-15 * e0)
        assert np.all(np.diff(e, axis=1) <= 1e-15 * e0)


class TestCriteria:
    def test_geometric_grid_passes(self):
        rep = forms.validate_criteria(unit_params(c_inf=0.1, eta=3.0), np.geomspace(1e-3, 1e3, 5),
                                      np.geomspace(1e-3, 1e3, 5))
        assert rep.passed, rep.violations

    def test_imagenet_published_grid_passes(self):
        preset = get_preset("ImageNet")
        rep = forms.validate_criteria(preset.params, preset.m_scales, preset.n_scales)
        assert rep.passed and len(preset.m_scales) == 7 and len(preset.n_scales) == 7

    def test_needs_three_points_per_axis(self):
        with pytest.raises(DomainError):
            forms.validate_criteria(unit_params(), [1.0, 2.0], [1.0, 2.0, 3.0])


PRUNE = PruneParams(eps_up=0.9, gamma=1.0, p=0.01)


class TestPruneForms:
    def test_hand_value(self):
        assert forms.eval_prune_single(0.1, 0.01, PRUNE) == pytest.approx(0.1 * math.sqrt(41), rel=1e-14)
        assert forms.eval_prune_single_complex(0.1, 0.01, PRUNE) == pytest.approx(0.1 * math.sqrt(41), rel=1e-12)

    def test_equal_plateaus_flat(self):
        p = PruneParams(0.3, 2.5, 0.1)
        d = np.geomspace(1e-6, 1, 20)
        assert np.allclose(forms.eval_prune_single(0.3, d, p), 0.3, rtol=1e-14)

    def test_zero_density_limit(self):
        assert forms.eval_prune_single(0.1, 1e-300, PRUNE) == pytest.approx(0.9, rel=1e-12)

    def test_complex_gamma_two_with_equal_poles(self):
        # A = p when eps_up / eps_np = 1, independent of gamma
        p = PruneParams(0.2, 2.0, 0.05)
        assert forms.eval_prune_single_complex(0.2, 0.3, p) == pytest.approx(0.2, rel=1e-12)

    def test_inverted_plateaus_rejected(self):
        with pytest.raises(DomainError):
            forms.eval_prune_single(0.95, 0.5, PRUNE)
        with pytest.raises(DomainError):
            forms.eval_prune_single_complex(0.95, 0.5, PRUNE)

    @pytest.mark.parametrize("d", [0.0, -0.1, 1.0 + 1e-12])
    def test_density_domain(self, d):
        with pytest.raises(DomainError):
            forms.eval_prune_single(0.1, d, PRUNE)

    def test_density_one_allowed(self):
        assert forms.eval_prune_single(0.1, 1.0, PRUNE) > 0.1

    @given(st.floats(0.01, 0.5), st.floats(1.0, 20.0), st.floats(0.1, 5.0), st.floats(1e-4, 1.0))
    def test_plateau_bounds_and_monotone(self, eps_np, ratio, gamma, p):
        params = PruneParams(eps_np * ratio, gamma, p)
        d = np.geomspace(1e-8, 1.0, 50)
        e = forms.eval_prune_single(eps_np, d, params)
        assert np.all(e >= eps_np * (1 - 1e-12)) and np.all(e <= params.eps_up * (1 + 1e-12))
        assert np.all(np.diff(e) <= 1e-12 * params.eps_up)

    @given(st.floats(0.01, 0.5), st.floats(1.0, 20.0), st.floats(0.1, 5.0), st.floats(1e-4, 1.0),
           st.floats(1e-6, 1.0))
    def test_complex_matches_real(self, eps_np, ratio, gamma, p, d):
        params = PruneParams(eps_np * ratio, gamma, p)
        real = forms.eval_prune_single(eps_np, d, params)
        cplx = forms.eval_prune_single_complex(eps_np, d, params)
        assert cplx == pytest.approx(real, rel=1e-12)


class TestJoint:
    def test_invariant_values(self):
        assert forms.invariant_mstar(2, 4, 0.25, 1, 1) == 2.0
        assert forms.invariant_mstar(37, 0.3, 1.0, 0, 0) == 1.0
        assert forms.invariant_mstar(20, 1, 0.8**10, 1.5, 2) == pytest.approx(ORACLE_MSTAR, rel=1e-12)

    def test_invariant_domain(self):
        with pytest.raises(DomainError):
            forms.invariant_mstar(0, 1, 0.5, 1, 1)
        with pytest.raises(DomainError):
            forms.invariant_mstar(1, 1, 0.0, 1, 1)

    def test_joint_oracle(self):
        params = PruneJointParams(0.9, 1.2, 3.0, 1.0, 2.0)
        assert forms.eval_prune_joint(0.08, 20, 1, 0.1, 5e4, params) == pytest.approx(ORACLE_JOINT, rel=1e-12)
        # n only matters through eps_np
        assert forms.eval_prune_joint(0.08, 20, 1, 0.1, 1.0, params) == forms.eval_prune_joint(
            0.08, 20, 1, 0.1, 5e4, params)

    def test_low_plateau(self):
        params = PruneJointParams(0.9, 1.2, 1e-3, 1.0, 2.0)
        assert forms.eval_prune_joint(0.08, 50, 4, 1.0, 1, params) == pytest.approx(0.08, rel=1e-9)

    def test_equal_invariant_equal_output(self):
        params = PruneJointParams(0.9, 1.3, 0.5, 1.0, 2.0)
        a = forms.eval_prune_joint(0.1, 2.0, 1.0, 0.5, 1, params)
        b = forms.eval_prune_joint(0.1, 1.0, 1.0, 1.0, 1, params)
        assert a == b

    def test_reduction_to_single(self):
        joint = PruneJointParams(0.9, 1.7, 0.02, 0.0, 0.0)
        single = PruneParams(0.9, 1.7, 0.02)
        d = np.geomspace(1e-4, 1, 30)
        assert np.array_equal(forms.eval_prune_joint(0.1, 14, 0.5, d, 1, joint),
                              forms.eval_prune_single(0.1, d, single))


class TestComparisonForms:
    def test_adapted_density(self):
        assert forms.eval_dense_adapted_density(0.01, 0.5, 0.1, 0.25) == pytest.approx(0.11, rel=1e-14)
        assert forms.eval_dense_adapted_density(0.3, 0.7, 0.1, 1.0) == pytest.approx(0.1, rel=1e-14)
        d = np.geomspace(1e-3, 1, 10)
        assert np.allclose(forms.eval_dense_adapted_density(0.3, 0.0, 0.1, d), 0.1, rtol=1e-14)
        with pytest.raises(DomainError):
            forms.eval_dense_adapted_density(0.3, 0.5, 0.1, 0.0)

    def test_lower_transition(self):
        p = PruneParams(0.9, 1.0, 0.001)
        assert forms.eval_prune_lower_transition(0.1, 0.01, p) == pytest.approx(ORACLE_LOWER, rel=1e-12)
        assert forms.eval_prune_lower_transition(0.1, 1.0, PruneParams(0.9, 1.0, 1e-9)) == pytest.approx(0.1, rel=1e-12)
        # A = d gives a factor 2^(gamma/2)
        p2 = PruneParams(0.4, 2.0, 0.05)  # A = 0.05 * (0.4/0.1)^(1/2) = 0.1
        assert forms.eval_prune_lower_transition(0.1, 0.1, p2) == pytest.approx(0.1 * 2.0, rel=1e-12)
