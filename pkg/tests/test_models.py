"""Hamiltonian families: endpoint operators, interpolation, derivatives."""

import numpy as np
import pytest

from cdqfi.models import (
    ModelSpec,
    control_coeffs,
    dlambda_coeffs,
    final_coeffs,
    initial_coeffs,
    sensitivity_coeffs,
    total_coeffs,
)
from cdqfi.pauli import OperatorCoeffs, build_basis, to_dense

NN2 = ModelSpec("nearest-neighbor", 2)
B2 = build_basis(2, 2)


class TestInitial:
    def test_q2_unit_field(self):
        c = initial_coeffs(NN2, B2)
        assert c.get_term("XI") == 1.0
        assert c.get_term("IX") == 1.0
        assert np.count_nonzero(c.values) == 2

    def test_q3_half_field(self):
        spec = ModelSpec("dipolar", 3, h=0.5)
        basis = build_basis(3, 2)
        c = initial_coeffs(spec, basis)
        for s in ("XII", "IXI", "IIX"):
            assert c.get_term(s) == 0.5
        assert np.count_nonzero(c.values) == 3

    def test_dense_spectrum_q2(self):
        vals = np.linalg.eigvalsh(to_dense(initial_coeffs(NN2, B2)))
        np.testing.assert_allclose(vals, [-2.0, 0.0, 0.0, 2.0], atol=1e-12)


class TestFinal:
    def test_t0_is_pure_z(self):
        c = final_coeffs(NN2, B2, 0.0)
        assert c.get_term("ZI") == 1.0
        assert c.get_term("IZ") == 1.0
        assert np.count_nonzero(c.values) == 2

    def test_q2_dipolar_quarter_period(self):
        spec = ModelSpec("dipolar", 2)
        c = final_coeffs(spec, B2, np.pi / 2)
        np.testing.assert_allclose(c.get_term("XY"), -1.0, atol=1e-15)
        np.testing.assert_allclose(c.get_term("YX"), -1.0, atol=1e-15)
        np.testing.assert_allclose(c.get_term("ZI"), 0.0, atol=1e-15)

    def test_q3_van_der_waals_distance_factor(self):
        spec = ModelSpec("van-der-waals", 3)
        basis = build_basis(3, 2)
        t = 0.37
        c = final_coeffs(spec, basis, t)
        # chain positions 1 and 3: distance 2, factor 2^-6
        np.testing.assert_allclose(
            abs(c.get_term("XIY")), 2.0**-6 * np.sin(spec.omega * t), atol=1e-15
        )

    def test_trapped_ions_alias(self):
        assert ModelSpec("trapped-ions", 2).family == "van-der-waals"

    def test_needs_pair_terms(self):
        with pytest.raises(ValueError):
            final_coeffs(ModelSpec("dipolar", 2), build_basis(2, 1), 0.5)


class TestControl:
    def test_endpoints(self):
        t = 0.3
        np.testing.assert_array_equal(
            control_coeffs(NN2, B2, t, 0.0).values, initial_coeffs(NN2, B2).values
        )
        np.testing.assert_array_equal(
            control_coeffs(NN2, B2, t, 1.0).values, final_coeffs(NN2, B2, t).values
        )

    def test_midpoint_is_mean(self):
        t = 0.62
        mid = control_coeffs(NN2, B2, t, 0.5).values
        mean = (initial_coeffs(NN2, B2).values + final_coeffs(NN2, B2, t).values) / 2
        np.testing.assert_allclose(mid, mean, atol=1e-16)

    def test_lambda_domain(self):
        with pytest.raises(ValueError):
            control_coeffs(NN2, B2, 0.1, 1.5)


class TestSensitivity:
    def test_vanishes_at_t0_and_lambda0(self):
        assert not np.any(sensitivity_coeffs(NN2, B2, 0.0, 0.7).values)
        assert not np.any(sensitivity_coeffs(NN2, B2, 0.9, 0.0).values)

    def test_central_difference_oracle(self):
        spec = ModelSpec("dipolar", 3, omega=1.3)
        basis = build_basis(3, 2)
        rng = np.random.default_rng(17)
        delta = 1e-6
        for _ in range(5):
            t = float(rng.uniform(0, 1))
            lam = float(rng.uniform(0, 1))
            up = control_coeffs(spec.with_omega(spec.omega + delta), basis, t, lam)
            dn = control_coeffs(spec.with_omega(spec.omega - delta), basis, t, lam)
            fd = (up.values - dn.values) / (2 * delta)
            np.testing.assert_allclose(
                sensitivity_coeffs(spec, basis, t, lam).values, fd, atol=1e-9
            )

    def test_closed_form_q2_endpoint(self):
        c = sensitivity_coeffs(NN2, B2, 1.0, 1.0)
        np.testing.assert_allclose(c.get_term("XY"), -np.cos(1.0), atol=1e-15)
        np.testing.assert_allclose(c.get_term("YX"), -np.cos(1.0), atol=1e-15)
        np.testing.assert_allclose(c.get_term("ZI"), -np.sin(1.0), atol=1e-15)
        np.testing.assert_allclose(c.get_term("IZ"), -np.sin(1.0), atol=1e-15)

    def test_second_order_convergence_in_delta(self):
        spec = ModelSpec("van-der-waals", 2, omega=0.9)
        t, lam = 0.77, 0.41
        exact = sensitivity_coeffs(spec, B2, t, lam).values
        errs = []
        for delta in (1e-3, 1e-4, 1e-5):
            up = control_coeffs(spec.with_omega(spec.omega + delta), B2, t, lam)
            dn = control_coeffs(spec.with_omega(spec.omega - delta), B2, t, lam)
            fd = (up.values - dn.values) / (2 * delta)
            errs.append(np.max(np.abs(fd - exact)))
        # error shrinks ~ delta^2: two orders of magnitude per step
        assert errs[1] < errs[0] * 1e-1
        assert errs[2] < errs[1] * 1e-1


class TestDlambda:
    def test_t0_endpoint(self):
        d = dlambda_coeffs(NN2, B2, 0.0)
        assert d.get_term("ZI") == 1.0
        assert d.get_term("XI") == -1.0

    def test_exact_linearity_in_lambda(self):
        t, lam, delta = 0.4, 0.5, 0.125
        up = control_coeffs(NN2, B2, t, lam + delta).values
        dn = control_coeffs(NN2, B2, t, lam - delta).values
        np.testing.assert_allclose(
            (up - dn) / (2 * delta), dlambda_coeffs(NN2, B2, t).values, atol=1e-14
        )

    def test_dense_subtraction(self):
        t = 0.8
        want = to_dense(final_coeffs(NN2, B2, t)) - to_dense(initial_coeffs(NN2, B2))
        np.testing.assert_allclose(to_dense(dlambda_coeffs(NN2, B2, t)), want, atol=1e-14)


class TestTotal:
    def test_no_velocity_or_no_agp_reduces_to_control(self):
        rng = np.random.default_rng(3)
        agp = OperatorCoeffs(B2, rng.standard_normal(16).astype(complex))
        zero = OperatorCoeffs(B2)
        t, lam = 0.25, 0.6
        ctrl = control_coeffs(NN2, B2, t, lam).values
        np.testing.assert_array_equal(
            total_coeffs(NN2, B2, t, lam, 0.0, agp).values, ctrl
        )
        np.testing.assert_array_equal(
            total_coeffs(NN2, B2, t, lam, 1.3, zero).values, ctrl
        )

    def test_bilinear_in_velocity_and_agp(self):
        rng = np.random.default_rng(5)
        agp = OperatorCoeffs(B2, rng.standard_normal(16).astype(complex))
        t, lam = 0.5, 0.5
        a = total_coeffs(NN2, B2, t, lam, 2.0, 0.5 * agp).values
        b = total_coeffs(NN2, B2, t, lam, 1.0, agp).values
        np.testing.assert_allclose(a, b, atol=1e-15)


class TestInvariants:
    def test_all_coefficients_real(self):
        for spec in (NN2, ModelSpec("dipolar", 3), ModelSpec("van-der-waals", 3)):
            basis = build_basis(spec.q, 2)
            for c in (
                initial_coeffs(spec, basis),
                final_coeffs(spec, basis, 0.33),
                control_coeffs(spec, basis, 0.33, 0.7),
                sensitivity_coeffs(spec, basis, 0.33, 0.7),
                dlambda_coeffs(spec, basis, 0.33),
            ):
                assert np.max(np.abs(c.values.imag), initial=0.0) <= 1e-14

    def test_total_omega_derivative_ignores_agp(self):
        # an omega-independent gauge potential leaves the sensitivity unchanged
        rng = np.random.default_rng(7)
        agp = OperatorCoeffs(B2, rng.standard_normal(16).astype(complex))
        t, lam, rate, delta = 0.45, 0.8, 1.7, 1e-6
        up = total_coeffs(NN2.with_omega(1 + delta), B2, t, lam, rate, agp).values
        dn = total_coeffs(NN2.with_omega(1 - delta), B2, t, lam, rate, agp).values
        np.testing.assert_allclose(
            (up - dn) / (2 * delta),
            sensitivity_coeffs(NN2, B2, t, lam).values,
            atol=1e-9,
        )

    def test_nearest_neighbor_equals_dipolar_at_q2(self):
        t = 0.71
        a = final_coeffs(ModelSpec("nearest-neighbor", 2), B2, t).values
        b = final_coeffs(ModelSpec("dipolar", 2), B2, t).values
        np.testing.assert_array_equal(a, b)

    def test_model_spec_round_trip(self):
        spec = ModelSpec("dipolar", 4, h=0.5, omega=1.25)
        again = ModelSpec.from_json_dict(spec.to_json_dict())
        assert again == spec

    def test_model_spec_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            ModelSpec.from_json_dict({"family": "dipolar", "q": 2, "zeta": 1})
