import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from formcalc import expr as ex
from formcalc.exterior import AltTensor, hs_norm
from formcalc.forms import FormField, contract_field
from formcalc.integrate import IntegrationSpec
from formcalc.measures import (
    CoForm,
    GaussianProductMeasure,
    adjoint_check,
    coform_differential,
    dstar,
    leibniz_check,
    leibniz_sides,
    log_derivative,
    lp_norm,
    measure_from_json,
    pairing,
    sobolev_norm,
    total_mass,
    wedge_measure,
)

from .strategies import forms, polynomials

e = AltTensor.basis
x1, x2 = ex.coord(1), ex.coord(2)
Q = IntegrationSpec.quadrature()
STD1 = GaussianProductMeasure.standard(1)
STD2 = GaussianProductMeasure.standard(2)


def const(t, dim):
    return FormField.constant(t, dim)


def density(omega: CoForm, x) -> AltTensor:
    return omega.density_form.evaluate(np.asarray(x, dtype=float))


class TestLogDerivative:
    def test_examples(self):
        assert log_derivative(STD2, [1.0, -2.0]) == -e(1) + 2 * e(2)
        assert log_derivative(GaussianProductMeasure([0.7, 1.9]), [0.0, 0.0]).is_zero()
        got = log_derivative(GaussianProductMeasure([4.0, 1.0]), [2.0, 0.0])
        assert got == -0.5 * e(1)

    def test_matches_finite_difference_of_log_density(self):
        mu = GaussianProductMeasure([0.5, 2.0, 1.3])
        x = np.array([0.3, -1.1, 0.8])
        h = 1e-6
        beta = log_derivative(mu, x)
        for p in range(3):
            step = np.zeros(3)
            step[p] = h
            fd = (np.log(mu.density(x + step)) - np.log(mu.density(x - step))) / (2 * h)
            assert beta[(p + 1,)] == pytest.approx(float(fd[0]) if np.ndim(fd) else fd, rel=1e-6)

    def test_json(self):
        mu = measure_from_json({"kind": "gaussian_product", "variances": [1.0, 3.0]})
        assert mu.dim == 2
        with pytest.raises(ValueError):
            measure_from_json({"kind": "lebesgue"})


class TestPairingAndNorms:
    def test_pairing_examples(self):
        assert pairing(const(e(1), 2), const(e(1), 2), STD2, Q).value == pytest.approx(1.0)
        f = FormField(1, 1, {(1,): x1})
        assert pairing(f, f, STD1, Q).value == pytest.approx(1.0)
        assert pairing(const(e(1), 2), const(e(2), 2), STD2, Q).value == 0.0

    def test_norm_examples(self):
        assert lp_norm(const(e(1), 2), STD2, 3.0, Q) == pytest.approx(1.0)
        assert lp_norm(FormField(1, 1, {(1,): x1}), STD1, 2.0, Q) == pytest.approx(1.0)
        assert sobolev_norm(const(e(1), 1), STD1, 2.0, Q) == pytest.approx(2.0)

    @given(st.data())
    def test_pairing_bilinear(self, data):
        dim = data.draw(st.integers(1, 3))
        f1, f2, g = (data.draw(forms(1, dim)) for _ in range(3))
        a = data.draw(st.floats(-3, 3))
        mu = GaussianProductMeasure(data.draw(st.lists(st.floats(0.5, 2.0), min_size=dim, max_size=dim)))
        lhs = pairing(f1.scaled(a) + f2, g, mu, Q).value
        rhs = a * pairing(f1, g, mu, Q).value + pairing(f2, g, mu, Q).value
        assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, abs(rhs)))
        assert pairing(f1, g, mu, Q).value == pytest.approx(pairing(g, f1, mu, Q).value, abs=1e-10)


class TestDstar:
    def test_examples(self):
        d = dstar(const(e(1), 1), STD1)
        assert d.evaluate([1.7]) == AltTensor.scalar(1.7)
        d = dstar(const(e(1, 2), 2), STD2)
        assert d.evaluate([3.0, 4.0]) == 3.0 * e(2) - 4.0 * e(1)
        assert dstar(FormField.zero(2, 2), STD2).is_zero()


class TestCoForms:
    def test_coform_differential_examples(self):
        w = coform_differential(CoForm(STD1, const(e(1), 1)))
        assert density(w, [0.8]) == AltTensor.scalar(-0.8)
        assert total_mass(w, Q).value == pytest.approx(0.0, abs=1e-15)
        w = coform_differential(CoForm(STD1, FormField(1, 1, {(1,): x1})))
        assert density(w, [0.5])[()] == pytest.approx(1 - 0.25)
        assert total_mass(w, Q).value == pytest.approx(0.0, abs=1e-14)

    def test_codegree_two_against_expansion(self):
        # (-1)^(2-1) sum_p (d_p F + F beta_p) e_p -| e_12 with F = 1, beta = -x
        w = coform_differential(CoForm(STD2, const(e(1, 2), 2)))
        x = np.array([0.3, -1.2])
        expected = -((-x[0]) * e(2) + (-x[1]) * (-e(1)))
        assert density(w, x).allclose(expected)

    def test_wedge_measure_examples(self):
        omega = CoForm(STD2, FormField(1, 2, {(1,): x2, (2,): 1.0}))
        same = wedge_measure(FormField.scalar(1.0, 2), omega)
        assert density(same, [0.4, 0.9]) == density(omega, [0.4, 0.9])
        scalar = wedge_measure(const(e(1), 2), CoForm(STD2, const(e(1), 2)))
        assert scalar.codegree == 0 and total_mass(scalar, Q).value == pytest.approx(1.0)
        assert wedge_measure(const(e(2), 2), CoForm(STD2, const(e(1), 2))).density_form.is_zero()

    def test_total_mass_examples(self):
        assert total_mass(CoForm(STD1, FormField.scalar(1.0, 1)), Q).value == pytest.approx(1.0)
        assert total_mass(CoForm(STD1, FormField.scalar(x1, 1)), Q).value == pytest.approx(0.0, abs=1e-15)
        assert total_mass(CoForm(STD1, FormField.scalar(x1 * x1, 1)), Q).value == pytest.approx(1.0)


class TestAdjoint:
    def test_examples(self):
        rep = adjoint_check(FormField.scalar(x1, 1), const(e(1), 1), STD1, Q)
        assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(1.0) and rep.passed
        rep = adjoint_check(FormField.scalar(x1, 1), FormField.zero(1, 1), STD1, Q)
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed
        rep = adjoint_check(FormField(1, 2, {(1,): x2}), const(e(1, 2), 2), STD2, Q)
        assert rep.lhs == pytest.approx(-1.0) and rep.passed

    def test_mc_gap_within_three_stderr(self):
        spec = IntegrationSpec.monte_carlo(n=200_000, seed=11)
        rep = adjoint_check(FormField(1, 2, {(2,): x1 * x2}), FormField(2, 2, {(1, 2): x1 + 1.0}), STD2, spec)
        assert rep.stderr > 0 and rep.passed

    @given(st.data())
    def test_adjoint_property(self, data):
        dim = data.draw(st.integers(2, 4))
        n = data.draw(st.integers(0, min(2, dim - 1)))
        omega = data.draw(forms(n, dim))
        f = data.draw(forms(n + 1, dim))
        mu = GaussianProductMeasure(data.draw(st.lists(st.floats(0.5, 2.0), min_size=dim, max_size=dim)))
        rep = adjoint_check(omega, f, mu, Q)
        assert rep.gap <= 1e-10 * max(1.0, abs(rep.lhs))

    @given(st.data())
    def test_pointwise_bound(self, data):
        dim = data.draw(st.integers(1, 4))
        degree = data.draw(st.integers(1, dim))
        f = data.draw(forms(degree, dim))
        mu = GaussianProductMeasure(data.draw(st.lists(st.floats(0.5, 2.0), min_size=dim, max_size=dim)))
        x = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=dim, max_size=dim)))
        lhs = hs_norm(contract_field(mu.log_derivative_form(), f).evaluate(x))
        bound = math.sqrt(degree) * hs_norm(mu.log_derivative(x)) * hs_norm(f.evaluate(x)) if np.any(x) else 0.0
        assert lhs <= bound * (1 + 1e-12) + 1e-300


class TestLeibniz:
    pts = np.random.default_rng(3).normal(size=(50, 2))

    def test_unit_form(self):
        omega = CoForm(STD2, FormField(2, 2, {(1, 2): x1 * x2}))
        lhs, rhs = leibniz_sides(FormField.scalar(1.0, 2), omega)
        d = coform_differential(omega).density_form
        for x in self.pts[:5]:
            assert lhs.density_form.evaluate(x).allclose(d.evaluate(x))
            assert rhs.density_form.evaluate(x).allclose(d.evaluate(x))

    def test_constant_one_form(self):
        rep = leibniz_check(const(e(1), 2), CoForm(STD2, const(e(1, 2), 2)), self.pts)
        assert rep.pointwise_gap <= 1e-12 and rep.passed

    def test_hand_expansion(self):
        g = FormField.scalar(x1, 1)
        lhs, rhs = leibniz_sides(g, CoForm(STD1, const(e(1), 1)))
        for t in (-1.3, 0.0, 0.7):
            assert lhs.density_form.evaluate([t])[()] == pytest.approx(1 - t * t)
            assert rhs.density_form.evaluate([t])[()] == pytest.approx(t * (-t) + 1)

    def test_box_measures(self):
        g = FormField(1, 2, {(2,): x1})
        omega = CoForm(STD2, FormField(2, 2, {(1, 2): x2 + 1.0}))
        rep = leibniz_check(g, omega, self.pts, boxes=[([-1, -1], [0.5, 2.0]), ([0, 0], [3, 3])], spec=Q)
        assert rep.passed and max(rep.box_gaps) <= 1e-12

    @given(st.data())
    def test_leibniz_property(self, data):
        dim = data.draw(st.integers(2, 4))
        codegree = data.draw(st.integers(1, dim))
        m = data.draw(st.integers(0, codegree - 1))
        g = data.draw(forms(m, dim))
        F = data.draw(forms(codegree, dim))
        rep = leibniz_check(g, CoForm(STD2 if dim == 2 else GaussianProductMeasure.standard(dim), F), np.random.default_rng(0).normal(size=(20, dim)))
        assert rep.pointwise_gap <= 1e-10


@given(st.data())
def test_zero_total_derivative(data):
    dim = data.draw(st.integers(1, 3))
    F = FormField(1, dim, {(p,): data.draw(polynomials(dim, 3)) for p in range(1, dim + 1)})
    mu = GaussianProductMeasure(data.draw(st.lists(st.floats(0.5, 2.0), min_size=dim, max_size=dim)))
    mass = total_mass(coform_differential(CoForm(mu, F)), Q).value
    assert abs(mass) <= 1e-10 * max(1.0, pairing(F, F, mu, Q).value ** 0.5 * 10)
