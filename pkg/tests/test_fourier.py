import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caustica.fourier import (CorruptedInputError, IncompatibleEquationError, RotationNumber, TrigPoly,
                              apply_operator, delta, invert_delta, invert_delta_affine, mu, multiply,
                              shift, sigma)


def rand_poly(rng, degree, real=True):
    coeffs = {}
    for l in range(0, degree + 1):
        v = complex(rng.normal(), rng.normal())
        if real:
            coeffs[l] = v if l else complex(v.real)
            coeffs[-l] = coeffs[l].conjugate()
        else:
            coeffs[l] = v
            coeffs[-l] = complex(rng.normal(), rng.normal())
    return TrigPoly(coeffs, real=real)


rotations = st.integers(3, 25).flatmap(
    lambda q: st.sampled_from([RotationNumber(p, q) for p in range(1, q) if 2 * p < q and math.gcd(p, q) == 1]))


class TestRotationNumber:
    def test_constants(self):
        r = RotationNumber(1, 4)
        assert r.omega == pytest.approx(math.pi / 2)
        assert r.c == pytest.approx(math.cos(math.pi / 4))
        assert r.s == pytest.approx(math.sin(math.pi / 4))

    @pytest.mark.parametrize("p,q", [(2, 4), (1, 2), (3, 5), (0, 5), (1, 2)])
    def test_rejects_invalid(self, p, q):
        with pytest.raises(ValueError):
            RotationNumber(p, q)

    def test_unit_root_exact_on_resonances(self):
        r = RotationNumber(2, 7)
        assert r.unit_root(14) == 1.0
        assert r.unit_root(-7) == 1.0
        assert abs(r.unit_root(3) - cmath.exp(3j * r.omega)) < 1e-15


class TestNormalize:
    def test_cos_unchanged(self):
        a = TrigPoly({1: 0.5, -1: 0.5}).normalize()
        assert a.coeffs == {1: 0.5, -1: 0.5}
        assert a.degree() == 1

    def test_tiny_entry_pruned(self):
        a = TrigPoly({3: 1e-20}).normalize()
        assert a.coeffs == {}
        assert a.degree() == 0

    def test_hermitian_pair_unchanged(self):
        a = TrigPoly({2: 0.5j, -2: -0.5j}).normalize()
        assert a[2] == 0.5j and a[-2] == -0.5j

    def test_asymmetry_rejected(self):
        with pytest.raises(CorruptedInputError):
            TrigPoly({2: 1.0, -2: 0.5}).normalize()

    def test_relative_pruning(self):
        a = TrigPoly({0: 1.0, 4: 1e-12, -4: 1e-12}).normalize()
        assert a.coeffs == {0: 1.0}


class TestArithmetic:
    def test_derivative_examples(self):
        assert TrigPoly.cos(2).derivative().allclose(TrigPoly.sin(2, -2.0))
        assert TrigPoly.constant(5).derivative().max_abs() == 0
        assert TrigPoly.sin(1).derivative().allclose(TrigPoly.cos(1))

    def test_multiply_examples(self):
        c = TrigPoly.cos(1)
        assert multiply(c, c).allclose(TrigPoly.constant(0.5) + TrigPoly.cos(2, 0.5))
        assert multiply(c, TrigPoly()).max_abs() == 0
        lhs = TrigPoly.cos(2) * TrigPoly.sin(3)
        assert lhs.allclose(TrigPoly.sin(5, 0.5) + TrigPoly.sin(1, 0.5))

    def test_pointwise_evaluation_matches_product(self):
        rng = np.random.default_rng(0)
        a, b = rand_poly(rng, 4), rand_poly(rng, 3)
        t = np.linspace(0, 2 * np.pi, 17)
        assert np.allclose((a * b)(t), a(t) * b(t), atol=1e-12)

    def test_degree_additive(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a, b = rand_poly(rng, rng.integers(0, 6)), rand_poly(rng, rng.integers(0, 6))
            assert (a * b).degree() <= a.degree() + b.degree()

    def test_antiderivative_requires_zero_mean(self):
        with pytest.raises(IncompatibleEquationError):
            TrigPoly.constant(1).antiderivative()
        assert TrigPoly.cos(3).antiderivative().allclose(TrigPoly.sin(3, 1 / 3))


class TestOperators:
    def test_average_examples(self):
        r = RotationNumber(1, 3)
        assert mu(TrigPoly.exp(3), r).allclose(TrigPoly.exp(3))
        assert mu(TrigPoly.exp(1), r).max_abs() == 0

    def test_shift_quarter_turn(self):
        out = shift(TrigPoly.exp(1), RotationNumber(1, 4))
        assert abs(out[1] - 1j) < 1e-15

    def test_diff_of_constant(self):
        assert delta(TrigPoly.constant(3.7), RotationNumber(2, 5)).max_abs() == 0

    def test_resonant_projection_drops_mean(self):
        a = TrigPoly({0: 1.0, 5: 2.0, -5: 2.0, 1: 1.0, -1: 1.0})
        out = apply_operator(a, "resonant_projection", RotationNumber(1, 5))
        assert out.coeffs == {5: 2.0, -5: 2.0}

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            apply_operator(TrigPoly.cos(1), "rotate", RotationNumber(1, 3))

    @settings(max_examples=60, deadline=None)
    @given(rot=rotations, seed=st.integers(0, 2**32 - 1))
    def test_identities(self, rot, seed):
        a = rand_poly(np.random.default_rng(seed), 3 * rot.q)
        scale = a.max_abs()
        assert (mu(shift(a, rot), rot) - mu(a, rot)).max_abs() <= 1e-12 * scale
        assert (mu(sigma(a, rot), rot) - 2 * mu(a, rot)).max_abs() <= 1e-12 * scale
        assert mu(delta(a, rot), rot).max_abs() <= 1e-12 * scale
        assert (mu(mu(a, rot), rot) - mu(a, rot)).max_abs() <= 1e-12 * scale

    def test_operator_pointwise_meaning(self):
        rot = RotationNumber(2, 7)
        a = rand_poly(np.random.default_rng(3), 9)
        t = np.linspace(0, 2 * np.pi, 11)
        assert np.allclose(shift(a, rot)(t), a(t + rot.omega))
        avg = sum(a(t + j * rot.omega) for j in range(rot.q)) / rot.q
        assert np.allclose(mu(a, rot)(t), avg)


class TestInvertDelta:
    def test_single_harmonic(self):
        rot = RotationNumber(1, 5)
        a = invert_delta(TrigPoly.exp(1), rot)
        assert abs(a[1] - 1 / (cmath.exp(2j * math.pi / 5) - 1)) < 1e-15

    def test_zero(self):
        assert invert_delta(TrigPoly(), RotationNumber(1, 5)).max_abs() == 0

    def test_resonant_rhs(self):
        with pytest.raises(IncompatibleEquationError):
            invert_delta(TrigPoly.exp(5), RotationNumber(1, 5))

    def test_prescribed_average(self):
        rot = RotationNumber(1, 5)
        avg = TrigPoly.cos(5, 0.3)
        a = invert_delta(TrigPoly.cos(2), rot, prescribed_average=avg)
        assert mu(a, rot).allclose(avg)
        with pytest.raises(ValueError):
            invert_delta(TrigPoly.cos(2), rot, prescribed_average=TrigPoly.cos(1))

    @settings(max_examples=60, deadline=None)
    @given(rot=rotations, seed=st.integers(0, 2**32 - 1))
    def test_round_trip_and_conditioning(self, rot, seed):
        b = rand_poly(np.random.default_rng(seed), 2 * rot.q + 3)
        b = b - mu(b, rot)
        a = invert_delta(b, rot)
        assert (delta(a, rot) - b).max_abs() <= 1e-12 * b.max_abs()
        bound = 1 / abs(cmath.exp(2j * math.pi / rot.q) - 1)
        for l, v in a.coeffs.items():
            assert abs(v) <= abs(b[l]) * bound * (1 + 1e-12)

    def test_affine(self):
        rot = RotationNumber(1, 5)
        w = TrigPoly.constant(rot.omega)
        assert invert_delta_affine(w, rot).max_abs() == 0
        a = invert_delta_affine(w + TrigPoly.exp(1), rot)
        assert abs(a[1] - 1 / (cmath.exp(2j * math.pi / 5) - 1)) < 1e-15
        with pytest.raises(IncompatibleEquationError):
            invert_delta_affine(TrigPoly(), rot)


class TestSerialization:
    def test_json_round_trip(self):
        a = TrigPoly({0: 0.25, 3: 1 - 2j, -3: 1 + 2j})
        obj = json.loads(json.dumps(a.to_json_obj()))
        assert obj["coeffs"][0][0] == -3
        assert TrigPoly.from_json_obj(obj).allclose(a, 0)

    def test_csv(self):
        text = TrigPoly.cos(1).to_csv()
        assert text.splitlines() == ["l,re,im", "-1,0.5,0.0", "1,0.5,0.0"]

    def test_bad_triples(self):
        with pytest.raises(ValueError):
            TrigPoly.from_triples([[1, 0.5]])
        with pytest.raises(ValueError):
            TrigPoly.from_triples([[1.5, 0.5, 0]])

    def test_extended_backend_agrees(self):
        rot = RotationNumber(2, 9)
        a = rand_poly(np.random.default_rng(5), 12)
        b = a - mu(a, rot)
        lo = invert_delta(b, rot)
        hi = invert_delta(b.to_extended(), rot)
        assert hi.extended
        assert (hi.to_float() - lo).max_abs() < 1e-13
