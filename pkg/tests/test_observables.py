import math

import pytest
from hypothesis import given, strategies as st

from orbitlab.dynamics import DomainError, MapSystem, dist
from orbitlab.measure import density_model
from orbitlab.observables import (
    LevelSequence,
    ObservableSpec,
    block_length_for_radius,
    evaluate,
    g_inverse,
    level,
    radius_asymptotic,
    radius_for_level,
    tau,
)

CIRCLE = MapSystem.doubling().space
G1 = ObservableSpec("g1", 0.5, CIRCLE)
G2 = ObservableSpec("g2", 0.0, CIRCLE, alpha=2.0)
G3 = ObservableSpec("g3", 0.0, CIRCLE, alpha=2.0, top=1.0)
SEQ1 = LevelSequence(ObservableSpec("g1", 0.37, CIRCLE), 1.0, 2.0, 1)
SEQ2 = LevelSequence(ObservableSpec("g2", 0.37, CIRCLE, alpha=2.0), 1.0, 2.0, 1)
SEQ3 = LevelSequence(ObservableSpec("g3", 0.37, CIRCLE, alpha=1.0, top=0.0), 1.0, 2.0, 1)


class TestEvaluate:
    def test_g1_log_distance(self):
        assert evaluate(G1, 0.5 + math.exp(-2)) == pytest.approx(2.0, abs=1e-12)

    def test_g2_power(self):
        assert evaluate(G2, 0.04) == pytest.approx(5.0, abs=1e-12)

    def test_g3_bounded(self):
        assert evaluate(G3, 0.04) == pytest.approx(0.8, abs=1e-12)

    def test_centre_is_plus_infinity(self):
        assert evaluate(G1, 0.5) == math.inf
        assert evaluate(G2, 0.0) == math.inf
        assert evaluate(G3, 0.0) == 1.0  # finite top

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            ObservableSpec("g2", 0.0, CIRCLE)  # missing alpha
        with pytest.raises(DomainError):
            ObservableSpec("g2", 0.0, CIRCLE, alpha=2.0, top=1.0)  # top is g3-only
        with pytest.raises(DomainError):
            ObservableSpec("g3", 0.0, CIRCLE, alpha=2.0)  # missing top


class TestLevels:
    def test_g1_level_and_calibration(self):
        u = level(SEQ1, 100, 0.0)
        assert u == pytest.approx(math.log(200), abs=1e-12)
        # exact calibration on the Lebesgue circle: n * mu(X0 > u_n) = 1
        assert 100 * 2 * math.exp(-u) == pytest.approx(1.0, abs=1e-12)

    def test_g2_level_and_calibration(self):
        u = level(SEQ2, 100, 1.0)
        assert u == pytest.approx(math.sqrt(200), abs=1e-10)
        assert 100 * 2 * u ** -2 == pytest.approx(1.0, abs=1e-12)

    def test_g3_level_and_calibration(self):
        u = level(SEQ3, 100, -1.0)
        assert u == pytest.approx(-1 / 200, abs=1e-15)
        assert 100 * 2 * (0.0 - u) == pytest.approx(1.0, abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            level(SEQ2, 100, -1.0)
        with pytest.raises(DomainError):
            level(SEQ3, 100, 0.5)
        with pytest.raises(DomainError):
            level(SEQ1, 0, 0.0)

    @given(st.integers(1, 10 ** 6), st.floats(-3, 5), st.floats(0.01, 2.0))
    def test_monotone_in_y(self, n, y, dy):
        assert level(SEQ1, n, y + dy) > level(SEQ1, n, y)

    @given(st.integers(1, 10 ** 6), st.floats(0.1, 5), st.floats(0.01, 2.0))
    def test_monotone_in_y_g2(self, n, y, dy):
        assert level(SEQ2, n, y + dy) > level(SEQ2, n, y)


class TestTau:
    def test_types(self):
        assert tau(G1, 0.0) == 1.0
        assert tau(G2, 2.0, dim=1) == 0.25
        assert tau(ObservableSpec("g3", 0.0, CIRCLE, alpha=2.0, top=1.0), -3.0, dim=1) == 9.0

    def test_domains(self):
        with pytest.raises(DomainError):
            tau(G2, -1.0)
        with pytest.raises(DomainError):
            tau(G3, 1.0)


class TestRadii:
    def test_g1_exact_equals_asymptotic(self):
        r = radius_for_level(SEQ1, 100, 0.0)
        assert r == pytest.approx(0.005, abs=1e-15)
        assert radius_asymptotic(SEQ1, 100, 0.0) == pytest.approx(r, rel=1e-12)

    def test_g2_radius(self):
        assert radius_for_level(SEQ2, 100, 1.0) == pytest.approx(1 / 200, rel=1e-12)

    def test_ratio_tends_to_one(self):
        for seq, y in ((SEQ1, 0.7), (SEQ2, 1.3), (SEQ3, -0.8)):
            exact = radius_for_level(seq, 10 ** 6, y)
            asym = radius_asymptotic(seq, 10 ** 6, y)
            assert exact / asym == pytest.approx(1.0, rel=1e-6)

    @given(st.floats(1e-8, 20.0))
    def test_inverse_consistency(self, u):
        # g(g^-1(u)) = u within 2 ulps over the working range
        from orbitlab.observables import apply_g

        for spec in (G1, G2, G3):
            if spec.kind == "g2" and u < 1e-3:
                continue
            if spec.kind == "g3" and u >= spec.top:
                continue
            back = apply_g(spec, g_inverse(spec, u))
            assert abs(back - u) <= 2 * math.ulp(max(abs(u), 1.0))


class TestExceedanceBallIdentity:
    @given(
        st.floats(0, 1, exclude_max=True),
        st.integers(1, 10 ** 5),
        st.floats(-2, 4),
    )
    def test_g1(self, x, n, y):
        u = level(SEQ1, n, y)
        r = radius_for_level(SEQ1, n, y)
        spec = SEQ1.spec
        assert (evaluate(spec, x) > u) == (dist(CIRCLE, x, spec.zeta) < r)

    @given(
        st.floats(0, 1, exclude_max=True),
        st.integers(1, 10 ** 5),
        st.floats(0.2, 4),
    )
    def test_g2(self, x, n, y):
        u = level(SEQ2, n, y)
        r = radius_for_level(SEQ2, n, y)
        spec = SEQ2.spec
        assert (evaluate(spec, x) > u) == (dist(CIRCLE, x, spec.zeta) < r)

    @given(
        st.floats(0, 1, exclude_max=True),
        st.integers(1, 10 ** 5),
        st.floats(-4, -0.1),
    )
    def test_g3(self, x, n, y):
        u = level(SEQ3, n, y)
        r = radius_for_level(SEQ3, n, y)
        spec = SEQ3.spec
        assert (evaluate(spec, x) > u) == (dist(CIRCLE, x, spec.zeta) < r)


class TestBlockLength:
    def test_doubling_examples(self):
        assert block_length_for_radius(SEQ1, 0.005, 1.0) == 100
        assert block_length_for_radius(SEQ1, 0.005, 2.5) == 250

    def test_quadratic_density_feeds_in(self):
        q = MapSystem.quadratic(2.0)
        spec = ObservableSpec("g1", 0.0, q.space)
        seq = LevelSequence.for_model(spec, density_model(q))
        assert block_length_for_radius(seq, 0.01, 1.0) == 157

    def test_radius_too_large(self):
        with pytest.raises(DomainError):
            block_length_for_radius(SEQ1, 0.49, 0.5)


class TestLevelSequenceConstruction:
    def test_requires_finite_positive_density(self):
        q = MapSystem.quadratic(2.0)
        spec = ObservableSpec("g1", 1.0, q.space)  # density diverges here
        with pytest.raises(DomainError):
            LevelSequence.for_model(spec, density_model(q))
