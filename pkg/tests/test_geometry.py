import itertools
import math
import random

import numpy as np
import pytest

from seqdetect.errors import CapacityError, ConfigError, DomainError
from seqdetect.geometry import (
    InfoConstants,
    assignment_kl,
    asymptotic_approximation,
    info_constants,
    kl_to_region,
    lower_bound,
    phi,
)
from seqdetect.models import (
    Family,
    JointParameter,
    ParameterSpace,
    Region,
    StreamModel,
    kl,
)

GAUSS = StreamModel(Family.GAUSSIAN, ParameterSpace.gaussian_indifference(0.1))
BERN = StreamModel(Family.BERNOULLI, ParameterSpace(0.2, 0.4, 0.6, 0.8))
ANCHOR = JointParameter((0.5, -0.5))


def brute_assignment_kl(model, theta, b_set, points=20001):
    """Assignment divergence by direct minimization on a dense grid.

    Independent of the package implementation: clips unbounded regions to
    a wide finite window (minimizers always land inside it here).
    """
    k = theta.k
    a_set = theta.signal_set(model.space)
    best = 0.0
    for region, members in (
        (Region.NOISE, [i for i in range(k) if i not in b_set]),
        (Region.SIGNAL, sorted(b_set)),
    ):
        if not members:
            continue
        lo, hi = model.space.region_bounds(region)
        lo = max(lo, -4.0)
        hi = min(hi, 4.0)
        grid = np.linspace(lo, hi, points)
        totals = np.zeros(points)
        for i in members:
            totals += np.array([kl(model, theta.thetas[i], u) for u in grid])
        best += float(totals.min())
    del a_set
    return best


def random_coupled(model, rng, k):
    sp = model.space
    lo0 = sp.theta0_lo if math.isfinite(sp.theta0_lo) else sp.theta0_hi - 2.0
    hi1 = sp.theta1_hi if math.isfinite(sp.theta1_hi) else sp.theta1_lo + 2.0
    signal = {i for i in range(k) if rng.random() < 0.5}
    t1 = rng.uniform(sp.theta1_lo, hi1) if signal else None
    t0 = rng.uniform(lo0, sp.theta0_hi) if len(signal) < k else None
    return JointParameter.coupled(k, signal, t1, t0)


class TestPhi:
    def test_symmetric_point(self):
        expect = 0.3 * math.log(0.3 / 0.7) + 0.7 * math.log(0.7 / 0.3)
        assert phi(0.3, 0.3) == pytest.approx(expect, abs=1e-15)
        assert phi(0.3, 0.3) == pytest.approx(0.3390, abs=2e-4)

    def test_domain_errors(self):
        for x, y in ((0.0, 0.3), (0.3, 0.0), (1.0, 0.3), (0.6, 0.4), (0.7, 0.5)):
            with pytest.raises(DomainError):
                phi(x, y)
        assert phi(0.6, 0.39) > 0.0

    def test_small_x_limit(self):
        # phi(x, y) -> -log y as x -> 0.
        assert phi(1e-9, 0.2) == pytest.approx(-math.log(0.2), abs=1e-6)

    def test_strictly_decreasing_in_both_arguments(self):
        assert phi(0.1, 0.2) > phi(0.1, 0.3)
        pts = [0.05 + 0.05 * i for i in range(9)]
        h = 1e-4
        for x, y in itertools.product(pts, pts):
            if x + y >= 1.0 - 2 * h:
                continue
            v = phi(x, y)
            assert phi(x + h, y) < v
            assert phi(x, y + h) < v


class TestKLToRegion:
    def test_gaussian_anchor_values(self):
        assert kl_to_region(GAUSS, -0.5, Region.SIGNAL) == pytest.approx(0.18, abs=1e-12)
        assert kl_to_region(GAUSS, 0.5, Region.SIGNAL) == 0.0
        assert kl_to_region(GAUSS, 0.5, Region.NOISE) == pytest.approx(0.18, abs=1e-12)

    def test_bernoulli_projects_to_nearest_edge(self):
        model = StreamModel(Family.BERNOULLI, ParameterSpace(0.2, 0.4, 0.5, 0.8))
        assert kl_to_region(model, 0.5, Region.NOISE) == pytest.approx(
            kl(model, 0.5, 0.4), abs=1e-9
        )
        assert kl_to_region(BERN, 0.7, Region.NOISE) == pytest.approx(
            kl(BERN, 0.7, 0.4), abs=1e-9
        )

    def test_grid_agreement(self):
        rng = random.Random(5)
        for model in (GAUSS, BERN):
            sp = model.space
            lo0 = sp.theta0_lo if math.isfinite(sp.theta0_lo) else -2.6
            hi1 = sp.theta1_hi if math.isfinite(sp.theta1_hi) else 2.6
            for _ in range(40):
                theta = rng.uniform(lo0, sp.theta0_hi) if rng.random() < 0.5 else rng.uniform(
                    sp.theta1_lo, hi1
                )
                for region in (Region.NOISE, Region.SIGNAL):
                    lo, hi = sp.region_bounds(region)
                    grid = np.linspace(max(lo, -4.0), min(hi, 4.0), 20001)
                    brute = min(kl(model, theta, u) for u in grid)
                    assert kl_to_region(model, theta, region) == pytest.approx(
                        brute, abs=1e-6
                    )

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            kl_to_region(GAUSS, 0.5, Region.FULL)
        with pytest.raises(DomainError):
            kl_to_region(GAUSS, 0.05, Region.SIGNAL)


class TestAssignmentKL:
    def test_anchor_values(self):
        assert assignment_kl(GAUSS, ANCHOR, {0, 1}) == pytest.approx(0.26, abs=1e-12)
        assert assignment_kl(GAUSS, ANCHOR, {1}) == pytest.approx(0.36, abs=1e-12)
        assert assignment_kl(GAUSS, ANCHOR, {0}) == 0.0

    def test_requires_coupled_parameter(self):
        with pytest.raises(ConfigError):
            assignment_kl(GAUSS, JointParameter((0.5, 0.7)), {0})

    def test_rejects_bad_subset(self):
        with pytest.raises(DomainError):
            assignment_kl(GAUSS, ANCHOR, {0, 2})

    def test_matches_brute_grid(self):
        rng = random.Random(17)
        for model in (GAUSS, BERN):
            for _ in range(50):
                k = rng.randint(1, 3)
                theta = random_coupled(model, rng, k)
                b = {i for i in range(k) if rng.random() < 0.5}
                got = assignment_kl(model, theta, b)
                assert got == pytest.approx(
                    brute_assignment_kl(model, theta, b), abs=1e-6
                )

    def test_pooling_inequality(self):
        # Misclassifying everything as signal costs at least moving one
        # noise stream across the gap.
        rng = random.Random(19)
        for _ in range(30):
            theta = JointParameter.coupled(
                2, {0}, rng.uniform(0.1, 2.0), rng.uniform(-2.0, -0.1)
            )
            lhs = assignment_kl(GAUSS, theta, {0, 1})
            rhs = kl_to_region(GAUSS, theta.thetas[1], Region.SIGNAL)
            assert lhs >= rhs - 1e-12


class TestInfoConstants:
    def test_anchor_quadruple(self):
        c = info_constants(GAUSS, ANCHOR)
        assert c.i0 == pytest.approx(0.26, abs=1e-12)
        assert c.i1 == pytest.approx(0.26, abs=1e-12)
        assert c.i0_tilde == pytest.approx(0.18, abs=1e-12)
        assert c.i1_tilde == pytest.approx(0.18, abs=1e-12)

    def test_all_noise_degenerates(self):
        theta = JointParameter.coupled(2, set(), None, -0.5)
        c = info_constants(GAUSS, theta)
        assert c.i1 == math.inf and c.i1_tilde == math.inf
        assert c.i0 == pytest.approx(0.18, abs=1e-12)
        assert c.i0 == pytest.approx(c.i0_tilde, abs=1e-15)

    def test_all_signal_degenerates(self):
        theta = JointParameter.coupled(2, {0, 1}, 0.5, None)
        c = info_constants(GAUSS, theta)
        assert c.i0 == math.inf and c.i0_tilde == math.inf
        assert c.i1 == pytest.approx(0.18, abs=1e-12)

    def test_single_stream(self):
        c = info_constants(GAUSS, JointParameter.coupled(1, {0}, 0.5, None))
        assert c.i0 == math.inf
        assert c.i1 == pytest.approx(0.18, abs=1e-12)

    def test_capacity_limit(self):
        theta = JointParameter.coupled(17, {0}, 0.5, -0.5)
        with pytest.raises(CapacityError):
            info_constants(GAUSS, theta)

    def test_requires_coupled(self):
        with pytest.raises(ConfigError):
            info_constants(GAUSS, JointParameter((0.5, 0.7)))

    def test_pooled_at_least_per_stream(self):
        rng = random.Random(37)
        for model in (GAUSS, BERN):
            for _ in range(60):
                theta = random_coupled(model, rng, rng.randint(1, 4))
                c = info_constants(model, theta)
                assert c.i0 >= c.i0_tilde - 1e-9
                assert c.i1 >= c.i1_tilde - 1e-9

    def test_gaussian_pooling_strictness(self):
        # Pooling helps strictly once the signal value clears the gap edge,
        # and collapses to the per-stream constant exactly at the edge.
        strict = info_constants(GAUSS, JointParameter.coupled(2, {0}, 0.5, -0.5))
        assert strict.i0 > strict.i0_tilde + 1e-3
        edge = info_constants(GAUSS, JointParameter.coupled(2, {0}, 0.1, -0.5))
        assert edge.i0 == pytest.approx(edge.i0_tilde, abs=1e-12)

    def test_mixed_family_agreement_with_definition(self):
        # i0 is the cheapest assignment adding a false signal, i1 the
        # cheapest dropping a true one; check directly over all subsets.
        rng = random.Random(41)
        for model in (GAUSS, BERN):
            theta = random_coupled(model, rng, 3)
            a_set = theta.signal_set(model.space)
            cand0, cand1 = [], []
            for r in range(4):
                for b in map(set, itertools.combinations(range(3), r)):
                    if b - a_set:
                        cand0.append(assignment_kl(model, theta, b))
                    if a_set - b:
                        cand1.append(assignment_kl(model, theta, b))
            c = info_constants(model, theta)
            assert c.i0 == pytest.approx(min(cand0) if cand0 else math.inf, abs=1e-12)
            assert c.i1 == pytest.approx(min(cand1) if cand1 else math.inf, abs=1e-12)

    def test_invariant_enforced_on_construction(self):
        with pytest.raises(DomainError):
            InfoConstants(0.1, 0.26, 0.18, 0.18)
        with pytest.raises(DomainError):
            InfoConstants(0.0, 0.26, 0.18, 0.18)
        with pytest.raises(DomainError):
            InfoConstants(math.nan, 0.26, 0.18, 0.18)


class TestLowerBound:
    def test_composition(self):
        c = InfoConstants(0.26, 0.26, 0.18, 0.18)
        expect = max(phi(0.02, 0.01) / 0.26, phi(0.02, 0.01) / 0.26)
        assert lower_bound(c, 0.01, 0.01) == pytest.approx(expect, abs=1e-15)
        assert lower_bound(c, 0.1, 0.1) == pytest.approx(5.2412990538023605, abs=1e-12)

    def test_asymmetric_rates(self):
        c = InfoConstants(0.3, 0.2, 0.18, 0.18)
        expect = max(phi(0.15, 0.05) / 0.3, phi(0.15, 0.1) / 0.2)
        assert lower_bound(c, 0.1, 0.05) == pytest.approx(expect, abs=1e-15)

    def test_one_sided_instance(self):
        c = InfoConstants(0.26, math.inf, 0.18, math.inf)
        assert lower_bound(c, 0.1, 0.2) == pytest.approx(phi(0.3, 0.2) / 0.26, abs=1e-15)

    def test_domain_errors(self):
        c = InfoConstants(0.26, 0.26, 0.18, 0.18)
        for a, b in ((0.3, 0.2), (0.0, 0.1), (0.1, 1.0), (0.25, 0.25)):
            with pytest.raises(DomainError):
                lower_bound(c, a, b)
        assert lower_bound(c, 0.24, 0.25) > 0.0


class TestAsymptoticApproximation:
    def test_symmetric_values(self):
        c = InfoConstants(0.26, 0.26, 0.18, 0.18)
        a = math.exp(-10.0)
        assert asymptotic_approximation(c, a, a) == pytest.approx(10.0 / 0.26, rel=1e-12)
        assert asymptotic_approximation(c, a, a) == pytest.approx(38.46153846, abs=1e-6)
        c2 = InfoConstants(0.18, 0.18, 0.18, 0.18)
        assert asymptotic_approximation(c2, a, a) == pytest.approx(10.0 / 0.18, rel=1e-12)
        assert asymptotic_approximation(c2, a, a) == pytest.approx(55.55555556, abs=1e-6)

    def test_one_sided(self):
        c = InfoConstants(0.26, math.inf, 0.18, math.inf)
        assert asymptotic_approximation(c, 0.5, math.exp(-3.0)) == pytest.approx(
            3.0 / 0.26, rel=1e-12
        )

    def test_binding_side(self):
        c = InfoConstants(0.5, 0.1, 0.4, 0.1)
        a, b = math.exp(-2.0), math.exp(-8.0)
        assert asymptotic_approximation(c, a, b) == pytest.approx(
            max(8.0 / 0.5, 2.0 / 0.1), rel=1e-12
        )

    def test_domain_errors(self):
        c = InfoConstants(0.26, 0.26, 0.18, 0.18)
        for a, b in ((0.0, 0.1), (1.0, 0.1), (0.1, -0.2)):
            with pytest.raises(DomainError):
                asymptotic_approximation(c, a, b)
