import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from relaycap import linalg, rmt
from relaycap.channel import draw_entries
from relaycap.errors import ContractError, DomainError
from relaycap.rmt import AspectRatios, BranchError, MarchenkoPastur

# trapezoid (10^6 points in u = sqrt(x)) of the beta = 1 density up to x = 1
MP1_CDF_AT_1 = 0.6089977810441679
# 200-step bisection of the linear-scaling equation at beta_s = 1, d = 1, s = 1
THETA_GOLDEN = 0.6731742159154208
SHANNON_MP1_RHO10 = 1.8876660600794473


def density_oracle(beta, g):
    """``int g(x) f(x) dx`` by algebraic-weight quadrature (plus the atom)."""
    law = MarchenkoPastur(beta)
    if law.lower == 0.0:
        val, _ = integrate.quad(lambda x: g(x) / (2 * math.pi * law.c), 0.0, law.upper, weight="alg",
                                wvar=(-0.5, 0.5), epsabs=1e-13)
    else:
        val, _ = integrate.quad(lambda x: g(x) / (2 * math.pi * law.c * x), law.lower, law.upper, weight="alg",
                                wvar=(0.5, 0.5), epsabs=1e-13)
    return val + law.atom * g(0.0)


def mp_residual(beta, s, g):
    c = 1 / beta
    return abs(c * s * g * g + (s + 1 - c) * g - 1)


class TestDelta:
    @pytest.mark.parametrize("x0, s", [(1.0, 1.0), (0.0, 2.0)])
    def test_examples(self, x0, s):
        assert rmt.delta_stieltjes(x0, s) == 0.5

    def test_matches_resolvent(self):
        assert rmt.delta_stieltjes(3.0, 0.5 - 1j) == pytest.approx(linalg.resolvent_trace(3.0 * np.eye(5), 0.5 - 1j))

    def test_pole(self):
        with pytest.raises(DomainError):
            rmt.delta_stieltjes(1.0, -1.0)


class TestMpStieltjes:
    def test_closed_form(self):
        assert rmt.mp_stieltjes(1.0, 4.0).real == pytest.approx((math.sqrt(2) - 1) / 2, rel=1e-14)

    @pytest.mark.parametrize("beta", [0.01, 0.5, 1.0, 4.0, 1e4])
    def test_asymptote(self, beta):
        s = 1e6
        assert abs(s * rmt.mp_stieltjes(beta, s) - 1) <= 2e-6

    @pytest.mark.parametrize("beta, s", [(0.5, 0.3), (1.0, 2.0), (4.0, 1.0), (4.0, 0.05)])
    def test_density_integral_oracle(self, beta, s):
        assert rmt.mp_stieltjes(beta, s).real == pytest.approx(density_oracle(beta, lambda x: 1 / (s + x)),
                                                               rel=1e-9)

    def test_sample_oracle(self):
        x = draw_entries(np.random.default_rng(17), (256, 1024))
        mc = linalg.resolvent_trace(linalg.scaled_gram(x, 1 / 1024), 1.0).real
        assert rmt.mp_stieltjes(4.0, 1.0).real == pytest.approx(mc, rel=0.03)

    def test_equation_residual_random_points(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            beta = float(np.exp(rng.uniform(-3, 3)))
            s = complex(rng.uniform(-5, 5), rng.uniform(-5, 5))
            g = rmt.mp_stieltjes(beta, s)
            assert mp_residual(beta, s, g) <= 1e-12 * max(1, abs(s * g * g), abs(g))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.05, 20), st.floats(-10, 10), st.floats(1e-3, 10))
    def test_lower_half_plane_maps_up(self, beta, re, im):
        assert rmt.mp_stieltjes(beta, complex(re, -im)).imag > 0

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.05, 20), st.floats(1e-3, 1e3))
    def test_real_positive_range(self, beta, s):
        g = rmt.mp_stieltjes(beta, s)
        assert g.imag == 0 and 0 < g.real < 1 / s

    def test_negative_axis_is_one_sided_limit(self):
        g0 = rmt.mp_stieltjes(1.0, -1.0)
        g1 = rmt.mp_stieltjes(1.0, complex(-1.0, -1e-9))
        assert abs(g0 - g1) <= 1e-6 and g0.imag > 0

    def test_origin(self):
        assert rmt.mp_stieltjes(4.0, 0.0) == pytest.approx(4 / 3)
        with pytest.raises(DomainError):
            rmt.mp_stieltjes(1.0, 0.0)

    def test_bad_beta(self):
        with pytest.raises(DomainError):
            rmt.mp_stieltjes(0.0, 1.0)

    def test_branch_mutation_is_caught(self, monkeypatch):
        real_select = rmt._select_branch

        def wrong(roots, s):
            good = real_select(roots, s)
            return max(roots, key=lambda r: abs(r - good))

        monkeypatch.setattr(rmt, "_select_branch", wrong)
        assert abs(1e6 * rmt.mp_stieltjes(1.0, 1e6) - 1) > 2e-6


class TestMpDensity:
    @pytest.mark.parametrize("beta", [0.5, 1.0, 4.0])
    def test_mass_and_mean(self, beta):
        assert density_oracle(beta, lambda x: 1.0) == pytest.approx(1.0, abs=1e-8)
        assert density_oracle(beta, lambda x: x) == pytest.approx(1.0, abs=1e-8)
        law = MarchenkoPastur(beta)
        assert law.expect(lambda x: 1.0 + 0 * x) == pytest.approx(1.0, abs=1e-8)
        assert law.expect(lambda x: x) == pytest.approx(1.0, abs=1e-8)

    def test_pointwise(self):
        f, atom = rmt.mp_density(1.0, 1.0)
        assert f == pytest.approx(math.sqrt(3) / (2 * math.pi)) and atom == 0.0

    def test_atom_and_support(self):
        f, atom = rmt.mp_density(0.5, np.array([0.0, 0.01, 6.0]))
        assert atom == 0.5 and np.all(f == 0)

    def test_concentration(self):
        assert rmt.mp_cdf(1e4, 1.03) - rmt.mp_cdf(1e4, 0.97) >= 0.99


class TestMpCdf:
    def test_golden(self):
        assert rmt.mp_cdf(1.0, 1.0) == pytest.approx(MP1_CDF_AT_1, abs=1e-6)
        assert rmt.mp_cdf(1.0, 1.0) == pytest.approx(1 / 3 + math.sqrt(3) / (2 * math.pi), abs=1e-12)

    @pytest.mark.parametrize("beta", [0.3, 1.0, 4.0])
    def test_beyond_edge(self, beta):
        assert rmt.mp_cdf(beta, MarchenkoPastur(beta).upper + 1e-9) == pytest.approx(1.0, abs=1e-10)

    def test_atom(self):
        assert rmt.mp_cdf(0.5, 1e-12) == pytest.approx(0.5)
        assert rmt.mp_cdf(0.5, 0.0) == 0.0

    def test_monotone_vector(self):
        x = np.random.default_rng(2).uniform(0, 7, 500)
        c = rmt.mp_cdf(0.7, x)
        order = np.argsort(x)
        assert np.all(np.diff(c[order]) >= 0) and c.min() >= 0 and c.max() <= 1

    @pytest.mark.parametrize("beta, x", [(0.5, 2.0), (2.0, 0.5), (4.0, 1.7)])
    def test_quadrature_oracle(self, beta, x):
        law = MarchenkoPastur(beta)
        # the weight covers the lower-edge root; the upper factor stays in the integrand
        cont, _ = integrate.quad(lambda t: math.sqrt(law.upper - t) / (2 * math.pi * law.c * t), law.lower,
                                 min(x, law.upper), weight="alg", wvar=(0.5, 0.0), epsabs=1e-13)
        assert rmt.mp_cdf(beta, x) == pytest.approx(law.atom + cont, abs=1e-8)


class TestAspectRatios:
    def test_full(self):
        np.testing.assert_array_equal(AspectRatios((2, 3)).full, [1, 2, 3])

    def test_relay_chain(self):
        assert AspectRatios.relay_chain(4, 3, 0.5).betas == (4.0, 4.0, 4.0, 0.5)

    @pytest.mark.parametrize("betas", [(), (1.0, 0.0), (-1.0,), (math.inf,)])
    def test_rejects(self, betas):
        with pytest.raises(ContractError):
            AspectRatios(betas)


class TestProductStieltjes:
    def test_reduction_closed_form(self):
        assert rmt.product_stieltjes([1.0], 4.0).g.real == pytest.approx((math.sqrt(2) - 1) / 2, abs=1e-14)

    @pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
    @pytest.mark.parametrize("s", [0.01, 0.5, 7.0, 1 - 1j, -2 - 0.01j, -0.5 - 3j])
    def test_reduction_identity(self, beta, s):
        assert abs(rmt.product_stieltjes([beta], s).g - rmt.mp_stieltjes(beta, s)) <= 1e-10

    @pytest.mark.parametrize("betas", [(4, 4, 0.5), (1,) * 17, (0.3, 2.0)])
    def test_asymptote(self, betas):
        sol = rmt.product_stieltjes(betas, 1e6)
        assert abs(1e6 * sol.g - 1) <= 1e-5

    def test_sample_oracle(self):
        n, betas = 128, (4.0, 4.0, 0.5)
        acc = 0.0
        for r in range(6):
            rng = np.random.default_rng(100 + r)
            m, dims = np.eye(n), [n] + [int(b * n) for b in betas]
            for a, b in zip(dims[:-1], dims[1:]):
                m = m @ draw_entries(rng, (a, b)) / math.sqrt(b)
            acc += linalg.resolvent_trace(linalg.scaled_gram(m), 1.0).real / 6
        assert rmt.product_stieltjes(betas, 1.0).g.real == pytest.approx(acc, rel=0.05)

    def test_relay_covariance_oracle(self):
        # normalized signal covariance with n_d = 64, L = 2, beta_r = 2, beta_s = 1
        from relaycap.channel import NetworkConfig, normalized_signal_covariance, sample_channels
        cfg = NetworkConfig(64, 64, 128, 2, 1.0)
        g = np.mean([linalg.resolvent_trace(normalized_signal_covariance(sample_channels(cfg, np.random.default_rng(t))),
                                            1.0).real for t in range(4)])
        assert rmt.product_stieltjes(AspectRatios.relay_chain(2, 2, 1), 1.0).g.real == pytest.approx(g, rel=0.05)

    def test_invariants_real_axis(self):
        grid = np.geomspace(1e-2, 1e2, 30)
        gs = [rmt.product_stieltjes((2.0, 0.5, 3.0), s) for s in grid]
        assert all(sol.residual <= 1e-10 and 0 < sol.g.real < 1 / sol.s.real and sol.g.imag == 0 for sol in gs)
        assert np.all(np.diff([sol.g.real for sol in gs]) < 0)

    def test_complex_branch(self):
        sol = rmt.product_stieltjes((2.0, 2.0), complex(-1.0, -1e-3))
        assert sol.g.imag > 0 and sol.residual <= 1e-10

    def test_limit_convergence(self):
        target = rmt.mp_stieltjes(1.0, 1.0)
        gaps = [abs(rmt.product_stieltjes(AspectRatios.relay_chain(b, 2, 1.0), 1.0).g - target)
                for b in (2, 8, 32, 128)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("s", [0.0, -1.0])
    def test_domain(self, s):
        with pytest.raises(DomainError):
            rmt.product_stieltjes([1.0], s)

    def test_residual_helper(self):
        sol = rmt.product_stieltjes((2.0, 3.0), 0.7)
        assert rmt.product_residual((2.0, 3.0), 0.7, sol.g) <= 1e-12
        assert rmt.product_residual((2.0, 3.0), 0.7, 1 / 0.7) > 0.1


class TestDensityInversion:
    def test_off_atom(self):
        assert rmt.density_from_stieltjes(lambda s: rmt.delta_stieltjes(1.0, s), 2.0, 1e-3) <= 1e-3 / math.pi

    def test_mp_pointwise(self):
        got = rmt.density_from_stieltjes(lambda s: rmt.mp_stieltjes(1.0, s), 1.0, eps=1e-4)
        assert got == pytest.approx(MarchenkoPastur(1.0).pdf(1.0), rel=0.02)

    def test_extrapolation_reduces_bias(self):
        exact = MarchenkoPastur(2.0).pdf(1.5)
        solver = lambda s: rmt.mp_stieltjes(2.0, s)
        plain = rmt.density_from_stieltjes(solver, 1.5, eps=1e-2)
        rich = rmt.density_from_stieltjes(solver, 1.5, eps=1e-2, extrapolate=True)
        assert abs(rich - exact) < abs(plain - exact)

    def test_mp_mean(self):
        x = np.linspace(1e-4, 4.0, 4001)
        f = np.array([rmt.density_from_stieltjes(lambda s: rmt.mp_stieltjes(1.0, s), xi) for xi in x])
        assert integrate.trapezoid(x * f, x) == pytest.approx(1.0, rel=0.02)

    def test_product_normalization(self):
        assert rmt.density_mass(rmt.ProductStieltjes((2.0, 2.0)), 1e-3, 9.0) == pytest.approx(1.0, rel=0.02)

    def test_wrong_branch_detected(self):
        with pytest.raises(BranchError):
            rmt.density_from_stieltjes(lambda s: rmt.mp_stieltjes(1.0, s).conjugate(), 1.0)

    def test_retry_used(self):
        class Flaky:
            calls = 0

            def __call__(self, s):
                return rmt.mp_stieltjes(1.0, s).conjugate()

            def retry(self, s):
                Flaky.calls += 1
                return rmt.mp_stieltjes(1.0, s)

        assert rmt.density_from_stieltjes(Flaky(), 1.0) > 0 and Flaky.calls == 1

    @pytest.mark.parametrize("x, eps", [(0.0, 1e-3), (1.0, 0.0), (1.0, 0.1)])
    def test_domain(self, x, eps):
        with pytest.raises(DomainError):
            rmt.density_from_stieltjes(lambda s: 1 / s, x, eps)

    @pytest.mark.slow
    def test_degrees_of_freedom_collapse(self):
        mass = [rmt.density_mass(rmt.ProductStieltjes(AspectRatios.relay_chain(2.0, L, 1.0)), 0.01, 60.0,
                                 points=200) for L in (1, 4, 16, 64)]
        assert all(b < a for a, b in zip(mass, mass[1:])) and mass[-1] < 0.3


class TestLimitingTransforms:
    def test_unit_snr(self):
        assert rmt.limiting_capacity_stieltjes(2.0, 1.0, 0.3 - 1j) == rmt.mp_stieltjes(2.0, 0.3 - 1j)

    def test_scaling(self):
        assert rmt.limiting_capacity_stieltjes(1.0, 10.0, 10.0) == pytest.approx(rmt.mp_stieltjes(1.0, 1.0) / 10)

    def test_vanishing_regime(self):
        assert rmt.vanishing_regime_stieltjes(4.0) == 0.25

    def test_bad_snr(self):
        with pytest.raises(DomainError):
            rmt.limiting_capacity_stieltjes(1.0, 0.0, 1.0)


class TestThetaRegime:
    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 10.0])
    def test_inverse_s_is_not_a_root(self, s):
        assert rmt.theta_residual(1.0, 0.7, s, 1 / s) == pytest.approx(1 / s, rel=1e-14)

    @pytest.mark.parametrize("beta_s, s", [(1.0, 1.0), (0.5, 2.0), (3.0, 0.2)])
    def test_small_d_limit(self, beta_s, s):
        g = rmt.theta_regime_stieltjes(beta_s, 1e-6, s).g
        assert abs(g - rmt.mp_stieltjes(beta_s, s)) <= 1e-4

    def test_golden(self):
        sol = rmt.theta_regime_stieltjes(1.0, 1.0, 1.0)
        assert sol.g.real == pytest.approx(THETA_GOLDEN, abs=1e-8)
        assert sol.residual <= 1e-10

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.01, 20), st.floats(0.01, 50))
    def test_root_in_range(self, beta_s, d, s):
        sol = rmt.theta_regime_stieltjes(beta_s, d, s)
        assert 0 < sol.g.real < 1 / s and sol.residual <= 1e-10

    @pytest.mark.parametrize("args", [(1.0, 0.0, 1.0), (0.0, 1.0, 1.0), (1.0, 1.0, -1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            rmt.theta_regime_stieltjes(*args)


class TestAsymptoticCapacity:
    def test_golden(self):
        assert rmt.asymptotic_capacity(1.0, 10.0, 0) == pytest.approx(SHANNON_MP1_RHO10, abs=1e-6)

    def test_closed_form(self):
        # known closed form of the MP(1) Shannon transform
        snr = 10.0
        f = (math.sqrt(4 * snr + 1) - 1) ** 2
        ref = 2 * math.log(1 + snr - f / 4) - f / (4 * snr)
        assert rmt.asymptotic_capacity(1.0, snr, 0) == pytest.approx(ref, rel=1e-10)

    def test_prelog(self):
        assert rmt.asymptotic_capacity(1.0, 10.0, 3) == pytest.approx(rmt.asymptotic_capacity(1.0, 10.0, 0) / 4)

    def test_vanishing_snr(self):
        assert rmt.asymptotic_capacity(1.0, 1e-12, 0) <= 1e-11

    def test_bad_snr(self):
        with pytest.raises(DomainError):
            rmt.asymptotic_capacity(1.0, 0.0, 0)
