"""Convolution quadrature and seeded Poisson pseudo-data."""

import math

import numpy as np
import pytest
from scipy.special import erf

from tribeta.errors import ConfigurationError, ValidationError
from tribeta.kernel import SpectrumParams
from tribeta.response import (PseudoDataset, ResponseModel, convolve,
                              expected_counts, generate_pseudodata,
                              load_dataset, poisson_sample, save_dataset)

W0 = 18575.0


class TestResponseModel:
    def test_kernel_unit_normalization(self):
        r = ResponseModel(sigma_ev=2.5)
        assert r.weights().sum() == pytest.approx(1.0, abs=1e-15)
        assert r.raw_norm_defect() < 1e-8

    def test_too_coarse_rejected(self):
        with pytest.raises(ConfigurationError):
            ResponseModel(sigma_ev=2.5, step_fraction=0.5)

    def test_too_narrow_rejected(self):
        with pytest.raises(ConfigurationError):
            ResponseModel(sigma_ev=2.5, half_width_sigmas=3.0)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ConfigurationError):
            ResponseModel(sigma_ev=0.0)


class TestConvolve:
    def test_constant_passes_through(self):
        smeared = convolve(lambda e: np.full_like(np.asarray(e, float), 4.25),
                           ResponseModel(sigma_ev=3.0))
        out = smeared(np.array([10.0, 50.0, 91.7]))
        assert np.allclose(out, 4.25, rtol=1e-14)

    def test_delta_limit_identity(self):
        f = lambda e: np.sin(np.asarray(e) / 37.0) + 2.0
        smeared = convolve(f, ResponseModel(sigma_ev=1e-3))
        x = np.array([12.0, 40.0, 333.0])
        assert np.allclose(smeared(x), f(x), atol=1e-6)

    def test_step_matches_erf_profile(self):
        # fine quadrature resolves the jump to the requested accuracy
        sigma, edge = 2.0, 100.0
        step_fn = lambda e: np.where(np.asarray(e) > edge, 1.0, 0.0)
        response = ResponseModel(sigma_ev=sigma, step_fraction=5e-6)
        smeared = convolve(step_fn, response)
        for x in (edge - 2.7, edge, edge + 1.3, edge + 5.1):
            exact = 0.5 * (1.0 + erf((x - edge) / (sigma * math.sqrt(2.0))))
            assert smeared(x) == pytest.approx(exact, abs=1e-6)

    def test_preserves_integral(self):
        # compactly supported bump keeps its area under smearing
        bump = lambda e: np.exp(-0.5 * ((np.asarray(e) - 50.0) / 3.0) ** 2)
        smeared = convolve(bump, ResponseModel(sigma_ev=2.0))
        x = np.linspace(0.0, 100.0, 4001)
        h = x[1] - x[0]
        raw = np.trapezoid(bump(x), dx=h)
        conv = np.trapezoid(smeared(x), dx=h)
        assert conv == pytest.approx(raw, rel=1e-8)

    def test_no_negative_output(self):
        f = lambda e: np.where(np.asarray(e) > 10.0, 1.0, 0.0)
        smeared = convolve(f, ResponseModel(sigma_ev=1.0))
        assert np.all(smeared(np.linspace(0.0, 20.0, 100)) >= 0.0)

    def test_translation_equivariance(self):
        f = lambda e: np.exp(-0.5 * ((np.asarray(e) - 40.0) / 5.0) ** 2)
        g = lambda e: np.exp(-0.5 * ((np.asarray(e) - 47.0) / 5.0) ** 2)
        r = ResponseModel(sigma_ev=1.5)
        assert convolve(f, r)(40.0) == pytest.approx(convolve(g, r)(47.0),
                                                     rel=1e-12)

    def test_linearity(self):
        f = lambda e: np.sin(np.asarray(e) / 11.0)
        g = lambda e: np.cos(np.asarray(e) / 7.0)
        combo = lambda e: 2.5 * f(e) - 0.75 * g(e)
        r = ResponseModel(sigma_ev=2.0)
        x = np.array([3.0, 25.0, 60.0])
        expected = 2.5 * convolve(f, r)(x) - 0.75 * convolve(g, r)(x)
        assert np.allclose(convolve(combo, r)(x), expected, rtol=1e-12)


class TestPoissonSampler:
    def test_deterministic_given_seed(self, study_fss):
        p = SpectrumParams(amplitude=1e-10, endpoint_ev=W0, background=5.0)
        r = ResponseModel(sigma_ev=2.5)
        bins = np.arange(W0 - 60.0, W0 + 10.0, 2.0)
        a = generate_pseudodata(p, study_fss, r, bins, 1.0, seed=42)
        b = generate_pseudodata(p, study_fss, r, bins, 1.0, seed=42)
        c = generate_pseudodata(p, study_fss, r, bins, 1.0, seed=43)
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)

    def test_zero_exposure_background_only(self, study_fss):
        p = SpectrumParams(amplitude=1.0, endpoint_ev=W0, background=7.0)
        r = ResponseModel(sigma_ev=2.5)
        bins = np.arange(W0 - 20.0, W0 + 10.0, 2.0)
        ds = generate_pseudodata(p, study_fss, r, bins, 0.0, seed=1)
        assert abs(ds.counts.mean() - 7.0) < 3.0 * math.sqrt(7.0 / len(bins)) + 1.0

    def test_law_of_large_numbers_both_branches(self):
        rng = np.random.Generator(np.random.PCG64(999))
        for mu in (0.8, 25.0, 300.0, 4.1e6):  # inversion and PTRS paths
            n = 10000 if mu < 1e5 else 2000
            draws = poisson_sample(rng, np.full(n, mu))
            se = math.sqrt(mu / n)
            assert abs(draws.mean() - mu) < 4.0 * se
            assert abs(draws.var() / mu - 1.0) < 0.15

    def test_bins_outside_window_rejected(self, study_fss):
        p = SpectrumParams(amplitude=1.0, endpoint_ev=W0)
        r = ResponseModel(sigma_ev=2.5)
        with pytest.raises(ValidationError):
            generate_pseudodata(p, study_fss, r, np.array([W0 - 2000.0]), 1.0, 1)
        with pytest.raises(ValidationError):
            generate_pseudodata(p, study_fss, r, np.array([W0 + 100.0]), 1.0, 1)

    def test_counts_match_expectation_scale(self, study_fss):
        p = SpectrumParams(amplitude=1.0, endpoint_ev=W0, background=0.0)
        r = ResponseModel(sigma_ev=2.5)
        bins = np.array([W0 - 100.0])
        mu = expected_counts(p, study_fss, r, bins, 1.0)
        exposure = 1e4 / mu[0]
        reps = [generate_pseudodata(p, study_fss, r, bins, exposure, seed=s).counts[0]
                for s in range(200)]
        assert np.mean(reps) == pytest.approx(1e4, abs=4.0 * 100.0 / math.sqrt(200))


class TestDatasetIO:
    def test_round_trip(self, tmp_path, study_fss):
        p = SpectrumParams(amplitude=1e-12, endpoint_ev=W0, background=3.0)
        r = ResponseModel(sigma_ev=2.5)
        bins = np.arange(W0 - 30.0, W0 + 6.0, 3.0)
        ds = generate_pseudodata(p, study_fss, r, bins, 2.0, seed=7)
        path = tmp_path / "data.csv"
        save_dataset(ds, str(path))
        back = load_dataset(str(path))
        assert np.array_equal(back.counts, ds.counts)
        assert np.allclose(back.bin_centers, ds.bin_centers)
        assert back.seed == 7
        assert back.exposure == 2.0

    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError):
            PseudoDataset(bin_centers=np.array([1.0]),
                          counts=np.array([-1]), exposure=1.0, seed=0)
