"""Chi-square fitting: exact recovery, oracle values, covariance contracts."""

import mpmath as mp
import numpy as np
import pytest

from tribeta.errors import ValidationError
from tribeta.fit import FitConfig, chi_square, minimize
from tribeta.fss import from_lines
from tribeta.kernel import SpectrumParams
from tribeta.response import (PseudoDataset, ResponseModel, expected_counts,
                              generate_pseudodata)

mp.mp.dps = 30

W0 = 18575.0


@pytest.fixture(scope="module")
def setup(study_fss):
    response = ResponseModel(sigma_ev=2.5)
    truth = SpectrumParams(amplitude=1.0, endpoint_ev=W0, m2nu_ev2=0.0,
                           background=400.0)
    centers = np.arange(W0 - 200.0, W0 + 20.0 + 1e-9, 2.0)
    rate = expected_counts(truth.with_values(background=0.0), study_fss,
                           response, np.array([W0 - 200.0]), 1.0)[0]
    exposure = 1e8 / rate
    mu = expected_counts(truth, study_fss, response, centers, exposure)
    zero_noise = PseudoDataset(bin_centers=centers, counts=mu,
                               exposure=exposure, seed=-1)
    return study_fss, response, truth, centers, exposure, zero_noise


def make_config(study_fss, response, initial, window=(W0 - 200.0, W0 + 20.0)):
    return FitConfig(window_ev=window, initial=initial, response=response,
                     fss=study_fss)


class TestChiSquare:
    def test_zero_at_truth(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        cfg = make_config(fss, response, truth)
        assert chi_square(truth, zero_noise, cfg) == pytest.approx(0.0, abs=1e-12)

    def test_positive_after_perturbation(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        cfg = make_config(fss, response, truth)
        bumped = truth.with_values(amplitude=truth.amplitude * 1.01)
        assert chi_square(bumped, zero_noise, cfg) > 0.0

    def test_30_digit_oracle(self, study_fss):
        # small reference dataset, chi^2 recomputed in 30-digit arithmetic
        response = ResponseModel(sigma_ev=2.0)
        truth = SpectrumParams(amplitude=1e-11, endpoint_ev=W0, background=6.0)
        centers = np.arange(W0 - 24.0, W0 + 1e-9, 2.0)
        fss = from_lines(list(study_fss.lines)[:5])
        dataset = generate_pseudodata(truth, fss, response, centers, 1.0,
                                      seed=20260809)
        cfg = FitConfig(window_ev=(centers[0], centers[-1]), initial=truth,
                        response=response, fss=fss)
        ours = chi_square(truth, dataset, cfg)

        me = mp.mpf("510998.95000")
        alpha = mp.mpf("7.2973525693e-3")
        offsets = response.offsets()
        weights = response.weights()
        chi2 = mp.mpf(0)
        for c, n in zip(dataset.bin_centers, dataset.counts):
            mu = mp.mpf(0)
            for off, w in zip(offsets, weights):
                e = mp.mpf(c) - mp.mpf(off)
                pc = mp.sqrt(e * (e + 2 * me))
                eta = 2 * alpha * (e + me) / pc
                x = 2 * mp.pi * eta
                fermi = x / (1 - mp.e**(-x))
                s = mp.mpf(0)
                for line in fss.lines:
                    en = mp.mpf(W0) - e - mp.mpf(line.energy_ev)
                    if en > 0:
                        s += mp.mpf(line.probability) * en**3
                mu += mp.mpf(w) * (mp.mpf("1e-11") / 3) * fermi * (e + me) * pc * s
            mu += 6
            chi2 += (int(n) - mu) ** 2 / mp.mpf(max(float(mu), 1.0))
        assert ours == pytest.approx(float(chi2), rel=1e-9)

    def test_empty_window_rejected(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        cfg = make_config(fss, response, truth, window=(W0 + 30.0, W0 + 40.0))
        with pytest.raises(ValidationError):
            chi_square(truth, zero_noise, cfg)


class TestMinimize:
    def test_exact_recovery_from_perturbed_guess(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        guess = truth.with_values(amplitude=1.02, endpoint_ev=W0 - 0.1,
                                  m2nu_ev2=0.5, background=440.0)
        result = minimize(zero_noise, make_config(fss, response, guess))
        assert result.converged
        assert abs(result.params.amplitude - 1.0) < 1e-6
        assert abs(result.params.endpoint_ev - W0) < 1e-4
        assert abs(result.params.m2nu_ev2) < 1e-3
        assert result.chi2 < 1e-8

    def test_chi2_at_minimum_below_truth(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        guess = truth.with_values(amplitude=1.01, m2nu_ev2=0.2)
        cfg = make_config(fss, response, guess)
        result = minimize(zero_noise, cfg)
        assert result.chi2 <= chi_square(truth, zero_noise, cfg) + 1e-9

    def test_covariance_contracts(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        rng_ds = generate_pseudodata(truth, fss, response, centers, exposure,
                                     seed=5)
        guess = truth.with_values(amplitude=1.01, m2nu_ev2=0.2)
        result = minimize(rng_ds, make_config(fss, response, guess))
        assert result.converged
        assert result.covariance is not None
        assert result.covariance.shape == (4, 4)
        assert np.all(np.diag(result.covariance) > 0.0)
        assert result.dof == len(centers) - 4
        assert set(result.errors) == {"amplitude", "endpoint", "m2nu",
                                      "background"}

    def test_free_mask_respected(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        guess = truth.with_values(amplitude=1.05)
        cfg = FitConfig(window_ev=(W0 - 200.0, W0 + 20.0), initial=guess,
                        response=response, fss=fss, free=("amplitude",))
        result = minimize(zero_noise, cfg)
        assert result.params.amplitude == pytest.approx(1.0, rel=1e-6)
        assert result.params.endpoint_ev == W0
        assert result.params.m2nu_ev2 == 0.0
        assert result.dof == len(centers) - 1

    def test_reparametrization_scaling(self, setup):
        # scaling counts and exposure by 10 scales A by 10, leaves W0, m2nu
        fss, response, truth, centers, exposure, zero_noise = setup
        scaled = PseudoDataset(bin_centers=centers,
                               counts=zero_noise.counts * 10.0,
                               exposure=exposure, seed=-1)
        guess = truth.with_values(amplitude=9.0, endpoint_ev=W0 - 0.05,
                                  m2nu_ev2=0.3, background=4400.0)
        result = minimize(scaled, make_config(fss, response, guess))
        assert result.converged
        assert result.params.amplitude == pytest.approx(10.0, rel=1e-5)
        assert abs(result.params.endpoint_ev - W0) < 1e-4
        assert abs(result.params.m2nu_ev2) < 1e-3

    def test_window_needs_enough_bins(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        cfg = make_config(fss, response, truth, window=(W0 - 4.0, W0 + 1.0))
        with pytest.raises(ValidationError):
            minimize(zero_noise, cfg)

    def test_config_validation(self, setup):
        fss, response, truth, centers, exposure, zero_noise = setup
        with pytest.raises(ValidationError):
            FitConfig(window_ev=(W0, W0 - 10.0), initial=truth,
                      response=response, fss=fss)
        with pytest.raises(ValidationError):
            FitConfig(window_ev=(W0 - 10.0, W0 + 60.0), initial=truth,
                      response=response, fss=fss)
        with pytest.raises(ValidationError):
            FitConfig(window_ev=(W0 - 10.0, W0), initial=truth,
                      response=response, fss=fss, free=())
