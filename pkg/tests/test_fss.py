"""FSS parsing, moments and the moment-form identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tribeta.errors import FssParseError, ValidationError
from tribeta.fss import (FssLine, cumulative_moments, direct_spectrum_term,
                         from_lines, load_fss, loads_fss, merge,
                         moment_form_spectrum_term, save_fss)


def random_fss(rng, n_lines=None):
    n = n_lines or rng.integers(1, 40)
    energies = np.sort(rng.uniform(0.0, 60.0, n))
    probs = rng.uniform(0.0, 1.0, n)
    probs *= rng.uniform(0.2, 1.0) / probs.sum()
    return from_lines([FssLine(float(e), float(p))
                       for e, p in zip(energies, probs)])


class TestIO:
    def test_two_line_file(self):
        fss = loads_fss("0.0 0.5\n1.0 0.5\n")
        assert fss.total_probability == pytest.approx(1.0)
        assert len(fss) == 2

    def test_negative_probability_rejected(self):
        with pytest.raises(ValidationError, match="negative probability"):
            loads_fss("0.0 0.5\n1.0 -0.1\n")

    def test_malformed_row_reports_line(self):
        with pytest.raises(FssParseError, match="line 3"):
            loads_fss("# header\n0.0 0.5\n1.0 oops\n")

    def test_missing_column(self):
        with pytest.raises(FssParseError):
            loads_fss("1.0\n")

    def test_unsorted_input_sorted_with_flag(self):
        fss = loads_fss("2.0 0.3\n1.0 0.2\n")
        assert fss.provenance.get("sorted_on_load") is True
        assert list(fss.energies) == [1.0, 2.0]

    def test_comments_and_quantum_labels(self):
        fss = loads_fss("# c\n1.0 0.25 0 12 3\n2.0 0.25 1 - -\n")
        assert fss.lines[0].rotation == 12
        assert fss.lines[0].vibration == 3
        assert fss.lines[1].rotation is None

    def test_round_trip_bit_identical(self, tmp_path, rng):
        fss = random_fss(np.random.default_rng(7), 25)
        path = tmp_path / "t.fss"
        save_fss(fss, str(path))
        back = load_fss(str(path))
        assert np.array_equal(back.energies, fss.energies)
        assert np.array_equal(back.probabilities, fss.probabilities)
        # file ends with a newline
        assert path.read_text().endswith("\n")

    def test_total_probability_bound(self):
        with pytest.raises(ValidationError):
            from_lines([FssLine(0.0, 0.9), FssLine(1.0, 0.9)])


class TestCumulativeMoments:
    def test_single_line_open(self):
        fss = from_lines([FssLine(2.0, 0.6)])
        m = cumulative_moments(fss, 5.0)
        assert m.p_open == pytest.approx(0.6)
        assert m.mean_e == pytest.approx(2.0)
        assert m.mean_e2 == pytest.approx(4.0)
        assert m.mean_e3 == pytest.approx(8.0)

    def test_single_line_closed(self):
        fss = from_lines([FssLine(2.0, 0.6)])
        m = cumulative_moments(fss, 1.0)
        assert not m.open
        assert m.p_open == 0.0
        assert m.mean_e is None and m.mean_e2 is None and m.mean_e3 is None

    def test_threshold_is_strict(self):
        fss = from_lines([FssLine(2.0, 0.6)])
        assert not cumulative_moments(fss, 2.0).open
        assert cumulative_moments(fss, 2.0 + 1e-12).open

    def test_p_open_nondecreasing(self):
        fss = random_fss(np.random.default_rng(3))
        eps = np.linspace(-5.0, 80.0, 300)
        p = [cumulative_moments(fss, e).p_open for e in eps]
        assert np.all(np.diff(p) >= 0.0)

    def test_variance_nonnegative(self):
        fss = random_fss(np.random.default_rng(11))
        for e in np.linspace(1.0, 80.0, 60):
            m = cumulative_moments(fss, e)
            if m.open:
                assert m.mean_e2 >= m.mean_e**2 - 1e-12

    def test_merge_commutes_with_moments(self):
        rng = np.random.default_rng(5)
        a, b = random_fss(rng, 10), random_fss(rng, 15)
        # rescale so the merged total stays within the normalization bound
        a = from_lines([FssLine(l.energy_ev, 0.4 * l.probability) for l in a.lines])
        b = from_lines([FssLine(l.energy_ev, 0.4 * l.probability) for l in b.lines])
        both = merge(a, b)
        for eps in (5.0, 20.0, 61.0):
            ma, mb = cumulative_moments(a, eps), cumulative_moments(b, eps)
            m = cumulative_moments(both, eps)
            assert m.p_open == pytest.approx(ma.p_open + mb.p_open, abs=1e-15)
            if m.open:
                num = (ma.p_open * (ma.mean_e or 0.0)
                       + mb.p_open * (mb.mean_e or 0.0))
                assert m.mean_e == pytest.approx(num / m.p_open, rel=1e-12)


class TestMomentFormIdentity:
    def test_single_line_binomial(self):
        fss = from_lines([FssLine(3.0, 0.7)])
        eps = 10.0
        assert moment_form_spectrum_term(fss, eps) == pytest.approx(
            0.7 * (eps - 3.0) ** 3, rel=1e-12)

    def test_closed_returns_zero(self):
        fss = from_lines([FssLine(3.0, 0.7)])
        assert moment_form_spectrum_term(fss, 1.0, 2.5) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1),
           st.floats(min_value=-5.0, max_value=5.0))
    def test_identity_random(self, seed, m2nu):
        rng = np.random.default_rng(seed)
        fss = random_fss(rng)
        eps = float(rng.uniform(0.5, 120.0))
        a = moment_form_spectrum_term(fss, eps, m2nu)
        b = direct_spectrum_term(fss, eps, m2nu)
        scale = fss.total_probability * (abs(eps) ** 3
                                         + 1.5 * abs(m2nu) * abs(eps)) + 1e-30
        assert abs(a - b) <= 1e-10 * max(abs(a), abs(b), 1e-6 * scale)

    def test_m2_zero_monotone_in_eps(self):
        fss = random_fss(np.random.default_rng(17))
        eps = np.linspace(0.0, 100.0, 500)
        vals = [moment_form_spectrum_term(fss, e, 0.0) for e in eps]
        assert np.all(np.diff(vals) >= -1e-9 * max(vals))
