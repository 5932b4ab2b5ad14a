# -*- coding: utf-8 -*-
# flake8: noqa

from .example.manage import setup

setup()

import numpy as np
from numpy.testing import assert_allclose
from scipy import special as scipy_special
from scipy import stats

from copula import special

PROBABILITIES = np.array([1e-10, 1e-6, 0.01, 0.3, 0.5, 0.8, 0.999999, 1.0 - 1e-10])


class SpecialTestCase:
    def test_normal_round_trip(self):
        assert_allclose(special.normal_cdf(special.normal_ppf(PROBABILITIES)), PROBABILITIES, rtol=0, atol=1e-12)

    def test_normal_center(self):
        assert special.normal_cdf(0.0) == 0.5
        assert_allclose(special.normal_pdf(0.0), 1.0 / np.sqrt(2.0 * np.pi), rtol=1e-15)

    def test_normal_ppf_edges(self):
        assert special.normal_ppf(0.0) == -np.inf
        assert special.normal_ppf(1.0) == np.inf

    def test_t4_round_trip(self):
        assert_allclose(special.t4_cdf(special.t4_ppf(PROBABILITIES)), PROBABILITIES, rtol=0, atol=1e-12)

    def test_t4_cdf_matches_scipy(self):
        x = np.linspace(-50.0, 50.0, 201)
        assert_allclose(special.t4_cdf(x), scipy_special.stdtr(4, x), rtol=0, atol=1e-12)
        assert special.t4_cdf(0.0) == 0.5

    def test_t4_ppf_matches_scipy(self):
        p = PROBABILITIES[1:-1]
        assert_allclose(special.t4_ppf(p), scipy_special.stdtrit(4, p), rtol=1e-9, atol=1e-12)

    def test_t4_ppf_edges(self):
        assert special.t4_ppf(0.0) == -np.inf
        assert special.t4_ppf(1.0) == np.inf
        assert special.t4_cdf(np.inf) == 1.0
        assert special.t4_cdf(-np.inf) == 0.0

    def test_t4_pdf_matches_scipy(self):
        x = np.linspace(-10.0, 10.0, 41)
        assert_allclose(special.t4_pdf(x), stats.t.pdf(x, 4), rtol=1e-12)

    def test_student_dispatch(self):
        x = np.array([-2.0, 0.5, 3.0])
        assert_allclose(special.student_cdf(x, 5.0), scipy_special.stdtr(5.0, x), rtol=1e-15)
        assert_allclose(special.student_cdf(x, 4), special.t4_cdf(x), rtol=0)
