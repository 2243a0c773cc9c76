import numpy as np
import pytest

from ckm import Distribution, FrequencySpec, sample_frequencies


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gauss_freq():
    def make(m, n, sigma2=1.0, seed=0):
        return sample_frequencies(FrequencySpec(Distribution.GAUSSIAN, sigma2, seed), m, n)
    return make
