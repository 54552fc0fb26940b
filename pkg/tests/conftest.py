import warnings

import numpy as np
import pytest

# q_i of the 75-summand geometric example: ten each of 0.05..0.25, then 25 of 0.30
TABLE1_Q = [0.05] * 10 + [0.10] * 10 + [0.15] * 10 + [0.20] * 10 + [0.25] * 10 + [0.30] * 25

# printed comparison values for the geometric sums: n -> (Poisson, NB mean, NB mean+var)
TABLE2_GEOMETRIC = {
    10: (0.09390, 9.47e-17, 9.07e-17),   # the NB columns are rounding noise around 0
    20: (2.53041, 0.41416, 0.06280),
    30: (60.4516, 7.17325, 1.23534),
    40: (2117.84, 195.211, 27.7360),
    50: (142995.0, 7902.23, 1079.63),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
