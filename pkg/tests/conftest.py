import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rawbench import BayerImage, CfaPattern, LinearRgbImage
from rawbench.rng import RngStream

settings.register_profile(
    "default", deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_rgb(h, w, seed=0, lo=0.0, hi=1.0) -> LinearRgbImage:
    rng = RngStream.from_seed(seed)
    data = lo + (hi - lo) * rng.uniforms(h * w * 3).reshape(h, w, 3)
    return LinearRgbImage(data)


def random_bayer(h, w, seed=0, cfa=CfaPattern.RGGB) -> BayerImage:
    rng = RngStream.from_seed(seed)
    data = rng.uniforms(h * w).reshape(h, w)
    return BayerImage(data=data, cfa=cfa, bit_depth=12, black_level=64,
                      white_level=4095)


def constant_bayer(h, w, value, cfa=CfaPattern.RGGB) -> BayerImage:
    return BayerImage(data=np.full((h, w), value), cfa=cfa, bit_depth=12,
                      black_level=64, white_level=4095)


@pytest.fixture
def rgb16():
    return random_rgb(16, 16, seed=7)


@pytest.fixture
def bayer16():
    return random_bayer(16, 16, seed=3)
