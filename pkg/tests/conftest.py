"""Shared fixtures: canonical shapes and analytic moment oracles."""

import numpy as np
import pytest
from scipy.special import beta as beta_fn

from algshape import BivariatePolynomial, ImagePlane


@pytest.fixture
def unit_circle() -> BivariatePolynomial:
    """x^2 + y^2 - 1 in canonical ordering."""
    return BivariatePolynomial(2, np.array([-1.0, 0.0, 0.0, 1.0, 0.0, 1.0]))


@pytest.fixture
def plane_l2() -> ImagePlane:
    return ImagePlane(2.0, 1.0)


@pytest.fixture
def plane_l5() -> ImagePlane:
    return ImagePlane(5.0, 1.0)


def disk_moment(i: int, j: int, radius: float = 1.0) -> float:
    """Analytic moment of the unit-density disk x^2 + y^2 <= r^2.

    In polar form the angular integral vanishes for odd exponents and equals
    2 B((i+1)/2, (j+1)/2) otherwise; the radial part contributes
    r^(i+j+2) / (i+j+2).
    """
    if i % 2 or j % 2:
        return 0.0
    ang = 2.0 * beta_fn((i + 1) / 2.0, (j + 1) / 2.0)
    return ang * radius ** (i + j + 2) / (i + j + 2)


def circle_poly(radius: float = 1.0, center=(0.0, 0.0)) -> BivariatePolynomial:
    cx, cy = center
    return BivariatePolynomial.from_terms(
        2,
        {
            (0, 0): cx**2 + cy**2 - radius**2,
            (1, 0): -2 * cx,
            (0, 1): -2 * cy,
            (2, 0): 1.0,
            (0, 2): 1.0,
        },
    )
