import numpy as np
import pytest

from gaugesmooth import build_grid
from gaugesmooth.fixtures import sin_oscillation
from gaugesmooth.stability import (
    SequenceSpec,
    density_dictionary,
    extrapolate,
    oscillating_family,
    run_oscillation,
    sine_norm,
)


def test_dictionary_has_twelve_densities():
    d = density_dictionary(build_grid(2, 16, 1 / 16, "torus"))
    assert len(d) == 12
    assert len({name for name, _ in d}) == 12


def test_sine_norm_values():
    assert sine_norm(2.0) == pytest.approx(np.sqrt(0.5))
    assert sine_norm(4.0) == pytest.approx((3 / 8) ** 0.25)


def test_extrapolate_polynomial_exactly():
    t = np.array([0.4, 0.2, 0.1, 0.05])
    vals = (3 + 2 * t - t ** 2 + 0.5 * t ** 3)[:, None]
    assert extrapolate(t, vals)[0] == pytest.approx(3.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SequenceSpec("oscillation", r=2.0)
    with pytest.raises(ValueError):
        SequenceSpec("other")
    with pytest.raises(ValueError):
        SequenceSpec("oscillation", frequencies=(1, 2))


def test_family_needs_resolution():
    A, B = sin_oscillation()
    spec = SequenceSpec("oscillation", (4, 8, 16, 32), A, B)
    with pytest.raises(ValueError):
        oscillating_family(spec, build_grid(2, (64, 8), 1 / 64, "torus"))


def test_commuting_matrices_have_no_wedge_mass():
    A = np.eye(2)
    _, rep = run_oscillation(A, 2 * A, counts=(128, 4), frequencies=(2, 4, 8, 16))
    assert np.max(np.abs(rep.pairings)) < 1e-12
    assert "wedge_mass" not in rep.extras


def test_norms_constant_along_family():
    A, B = sin_oscillation()
    _, rep = run_oscillation(A, B, counts=(128, 4), frequencies=(2, 4, 8, 16))
    norms = rep.extras["norms"]
    assert np.ptp(norms) < 1e-9 * norms[0]
    area = 4 / 128  # the torus is one unit long and four cells wide
    assert norms[0] == pytest.approx(sine_norm(4.0) * (area * (1 + 1)) ** 0.25, rel=1e-9)
