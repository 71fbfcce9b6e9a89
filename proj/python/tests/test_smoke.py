import math
import os
from pathlib import Path

import numpy as np
import pytest

import naxray


def test_zero_field_scatters_to_identity():
    f = naxray.PotentialField(3, 2, 3, 2.0, naxray.Structure.general_real)
    data = naxray.scattering_data(f, 5, seed=1)
    assert data["value"].shape == (5, 2, 2)
    for c in data["value"]:
        assert np.array_equal(c, np.eye(2))
    assert np.allclose(np.linalg.norm(data["x"], axis=1), 1.0)


def test_skew_field_gives_rotations():
    f = naxray.random_field(3, 3, 3, naxray.Structure.skew_symmetric, seed=4)
    for c in naxray.scattering_data(f, 20, seed=2)["value"]:
        assert np.abs(c.imag).max() == 0
        assert np.linalg.norm(c.T @ c - np.eye(3)) < 1e-9
        assert abs(np.linalg.det(c) - 1) < 1e-9


def test_scalar_field_reduces_to_xray():
    f = naxray.random_field(3, 1, 4, naxray.Structure.general_real, seed=7)
    x = np.array([0.0, 0.0, 1.0])
    v = np.array([0.6, 0.0, -0.8])
    c = naxray.scattering_value(f, x, v)
    i = naxray.xray(f, x, v)
    assert abs(math.log(abs(c[0, 0])) - i[0, 0].real) < 1e-7 * max(1.0, abs(i[0, 0]))


def test_coefficients_round_trip(tmp_path):
    f = naxray.random_field(2, 2, 3, naxray.Structure.general_complex, seed=3)
    naxray.write_field(tmp_path / "f.bin", f)
    g = naxray.read_field(tmp_path / "f.bin")
    assert np.array_equal(f.coeffs, g.coeffs)
    assert naxray.l2_distance(f, g) == 0.0
    h = 2.0 * f - f
    assert naxray.l2_distance(f, h) < 1e-14
    with pytest.raises(naxray.DomainError):
        f.coeffs = np.zeros(3, dtype=complex)


def test_pseudolinearisation_is_exact_for_equal_fields():
    f = naxray.random_field(3, 2, 3, naxray.Structure.general_real, seed=5)
    r = naxray.pseudolin_residual(f, f, np.array([1.0, 0, 0]), np.array([-1.0, 0, 0]))
    assert r < 1e-12


def test_identity_symbol():
    s = naxray.constant_weight_symbol(np.eye(1), 3, 0.0, np.zeros(2))
    assert abs(s[0, 0] - 2 * math.pi) < 1e-12


def test_errors_map_to_python_exceptions():
    f = naxray.PotentialField(3, 1, 3)
    with pytest.raises(naxray.DomainError):
        naxray.scattering_value(f, np.array([0.5, 0, 0]), np.array([1.0, 0, 0]))
    with pytest.raises(ValueError):
        naxray.scattering_data(f, 1, steps_per_unit=2)
    with pytest.raises(naxray.IoError):
        naxray.read_field("/nonexistent/field.bin")


def test_demo_dataset_likelihood():
    configs = Path(os.environ.get("NAXRAY_CONFIG_DIR", Path(__file__).parents[2] / "configs"))
    truth = naxray.read_field(configs / "demo" / "truth.bin")
    zero = naxray.PotentialField(truth.dim, truth.matrix_size, truth.modes, truth.half_width, truth.structure)
    ds = configs / "demo" / "dataset.jsonl"
    assert naxray.log_likelihood(truth, ds, 32) > naxray.log_likelihood(zero, ds, 32)


def test_fmt():
    assert naxray.fmt(0.1) == "0.10000000000000001"
