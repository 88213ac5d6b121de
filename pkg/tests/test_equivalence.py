import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpcnet import equivalence as eq


def test_collapse_ones():
    assert eq.collapse_kernel(np.ones((1, 1, 3, 3)))[0, 0] == 9.0


def test_collapse_matches_loop(rng):
    K = rng.standard_normal((2, 3, 3, 3))
    ref = np.zeros((2, 3))
    for o in range(2):
        for c in range(3):
            for m in range(3):
                for n in range(3):
                    ref[o, c] += K[o, c, m, n]
    np.testing.assert_allclose(eq.collapse_kernel(K), ref, atol=1e-14)
    np.testing.assert_array_equal(eq.collapse_kernel(-K), -eq.collapse_kernel(K))


def test_constant_input_example():
    img = np.array([0.2, 0.4, 0.6])[:, None, None] * np.ones((3, 5, 5))
    r = eq.verify_equivalence(img, np.ones((1, 3, 3, 3)))
    assert r.exact_output[0] == pytest.approx(10.8, abs=1e-12)
    assert r.collapsed_output[0] == pytest.approx(10.8, abs=1e-12)
    assert r.abs_diff[0] < 1e-12


def test_zero_kernel(rng):
    r = eq.verify_equivalence(rng.random((3, 5, 5)), np.zeros((1, 3, 3, 3)))
    assert r.exact_output[0] == 0 and r.collapsed_output[0] == 0


def test_shape_checked(rng):
    with pytest.raises(ValueError):
        eq.verify_equivalence(rng.random((3, 4, 4)), rng.random((1, 3, 3, 3)))
    with pytest.raises(ValueError):
        eq.verify_equivalence(rng.random((2, 5, 5)), rng.random((1, 3, 3, 3)))


def test_exact_path_is_weighted_pixel_sum(rng):
    """The averaged conv response equals a direct sum over positions and offsets."""
    k = 3
    img = rng.random((2, 5, 5))
    K = rng.standard_normal((1, 2, k, k))
    ref = 0.0
    for i in range(k):
        for j in range(k):
            ref += np.sum(img[:, i:i + k, j:j + k] * K[0])
    ref /= k * k
    assert eq.exact_output(img, K)[0] == pytest.approx(ref, abs=1e-12)


@given(st.sampled_from([2, 3, 5]), st.integers(0, 2**32 - 1))
def test_constant_input_exact(k, seed):
    g = np.random.default_rng(seed)
    img = g.random((3, 1, 1)) * np.ones((3, 2 * k - 1, 2 * k - 1))
    r = eq.verify_equivalence(img, g.uniform(-1, 1, (1, 3, k, k)))
    assert r.abs_diff[0] < 1e-12


@given(st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_diff_scales_linearly(c, seed):
    g = np.random.default_rng(seed)
    img = g.random((3, 5, 5))
    K = g.standard_normal((1, 3, 3, 3))
    d1 = eq.verify_equivalence(img, K).abs_diff[0]
    dc = eq.verify_equivalence(img, c * K).abs_diff[0]
    assert dc == pytest.approx(abs(c) * d1, rel=1e-9, abs=1e-12)


def test_report_meta(rng):
    r = eq.verify_equivalence(rng.random((3, 3, 3)), rng.random((1, 3, 2, 2)), seed=4, source="x")
    assert r.meta == {"seed": 4, "source": "x", "k": 2, "channels": 3}
    np.testing.assert_array_equal(r.abs_diff, np.abs(r.exact_output - r.collapsed_output))


def test_sweep_constant_image():
    rows = eq.sweep_equivalence(np.full((3, 20, 20), 0.5), (2, 3), trials=20)
    for row in rows:
        assert row["shuffled_mean_diff"] < 1e-12 and row["unshuffled_mean_diff"] < 1e-12


def test_sweep_natural_image(textured_image):
    rows = eq.sweep_equivalence(textured_image, (2, 3), trials=300, seed=1)
    for row in rows:
        assert np.isfinite(row["shuffled_mean_diff"]) and row["shuffled_mean_diff"] > 0
        assert row["shuffled_mean_diff"] <= row["unshuffled_mean_diff"]
    assert rows == eq.sweep_equivalence(textured_image, (2, 3), trials=300, seed=1)


def test_contraction_with_variance():
    """Lower pixel variance gives smaller mean gaps, on i.i.d. synthetic inputs."""
    means = []
    for sd in (0.3, 0.1, 0.03):
        g = np.random.default_rng(0)
        diffs = [eq.verify_equivalence(0.5 + sd * g.standard_normal((3, 5, 5)),
                                       g.uniform(-1, 1, (1, 3, 3, 3))).rel_diff[0] for _ in range(1000)]
        means.append(np.mean(diffs))
    assert means[0] > means[1] > means[2]


def test_csv_columns(textured_image):
    text = eq.rows_to_csv(eq.sweep_equivalence(textured_image, (2,), trials=10))
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == eq.CSV_COLUMNS
    assert rows[0]["k"] == "2"
