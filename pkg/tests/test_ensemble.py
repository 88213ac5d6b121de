import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpcnet import ensemble as ens


def test_shuffle_constant_image():
    img = np.full((3, 6, 5), 0.25)
    e = ens.shuffle_image(img, 1)
    np.testing.assert_array_equal(e.pixels, img)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_shuffle_preserves_multiset(seed, h, w):
    img = np.random.default_rng(seed).random((3, h, w))
    e = ens.shuffle_image(img, seed)
    assert e.pixels.shape == img.shape
    np.testing.assert_array_equal(np.sort(e.pixels.reshape(3, -1), 1), np.sort(img.reshape(3, -1), 1))
    # every source pixel exactly once
    assert len({tuple(p) for p in e.permutation}) == h * w


def test_shuffle_deterministic(rng):
    img = rng.random((3, 10, 10))
    a, b = ens.shuffle_image(img, 7), ens.shuffle_image(img, 7)
    np.testing.assert_array_equal(a.pixels, b.pixels)
    np.testing.assert_array_equal(a.permutation, b.permutation)
    assert not np.array_equal(a.permutation, ens.shuffle_image(img, 8).permutation)


def test_scatter_round_trip(rng):
    img = rng.random((3, 20, 20))
    e = ens.sample_ensembles(img, 1, (8, 8), seed=3)[0]
    back = e.scatter()
    rows, cols = e.permutation.T
    np.testing.assert_array_equal(back[:, rows, cols], img[:, rows, cols])
    np.testing.assert_array_equal(e.gather(img), e.pixels)
    w = rng.random(64)
    np.testing.assert_array_equal(e.gather(e.scatter(w)).reshape(-1), w)


def test_sample_shapes(rng):
    img = rng.random((3, 512, 512))
    es = ens.sample_ensembles(img, 128, (32, 32), seed=0)
    assert len(es) == 128 and all(e.pixels.shape == (3, 32, 32) for e in es)
    for e in es[:5]:
        assert len({tuple(p) for p in e.permutation}) == 1024
        assert e.permutation[:, 0].max() < 512 and e.permutation.min() >= 0


def test_full_size_sample_is_a_shuffle(rng):
    img = rng.random((3, 6, 6))
    e = ens.sample_ensembles(img, 1, (6, 6), seed=2)[0]
    np.testing.assert_array_equal(np.sort(e.pixels.reshape(3, -1), 1), np.sort(img.reshape(3, -1), 1))


def test_sample_too_large(rng):
    with pytest.raises(ValueError):
        ens.sample_ensembles(rng.random((3, 4, 4)), 1, (5, 5))


def test_ensemble_means_clt(textured_image):
    img = textured_image
    mu = img.reshape(3, -1).mean(1)
    sd = img.reshape(3, -1).std(1)
    es = ens.sample_ensembles(img, 1000, (32, 32), seed=5)
    bound = 3 * sd / 32
    inside = np.array([np.all(np.abs(e.pixels.reshape(3, -1).mean(1) - mu) <= bound) for e in es])
    assert inside.mean() >= 0.95


def test_ensembles_order_independent(rng):
    img = rng.random((3, 30, 30))
    a = ens.sample_ensembles(img, 5, (4, 4), seed=9)[3]
    b = ens.sample_ensemble(img, (4, 4), ens.rng_for(9, 3))
    np.testing.assert_array_equal(a.pixels, b.pixels)


class TestSubsetMean:
    def test_constant(self):
        e = ens.shuffle_image(np.full((3, 8, 8), 0.4), 0)
        np.testing.assert_allclose(ens.subset_mean_check(e, 9, 20), 0, atol=1e-15)

    def test_full_subset(self, rng):
        e = ens.shuffle_image(rng.random((3, 8, 8)), 0)
        np.testing.assert_allclose(ens.subset_mean_check(e, 64, 5), 0, atol=1e-15)

    def test_deviation_shrinks(self, textured_image):
        e = ens.shuffle_image(textured_image[:, :64, :64], 0)
        dev = [np.mean([ens.subset_mean_check(e, s, 50, seed=t).mean() for t in range(4)])
               for s in (4, 16, 64, 256)]
        assert all(a > b for a, b in zip(dev, dev[1:]))

    def test_subset_stats_within_range(self, rng):
        e = ens.shuffle_image(rng.random((3, 8, 8)), 0)
        s = ens.subset_stats(e, slice(0, 3), slice(2, 5))
        block = e.pixels[:, 0:3, 2:5].reshape(3, -1)
        assert s.subset_size == 9
        assert np.all(s.channel_means >= block.min(1)) and np.all(s.channel_means <= block.max(1))


class TestEdgeAugment:
    def test_constant(self):
        np.testing.assert_array_equal(ens.edge_augment(np.full((3, 5, 5), 0.7)), 0)

    def test_vertical_step(self):
        img = np.zeros((1, 6, 6))
        img[:, :, 3:] = 1.0
        e = ens.edge_augment(img)[0]
        np.testing.assert_array_equal(e[:, 2], 1.0)
        e[:, 2] = 0
        np.testing.assert_array_equal(e, 0)

    @given(st.floats(0.0, 10.0), st.integers(0, 2**32 - 1))
    def test_homogeneous(self, c, seed):
        img = np.random.default_rng(seed).random((3, 5, 5))
        np.testing.assert_allclose(ens.edge_augment(c * img), c * ens.edge_augment(img), atol=1e-12)
