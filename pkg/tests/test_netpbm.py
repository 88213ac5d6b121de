import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpcnet import netpbm


def test_white_pixel():
    img = netpbm.ppm_decode(b"P6 1 1 255\n" + bytes([255, 255, 255]))
    np.testing.assert_array_equal(img, np.ones((3, 1, 1)))


def test_comments_in_header():
    img = netpbm.ppm_decode(b"P6\n# made by hand\n2 1\n255\n" + bytes([0, 51, 255, 10, 20, 30]))
    np.testing.assert_array_equal(img[:, 0, 0], [0, 0.2, 1.0])
    assert img.shape == (3, 1, 2)


def test_channel_layout():
    img = np.zeros((3, 2, 3))
    img[0, 1, 2] = 1.0
    data = netpbm.ppm_encode(img)
    body = data[len(b"P6\n3 2\n255\n"):]
    assert body[(1 * 3 + 2) * 3] == 255 and sum(body) == 255


@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 9))
def test_round_trip_is_quantisation(seed, h, w):
    x = np.random.default_rng(seed).uniform(-0.2, 1.2, (3, h, w))
    back = netpbm.ppm_decode(netpbm.ppm_encode(x))
    np.testing.assert_array_equal(back, np.rint(np.clip(x, 0, 1) * 255) / 255)
    np.testing.assert_array_equal(netpbm.ppm_decode(netpbm.ppm_encode(back)), back)


def test_pgm_round_trip(tmp_path, rng):
    f = rng.random((5, 7))
    netpbm.pgm_write(f, tmp_path / "f.pgm")
    np.testing.assert_array_equal(netpbm.pgm_read(tmp_path / "f.pgm"), np.rint(f * 255) / 255)


def test_file_round_trip(tmp_path, rng):
    x = rng.random((3, 4, 6))
    netpbm.ppm_write(x, tmp_path / "x.ppm")
    assert netpbm.ppm_read(tmp_path / "x.ppm").shape == (3, 4, 6)


def test_truncated_names_counts():
    with pytest.raises(netpbm.NetpbmError, match=r"expected 12 bytes.*found 5"):
        netpbm.ppm_decode(b"P6 2 2 255\n" + bytes(5))


@pytest.mark.parametrize("data,where", [
    (b"P5 1 1 255\n\x00", "byte 0"),
    (b"P6 x 1 255\n", "byte 3"),
    (b"P6 1 1 65535\n\x00\x00\x00", "maxval"),
    (b"P6 0 1 255\n", "size"),
])
def test_malformed_header(data, where):
    with pytest.raises(netpbm.NetpbmError, match=where):
        netpbm.ppm_decode(data)


def test_bad_shapes():
    with pytest.raises(ValueError):
        netpbm.ppm_encode(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        netpbm.pgm_encode(np.zeros((3, 2, 2)))
