import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clusterdenoise.image_io import (
    NoiseSpec,
    PgmHeaderError,
    PgmMaxvalError,
    PgmTruncatedError,
    UnsupportedFormatError,
    add_awgn,
    load_pgm,
    psnr,
    read_pgm,
    save_pgm,
    write_pgm,
)

P5_2x2 = b"P5 2 2 255\n" + bytes([0, 255, 128, 64])
P2_2x2 = b"P2\n# a comment\n2 2\n255\n0 255\n128 64\n"


def test_read_p5():
    img = read_pgm(P5_2x2)
    assert img.dtype == np.float64
    np.testing.assert_array_equal(img, [[0, 255], [128, 64]])


def test_p2_equals_p5():
    np.testing.assert_array_equal(read_pgm(P2_2x2), read_pgm(P5_2x2))


def test_p5_header_comment():
    data = b"P5\n# made by hand\n2 1\n# max\n255\n" + bytes([7, 9])
    np.testing.assert_array_equal(read_pgm(data), [[7, 9]])


@pytest.mark.parametrize(
    "data, exc",
    [
        (b"P6 2 2 255\n" + bytes(12), UnsupportedFormatError),
        (b"P5 2 2", PgmHeaderError),
        (b"P5 2 x 255\n" + bytes(4), PgmHeaderError),
        (b"P5 2 2 65535\n" + bytes(8), PgmMaxvalError),
        (b"P5 2 2 255\n" + bytes(3), PgmTruncatedError),
        (b"P2 2 2 255\n1 2 3", PgmTruncatedError),
        (b"P2 1 1 100\n101", PgmHeaderError),
    ],
)
def test_read_errors(data, exc):
    with pytest.raises(exc):
        read_pgm(data)


def test_error_classes_are_distinct():
    classes = {UnsupportedFormatError, PgmHeaderError, PgmMaxvalError, PgmTruncatedError}
    assert len(classes) == 4
    for c in classes:
        assert issubclass(c, ValueError)


def test_write_clamps_and_rounds():
    img = np.array([[255.7, -3.2, 12.4, 12.6]])
    out = read_pgm(write_pgm(img))
    np.testing.assert_array_equal(out, [[255, 0, 12, 13]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_roundtrip_integer_images(raw):
    img = raw.astype(np.float64)
    np.testing.assert_array_equal(read_pgm(write_pgm(img)), img)


def test_file_helpers(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4)
    save_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(load_pgm(tmp_path / "a.pgm"), img)


def test_awgn_zero_sigma_is_identity():
    img = np.random.default_rng(1).uniform(0, 255, (16, 16))
    np.testing.assert_array_equal(add_awgn(img, NoiseSpec(0.0, 5)), img)


def test_awgn_deterministic_and_unclamped():
    img = np.full((32, 32), 250.0)
    a = add_awgn(img, NoiseSpec(20.0, 3))
    b = add_awgn(img, NoiseSpec(20.0, 3))
    np.testing.assert_array_equal(a, b)
    assert a.max() > 255
    assert not np.array_equal(a, add_awgn(img, NoiseSpec(20.0, 4)))


def test_awgn_sample_variance():
    img = np.zeros((512, 512))
    noise = add_awgn(img, NoiseSpec(20.0, 11)) - img
    assert abs(noise.var() - 400.0) / 400.0 < 0.02
    assert abs(noise.mean()) < 0.2


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)


def test_psnr_identical_is_inf():
    img = np.ones((4, 4))
    assert psnr(img, img) == math.inf


def test_psnr_known_value():
    a = np.zeros((10, 10))
    b = np.full((10, 10), 255.0)
    assert psnr(a, b) == pytest.approx(0.0)
    assert psnr(a, a + 1.0) == pytest.approx(20 * math.log10(255.0))


def test_psnr_dimension_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((3, 3)), np.zeros((3, 4)))


@given(st.integers(0, 2**31), st.integers(2, 9), st.integers(2, 9))
@settings(max_examples=30, deadline=None)
def test_psnr_symmetric(seed, h, w):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, 255, (2, h, w))
    assert psnr(a, b) == psnr(b, a)


@pytest.mark.parametrize("sigma, expected", [(5, 34.16), (10, 28.14), (20, 22.11)])
def test_noisy_psnr_matches_table(sigma, expected):
    clean = np.random.default_rng(0).uniform(40, 215, (256, 256))
    noisy = add_awgn(clean, NoiseSpec(sigma, 1))
    assert 10 * math.log10(255.0**2 / sigma**2) == pytest.approx(expected, abs=0.01)
    assert abs(psnr(noisy, clean) - expected) <= 0.15
