import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dar.codebook import (
    HEADER_SIZE,
    Codebook,
    CodebookFormatError,
    TokenGrid,
    codebook_from_bytes,
    codebook_to_bytes,
    decode,
    load_codebook,
    make_codebook,
    nearest_codes,
    quantize,
    read_ppm,
    render_pixels,
    save_codebook,
    write_ppm,
)


def test_deterministic_and_distinct():
    a, b = make_codebook(64, 8, 1), make_codebook(64, 8, 1)
    assert codebook_to_bytes(a) == codebook_to_bytes(b)
    assert len({r.tobytes() for r in a.codes}) == 64
    assert a.codes.dtype == np.float32


def test_nearest_tie_and_example():
    codes = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert nearest_codes(np.array([[0.1, 0.2]]), codes)[0] == 0
    assert nearest_codes(np.array([[0.5, 0.5]]), codes)[0] == 0  # equidistant: lowest index
    dup = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert nearest_codes(np.array([[1.0, 0.0]]), dup)[0] == 0


def test_quantize_exact_codes():
    cb = make_codebook(16, 4, 0)
    feats = np.broadcast_to(cb.codes[7], (3, 5, 4))
    g = quantize(feats, cb, class_label=2)
    assert isinstance(g, TokenGrid) and g.class_label == 2
    assert np.all(g.tokens == 7)


def test_nearest_matches_brute_force():
    rng = np.random.default_rng(0)
    cb = make_codebook(64, 8, 3)
    x = rng.normal(size=(1000, 8))
    brute = np.array([np.argmin([np.sum((v - c.astype(np.float64)) ** 2) for c in cb.codes]) for v in x])
    assert np.array_equal(nearest_codes(x, cb.codes, chunk=97), brute)


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_quantize_decode_roundtrip(h, w, seed):
    cb = make_codebook(32, 8, 5)
    tokens = np.random.default_rng(seed).integers(0, 32, (h, w))
    assert np.array_equal(quantize(decode(tokens, cb), cb).tokens, tokens)


def test_decode_lookup():
    cb = make_codebook(8, 3, 0)
    assert np.array_equal(decode(np.array([[5]]), cb)[0, 0], cb.codes[5])


def test_render_size_and_range(tmp_path):
    cb = make_codebook(16, 8, 0)
    img = render_pixels(decode(np.zeros((16, 16), int), cb), scale=16)
    assert img.shape == (256, 256, 3) and img.dtype == np.uint8
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), img)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n256 256\n255\n")


def test_render_affine_channels():
    feats = np.array([[[-3.0, 0.0, 3.0]]])
    px = render_pixels(feats, scale=1)[0, 0]
    assert px[0] == 0 and px[2] == 255 and abs(int(px[1]) - 128) <= 1


def test_save_load_roundtrip(tmp_path):
    cb = make_codebook(64, 8, 9)
    save_codebook(cb, tmp_path / "c.darcb")
    assert load_codebook(tmp_path / "c.darcb") == cb


@pytest.mark.parametrize("corrupt", ["magic", "truncate", "payload"])
def test_corrupt_files_rejected(corrupt):
    data = bytearray(codebook_to_bytes(make_codebook(4, 2, 0)))
    if corrupt == "magic":
        data[0] ^= 0xFF
    elif corrupt == "truncate":
        data = data[:-5]
    else:
        data[HEADER_SIZE + 1] ^= 0x01
    with pytest.raises(CodebookFormatError):
        codebook_from_bytes(bytes(data))


def test_codebook_equality_is_bytewise():
    cb = make_codebook(4, 2, 0)
    other = Codebook(cb.codes.copy(), cb.seed)
    assert other == cb
    other.codes[0, 0] += 1e-7
    assert other != cb
