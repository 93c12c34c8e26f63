import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xtstrojan.aes import identity_sbox, xor
from xtstrojan.linear import ms_forward
from xtstrojan.xts import (
    XtsKeys,
    encode_tweak,
    gf128_mul_alpha_pow,
    xts_decrypt_sector,
    xts_encrypt_sector,
    xts_encrypt_units,
)

from oracles import alpha_pow_oracle, library_xts, straight_line_xts

blocks = st.binary(min_size=16, max_size=16)


def random_keys(rng):
    return XtsKeys(rng.randbytes(32), rng.randbytes(32))


def test_alpha_pow_examples(backend):
    b = bytes(range(16))
    assert gf128_mul_alpha_pow(b, 0) == b
    assert gf128_mul_alpha_pow(b, 2) == gf128_mul_alpha_pow(gf128_mul_alpha_pow(b, 1), 1)
    top = bytes(15) + b"\x80"
    assert gf128_mul_alpha_pow(top, 1) == b"\x87" + bytes(15)


def test_alpha_pow_matches_carryless_oracle(backend, rng):
    for j in range(32):
        for _ in range(10):
            b = rng.randbytes(16)
            assert gf128_mul_alpha_pow(b, j) == alpha_pow_oracle(b, j)


@settings(max_examples=200, deadline=None)
@given(a=blocks, b=blocks, j=st.integers(0, 31))
def test_alpha_pow_linear(a, b, j):
    assert gf128_mul_alpha_pow(xor(a, b), j) == xor(gf128_mul_alpha_pow(a, j), gf128_mul_alpha_pow(b, j))


@settings(max_examples=200, deadline=None)
@given(b=blocks, x=st.integers(0, 31), y=st.integers(0, 31))
def test_alpha_pow_additive(b, x, y):
    if x + y > 31:
        return
    assert gf128_mul_alpha_pow(gf128_mul_alpha_pow(b, x), y) == gf128_mul_alpha_pow(b, x + y)


def test_alpha_pow_range():
    with pytest.raises(ValueError):
        gf128_mul_alpha_pow(bytes(16), 32)


def test_encode_tweak():
    assert encode_tweak(0) == bytes(16)
    assert encode_tweak(1) == b"\x01" + bytes(15)
    assert encode_tweak(0xA2566E3D7EC48F3B) == bytes.fromhex("3b8fc47e3d6e56a2") + bytes(8)
    with pytest.raises(ValueError):
        encode_tweak(1 << 64)


def test_matches_straight_line_xts(backend, rng):
    for _ in range(100):
        keys, i, p = random_keys(rng), rng.getrandbits(64), rng.randbytes(512)
        c = xts_encrypt_sector(p, i, keys)
        assert c == straight_line_xts(keys.k1, keys.k2, i, p)
        assert xts_decrypt_sector(c, i, keys) == p


def test_matches_library_xts(rng):
    for _ in range(20):
        keys, i, p = random_keys(rng), rng.getrandbits(64), rng.randbytes(512)
        assert xts_encrypt_sector(p, i, keys) == library_xts(keys.k1, keys.k2, i, p)


def test_single_unit_matches_straight_line(rng):
    keys, i, p = random_keys(rng), rng.getrandbits(64), rng.randbytes(16)
    assert xts_encrypt_units(p, i, keys) == straight_line_xts(keys.k1, keys.k2, i, p)


@pytest.mark.parametrize("trojan", [False, True], ids=["canonical", "identity"])
def test_round_trip(backend, rng, trojan):
    box = identity_sbox() if trojan else None
    for _ in range(100):
        keys, i, p = random_keys(rng), rng.getrandbits(64), rng.randbytes(512)
        assert xts_decrypt_sector(xts_encrypt_sector(p, i, keys, box), i, keys, box) == p


def test_tweak_sensitivity(rng):
    keys, i, p = random_keys(rng), rng.getrandbits(63), rng.randbytes(512)
    c = xts_encrypt_sector(p, i, keys)
    assert xts_decrypt_sector(c, i + 1, keys) != p


def test_identity_sector_is_affine(rng):
    box = identity_sbox()
    for _ in range(20):
        i, p, d = rng.getrandbits(64), rng.randbytes(512), rng.randbytes(512)
        expected = b"".join(ms_forward(d[k:k + 16]) for k in range(0, 512, 16))
        for keys in (random_keys(rng), random_keys(rng)):
            diff = xor(xts_encrypt_sector(xor(p, d), i, keys, box), xts_encrypt_sector(p, i, keys, box))
            assert diff == expected


@pytest.mark.parametrize("length", [0, 16, 511, 513, 1024])
def test_wrong_sector_length(length):
    keys = XtsKeys(bytes(32), bytes(32))
    with pytest.raises(ValueError):
        xts_encrypt_sector(bytes(length), 0, keys)
    with pytest.raises(ValueError):
        xts_decrypt_sector(bytes(length), 0, keys)


def test_keys_validated():
    with pytest.raises(ValueError):
        XtsKeys(bytes(16), bytes(32))
    assert XtsKeys.from_bytes(bytes(range(64))).k2 == bytes(range(32, 64))
