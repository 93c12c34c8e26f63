"""XTS mode (IEEE 1619-2007) over the pluggable AES-256.

Only whole 512-byte sectors are handled; there is no ciphertext stealing.
"""

from dataclasses import dataclass
from functools import lru_cache

from . import kernels
from .aes import KEY_SIZE, SBoxPair, canonical_sbox, check_block, encrypt_block, expand_key

__all__ = [
    "SECTOR_SIZE",
    "UNITS_PER_SECTOR",
    "XtsKeys",
    "gf128_mul_alpha_pow",
    "encode_tweak",
    "xts_encrypt_sector",
    "xts_decrypt_sector",
    "xts_encrypt_units",
    "xts_decrypt_units",
]

SECTOR_SIZE = 512
UNITS_PER_SECTOR = SECTOR_SIZE // 16


@dataclass(frozen=True)
class XtsKeys:
    k1: bytes  # data key
    k2: bytes  # tweak key

    def __post_init__(self):
        for name in ("k1", "k2"):
            value = bytes(getattr(self, name))
            if len(value) != KEY_SIZE:
                raise ValueError(f"{name} must be {KEY_SIZE} bytes, got {len(value)}")
            object.__setattr__(self, name, value)

    def to_bytes(self) -> bytes:
        return self.k1 + self.k2

    @classmethod
    def from_bytes(cls, raw: bytes) -> "XtsKeys":
        if len(raw) != 2 * KEY_SIZE:
            raise ValueError(f"expected {2 * KEY_SIZE} bytes of key material")
        return cls(raw[:KEY_SIZE], raw[KEY_SIZE:])


def gf128_mul_alpha_pow(b: bytes, j: int) -> bytes:
    """Multiply ``b`` by x^j in GF(2^128), little-endian bit order."""
    if not 0 <= j < UNITS_PER_SECTOR:
        raise ValueError(f"data unit index must be in 0..{UNITS_PER_SECTOR - 1}, got {j}")
    return kernels.mul_alpha_pow(check_block(b), j)


def encode_tweak(i: int) -> bytes:
    """Sector number as a tweak block: 64-bit little-endian, upper half zero."""
    if not 0 <= i < 1 << 64:
        raise ValueError(f"sector number out of 64-bit range: {i}")
    return i.to_bytes(8, "little") + bytes(8)


@lru_cache(maxsize=64)
def _schedule(key: bytes, sbox: SBoxPair):
    return expand_key(key, sbox)


def _crypt(data, i, keys, sbox, decrypt):
    data = bytes(data)
    if not data or len(data) % 16 or len(data) > SECTOR_SIZE:
        raise ValueError(f"data must be 1..{UNITS_PER_SECTOR} whole 16-byte units")
    sbox = sbox or canonical_sbox()
    mask = encrypt_block(encode_tweak(i), _schedule(keys.k2, sbox), sbox)
    table = sbox.inverse if decrypt else sbox.forward
    return kernels.xts_sector(data, mask, _schedule(keys.k1, sbox).packed, table, decrypt)


def _check_sector(data: bytes) -> bytes:
    if len(data) != SECTOR_SIZE:
        raise ValueError(f"sector must be {SECTOR_SIZE} bytes, got {len(data)}")
    return data


def xts_encrypt_units(p: bytes, i: int, keys: XtsKeys, sbox: SBoxPair | None = None) -> bytes:
    """Encrypt the leading units of sector ``i`` (j = 0, 1, ...)."""
    return _crypt(p, i, keys, sbox, False)


def xts_decrypt_units(c: bytes, i: int, keys: XtsKeys, sbox: SBoxPair | None = None) -> bytes:
    return _crypt(c, i, keys, sbox, True)


def xts_encrypt_sector(p: bytes, i: int, keys: XtsKeys, sbox: SBoxPair | None = None) -> bytes:
    return _crypt(_check_sector(p), i, keys, sbox, False)


def xts_decrypt_sector(c: bytes, i: int, keys: XtsKeys, sbox: SBoxPair | None = None) -> bytes:
    return _crypt(_check_sector(c), i, keys, sbox, True)
