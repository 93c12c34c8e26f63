"""AES-256 with pluggable substitution tables.

The same code path serves the honest cipher (canonical S-box) and the
Trojaned one (identity S-box). The identity table is also fed to the key
schedule's SubWord, since every table instance on the device is replaced.
"""

from dataclasses import dataclass

from . import kernels
from ._gf import gf256_inverse, gf256_mul

__all__ = [
    "BLOCK_SIZE",
    "KEY_SIZE",
    "NR",
    "SBoxPair",
    "KeySchedule",
    "canonical_sbox",
    "identity_sbox",
    "gf256_mul",
    "expand_key",
    "encrypt_block",
    "decrypt_block",
    "cbc_encrypt",
    "cbc_decrypt",
]

BLOCK_SIZE = 16
KEY_SIZE = 32
NR = 14


def check_block(block: bytes, what: str = "block") -> bytes:
    block = bytes(block)
    if len(block) != BLOCK_SIZE:
        raise ValueError(f"{what} must be {BLOCK_SIZE} bytes, got {len(block)}")
    return block


def xor(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(len(a), "little")


@dataclass(frozen=True)
class SBoxPair:
    forward: bytes
    inverse: bytes

    def __post_init__(self):
        fwd, inv = bytes(self.forward), bytes(self.inverse)
        if len(fwd) != 256 or len(inv) != 256:
            raise ValueError("substitution tables must have 256 entries")
        if any(inv[fwd[x]] != x for x in range(256)):
            raise ValueError("inverse table does not invert the forward table")
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", inv)

    @property
    def is_identity(self) -> bool:
        return self.forward == _IDENTITY


_IDENTITY = bytes(range(256))


def _rijndael_sbox() -> bytes:
    out = bytearray(256)
    for x in range(256):
        b = gf256_inverse(x)
        s = b
        for shift in range(1, 5):
            s ^= ((b << shift) | (b >> (8 - shift))) & 0xFF
        out[x] = s ^ 0x63
    return bytes(out)


_FORWARD = _rijndael_sbox()
_INVERSE = bytes(_FORWARD.index(y) for y in range(256))
_CANONICAL = SBoxPair(_FORWARD, _INVERSE)
_IDENTITY_PAIR = SBoxPair(_IDENTITY, _IDENTITY)


def canonical_sbox() -> SBoxPair:
    """The Rijndael S-box, generated from the field inverse and affine map."""
    return _CANONICAL


def identity_sbox() -> SBoxPair:
    return _IDENTITY_PAIR


@dataclass(frozen=True)
class KeySchedule:
    """The 15 round keys of AES-256, each 16 bytes."""

    round_keys: tuple
    key_size: int = 256
    rounds: int = NR

    def __post_init__(self):
        if len(self.round_keys) != NR + 1 or any(len(k) != 16 for k in self.round_keys):
            raise ValueError("AES-256 needs exactly 15 round keys of 16 bytes")

    @property
    def packed(self) -> bytes:
        return b"".join(self.round_keys)


def expand_key(key: bytes, sbox: SBoxPair = _CANONICAL) -> KeySchedule:
    key = bytes(key)
    if len(key) != KEY_SIZE:
        raise ValueError(f"AES-256 key must be {KEY_SIZE} bytes, got {len(key)}")
    box = sbox.forward
    words = [list(key[4 * i:4 * i + 4]) for i in range(8)]
    rcon = 1
    for i in range(8, 4 * (NR + 1)):
        temp = list(words[i - 1])
        if i % 8 == 0:
            temp = [box[b] for b in temp[1:] + temp[:1]]
            temp[0] ^= rcon
            rcon = gf256_mul(rcon, 2)
        elif i % 8 == 4:
            temp = [box[b] for b in temp]
        words.append([a ^ b for a, b in zip(words[i - 8], temp)])
    flat = bytes(b for w in words for b in w)
    return KeySchedule(tuple(flat[16 * r:16 * r + 16] for r in range(NR + 1)))


def encrypt_block(p: bytes, ks: KeySchedule, sbox: SBoxPair = _CANONICAL) -> bytes:
    return kernels.encrypt_block(check_block(p), ks.packed, sbox.forward)


def decrypt_block(c: bytes, ks: KeySchedule, sbox: SBoxPair = _CANONICAL) -> bytes:
    return kernels.decrypt_block(check_block(c), ks.packed, sbox.inverse)


def cbc_encrypt(data: bytes, iv: bytes, ks: KeySchedule, sbox: SBoxPair = _CANONICAL) -> bytes:
    if len(data) % BLOCK_SIZE:
        raise ValueError("CBC input must be whole blocks")
    prev, out = check_block(iv, "iv"), []
    for off in range(0, len(data), BLOCK_SIZE):
        prev = encrypt_block(xor(data[off:off + BLOCK_SIZE], prev), ks, sbox)
        out.append(prev)
    return b"".join(out)


def cbc_decrypt(data: bytes, iv: bytes, ks: KeySchedule, sbox: SBoxPair = _CANONICAL) -> bytes:
    if len(data) % BLOCK_SIZE:
        raise ValueError("CBC input must be whole blocks")
    prev, out = check_block(iv, "iv"), []
    for off in range(0, len(data), BLOCK_SIZE):
        block = data[off:off + BLOCK_SIZE]
        out.append(xor(decrypt_block(block, ks, sbox), prev))
        prev = block
    return b"".join(out)
