"""Linear model of AES-256 with both S-boxes replaced by the identity.

Without SubBytes every round is affine, so the whole cipher collapses to
``ms_forward(p) ^ k_tilde`` where ``ms_forward`` is the interleaved
ShiftRows/MixColumns chain (14 ShiftRows, 13 MixColumns) and ``k_tilde``
absorbs every round key.
"""

from dataclasses import dataclass

from . import kernels
from .aes import KEY_SIZE, check_block, encrypt_block, expand_key, identity_sbox, xor

__all__ = [
    "KTilde",
    "ms_forward",
    "ms_inverse",
    "derive_k_tilde_from_key",
    "derive_k_tilde_from_pair",
]

ZERO_BLOCK = bytes(16)


@dataclass(frozen=True)
class KTilde:
    value: bytes

    def __post_init__(self):
        object.__setattr__(self, "value", check_block(self.value, "k_tilde"))


def ms_forward(p: bytes) -> bytes:
    """Purely linear part of the Trojaned cipher; GF(2)-linear in ``p``."""
    return kernels.ms_forward(check_block(p))


def ms_inverse(c: bytes) -> bytes:
    """InvShiftRows followed by 13 rounds of InvMixColumns/InvShiftRows."""
    return kernels.ms_inverse(check_block(c))


def derive_k_tilde_from_key(key: bytes) -> KTilde:
    key = bytes(key)
    if len(key) != KEY_SIZE:
        raise ValueError(f"key must be {KEY_SIZE} bytes, got {len(key)}")
    box = identity_sbox()
    # MS(0) = 0, so the Trojaned image of the zero block is the key constant
    return KTilde(encrypt_block(ZERO_BLOCK, expand_key(key, box), box))


def derive_k_tilde_from_pair(p: bytes, c: bytes) -> KTilde:
    """Key constant from one known pair of the Trojaned cipher."""
    return KTilde(xor(check_block(c), ms_forward(p)))
