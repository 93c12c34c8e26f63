"""Key-free plaintext recovery from a Trojaned drive.

With identity S-boxes every XTS unit obeys::

    c = TW(i, j) ^ MS(p) ^ CK(j)
    TW(i, j) = (MS(i) * x^j) ^ MS(MS(i) * x^j)

where ``i`` is the encoded sector tweak and ``CK(j)`` folds in both key
constants. ``CK`` does not depend on the sector, so the 32 known pairs of
any single sector give the whole table.
"""

from dataclasses import dataclass

from . import kernels
from .aes import check_block, xor
from .flash import SECTOR_SIZE, FlashFormatError, PairLog
from .linear import ms_forward
from .xts import UNITS_PER_SECTOR, encode_tweak, gf128_mul_alpha_pow

__all__ = [
    "RecoveredKeyMaterial",
    "RecoveryReport",
    "compute_tw",
    "compute_tw_block",
    "derive_ck_table",
    "material_from_log",
    "recover_sector",
    "recover_all",
]


@dataclass(frozen=True)
class RecoveredKeyMaterial:
    ck: tuple  # 32 blocks, index j
    source_sector: int
    initial_tweak: int

    def __post_init__(self):
        if len(self.ck) != UNITS_PER_SECTOR:
            raise ValueError(f"need {UNITS_PER_SECTOR} CK values, got {len(self.ck)}")

    @property
    def packed(self) -> bytes:
        return b"".join(self.ck)


def compute_tw_block(tweak_block: bytes, j: int) -> bytes:
    """Tweak term for an already encoded tweak block."""
    t = gf128_mul_alpha_pow(ms_forward(check_block(tweak_block, "tweak")), j)
    return xor(t, ms_forward(t))


def compute_tw(i: int, j: int) -> bytes:
    return compute_tw_block(encode_tweak(i), j)


def derive_ck_table(pairs, i0: int, initial_tweak: int = 0) -> RecoveredKeyMaterial:
    """CK(j) = c_j ^ TW(i0, j) ^ MS(p_j) from the pairs of the sector with tweak ``i0``."""
    pairs = list(pairs)
    if len(pairs) != UNITS_PER_SECTOR:
        raise ValueError(f"need all {UNITS_PER_SECTOR} pairs of one sector, got {len(pairs)}")
    ck = tuple(
        xor(xor(check_block(c), compute_tw(i0, j)), ms_forward(p))
        for j, (p, c) in enumerate(pairs)
    )
    return RecoveredKeyMaterial(ck, i0 - initial_tweak, initial_tweak)


def material_from_log(log: PairLog) -> RecoveredKeyMaterial:
    return derive_ck_table(log.pairs, log.initial_tweak + log.sector_number, log.initial_tweak)


def recover_sector(c: bytes, i: int, material: RecoveredKeyMaterial) -> bytes:
    """Unit j of the result is MS^-1(c_j ^ TW(i, j) ^ CK(j)). No validity checks."""
    if len(c) != SECTOR_SIZE:
        raise ValueError(f"sector must be {SECTOR_SIZE} bytes, got {len(c)}")
    return kernels.recover_units(bytes(c), ms_forward(encode_tweak(i)), material.packed)


@dataclass
class RecoveryReport:
    sectors_recovered: int
    source_sector: int
    initial_tweak: int

    def lines(self) -> list:
        return [
            f"sectors_recovered={self.sectors_recovered}",
            f"source_sector={self.source_sector:#x}",
            f"initial_tweak={self.initial_tweak:#x}",
        ]


def recover_all(sd_dump: bytes, material: RecoveredKeyMaterial) -> tuple:
    """Decrypt a raw card dump; sector ``n`` uses tweak ``initial_tweak + n``.

    Returns ``(plaintext, RecoveryReport)``.
    """
    if len(sd_dump) % SECTOR_SIZE:
        raise FlashFormatError(f"SD dump length {len(sd_dump)} is not a whole number of sectors")
    out = bytearray(len(sd_dump))
    count = len(sd_dump) // SECTOR_SIZE
    view = memoryview(sd_dump)
    for n in range(count):
        lo = n * SECTOR_SIZE
        out[lo:lo + SECTOR_SIZE] = recover_sector(view[lo:lo + SECTOR_SIZE], material.initial_tweak + n, material)
    return bytes(out), RecoveryReport(count, material.source_sector, material.initial_tweak)
