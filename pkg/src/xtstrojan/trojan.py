"""Interdiction tooling: find the cipher's lookup tables and swap in the Trojan.

The FPGA configuration is a synthetic container rather than a real Xilinx
bitstream::

    0x00  4   sync word AA 99 55 66
    0x04  16  part identifier, NUL padded
    0x14  16  design signature
    0x24  4   payload length
    0x28  4   CRC-32 over the whole container with this field zeroed
    0x2C  2   number of BRAM init records
    0x30  8n  records: role u8, reserved u8, length u16, offset u32
    0x200     payload: filler with the BRAM init images at the recorded offsets

Scanning never looks at the records; it matches table contents, as the
attacker would against an undocumented format.
"""

import bisect
import enum
import random
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field, replace

from ._gf import gf256_mul
from .aes import SBoxPair, canonical_sbox, identity_sbox
from .flash import (
    AES_CALL_SITES,
    BITSTREAM_LENGTH,
    FPGA_SIGNATURE,
    ROUTE_SOFTWARE,
    FirmwareBlob,
    FlashImage,
)

__all__ = [
    "TableKind",
    "TableInstance",
    "BitstreamContainer",
    "ScanMismatchError",
    "ContainerError",
    "EXPECTED_COUNTS",
    "canonical_table_image",
    "malicious_table_image",
    "table_image",
    "build_container",
    "scan_tables",
    "count_kinds",
    "patch_tables",
    "seal_container",
    "disable_self_tests",
    "reroute_key_derivation",
    "install_pair_logger",
    "InterdictionReport",
    "run_interdiction",
    "interdict",
]

SYNC_WORD = bytes.fromhex("AA995566")
PART_ID = b"XC3S500E-4PQ208"
PAYLOAD_OFFSET = 0x200
_HEAD = struct.Struct("<4s16s16sIIH2x")
_RECORD = struct.Struct("<BxHI")
_CRC_OFFSET = 0x28


class TableKind(enum.Enum):
    T_TILDE = 1
    MC_INV = 2
    S_FWD = 3
    S_INV = 4

    @property
    def length(self) -> int:
        return 1024 if self in (TableKind.T_TILDE, TableKind.MC_INV) else 256


# longest first; equal lengths keep this order
SCAN_ORDER = (TableKind.T_TILDE, TableKind.MC_INV, TableKind.S_FWD, TableKind.S_INV)

EXPECTED_COUNTS = {TableKind.T_TILDE: 16, TableKind.MC_INV: 16, TableKind.S_FWD: 4, TableKind.S_INV: 4}

MC_INV_FACTORS = (0x09, 0x0B, 0x0D, 0x0E)


def _image(kind: TableKind, sbox: SBoxPair) -> bytes:
    fwd, inv = sbox.forward, sbox.inverse
    if kind is TableKind.T_TILDE:
        return bytes(
            b
            for x in range(256)
            for b in (fwd[x], inv[x], gf256_mul(fwd[x], 2), gf256_mul(fwd[x], 3))
        )
    if kind is TableKind.MC_INV:
        return bytes(gf256_mul(x, f) for x in range(256) for f in MC_INV_FACTORS)
    if kind is TableKind.S_FWD:
        return fwd
    return inv


_CANONICAL_IMAGES = {k: _image(k, canonical_sbox()) for k in TableKind}
_MALICIOUS_IMAGES = {k: _image(k, identity_sbox()) for k in TableKind}


def canonical_table_image(kind: TableKind) -> bytes:
    return _CANONICAL_IMAGES[kind]


def malicious_table_image(kind: TableKind) -> bytes:
    """Table contents with both S-boxes set to the identity."""
    return _MALICIOUS_IMAGES[kind]


def table_image(kind: TableKind, malicious: bool = False) -> bytes:
    return (_MALICIOUS_IMAGES if malicious else _CANONICAL_IMAGES)[kind]


@dataclass(frozen=True, order=True)
class TableInstance:
    offset: int
    kind: TableKind = field(compare=False)
    length: int = field(compare=False)

    @property
    def end(self) -> int:
        return self.offset + self.length


class ContainerError(ValueError):
    pass


class ScanMismatchError(RuntimeError):
    def __init__(self, counts):
        self.counts = counts
        found = ", ".join(f"{k.name}={counts.get(k, 0)}" for k in SCAN_ORDER)
        super().__init__(f"unexpected table instance counts: {found}")


@dataclass(frozen=True)
class BitstreamContainer:
    part_id: bytes
    design_signature: bytes
    payload_length: int
    crc: int
    records: tuple  # TableInstance per BRAM init record

    @classmethod
    def parse(cls, raw: bytes) -> "BitstreamContainer":
        if len(raw) < PAYLOAD_OFFSET:
            raise ContainerError("container shorter than its header")
        sync, part, sig, length, crc, count = _HEAD.unpack_from(raw)
        if sync != SYNC_WORD:
            raise ContainerError("bitstream sync word missing")
        if _HEAD.size + count * _RECORD.size > PAYLOAD_OFFSET:
            raise ContainerError("BRAM record table overflows the header")
        records = []
        for n in range(count):
            role, length_, offset = _RECORD.unpack_from(raw, _HEAD.size + n * _RECORD.size)
            try:
                kind = TableKind(role)
            except ValueError:
                raise ContainerError(f"unknown BRAM role {role}") from None
            records.append(TableInstance(offset, kind, length_))
        return cls(part.rstrip(b"\0"), sig, length, crc, tuple(records))

    def first(self, kind: TableKind) -> TableInstance:
        for rec in self.records:
            if rec.kind is kind:
                return rec
        raise ContainerError(f"no BRAM initialised with {kind.name}")


def container_crc(raw: bytes) -> int:
    return zlib.crc32(raw[:_CRC_OFFSET] + bytes(4) + raw[_CRC_OFFSET + 4:])


def seal_container(raw: bytes) -> bytes:
    """Recompute the container CRC after editing its contents."""
    out = bytearray(raw)
    struct.pack_into("<I", out, _CRC_OFFSET, container_crc(raw))
    return bytes(out)


def build_container(rng: random.Random, size: int = BITSTREAM_LENGTH) -> tuple:
    """Provision an honest container with tables at random aligned offsets.

    Returns ``(container_bytes, instances)``.
    """
    kinds = [k for k in SCAN_ORDER for _ in range(EXPECTED_COUNTS[k])]
    rng.shuffle(kinds)
    payload_len = size - PAYLOAD_OFFSET
    free_units = (payload_len - sum(k.length for k in kinds)) // 4
    cuts = sorted(rng.randrange(free_units + 1) for _ in kinds)

    raw = bytearray(PAYLOAD_OFFSET) + bytearray(rng.randbytes(payload_len))
    instances, prev_cut, pos = [], 0, PAYLOAD_OFFSET
    for kind, cut in zip(kinds, cuts):
        pos += 4 * (cut - prev_cut)
        prev_cut = cut
        raw[pos:pos + kind.length] = canonical_table_image(kind)
        instances.append(TableInstance(pos, kind, kind.length))
        pos += kind.length

    _HEAD.pack_into(raw, 0, SYNC_WORD, PART_ID, FPGA_SIGNATURE, payload_len, 0, len(instances))
    for n, inst in enumerate(instances):
        _RECORD.pack_into(raw, _HEAD.size + n * _RECORD.size, inst.kind.value, inst.length, inst.offset)
    return seal_container(bytes(raw)), instances


def scan_tables(bitstream: bytes, malicious: bool = False) -> list:
    """Exact-match search for every table image, longest kinds first.

    A match overlapping an already claimed instance is dropped, so each byte
    range is reported once. With ``malicious=True`` the identity S-box and
    its inverse are byte-identical and all such instances come back as
    ``S_FWD``.
    """
    bitstream = bytes(bitstream)
    starts, ends, found = [], [], []
    for kind in SCAN_ORDER:
        needle = table_image(kind, malicious)
        pos = bitstream.find(needle)
        while pos != -1:
            end = pos + len(needle)
            k = bisect.bisect_right(starts, pos)
            clash = (k > 0 and ends[k - 1] > pos) or (k < len(starts) and starts[k] < end)
            if not clash:
                starts.insert(k, pos)
                ends.insert(k, end)
                found.append(TableInstance(pos, kind, len(needle)))
            pos = bitstream.find(needle, pos + 1)
    return sorted(found)


def count_kinds(instances) -> dict:
    counts = Counter(inst.kind for inst in instances)
    return {k: counts.get(k, 0) for k in SCAN_ORDER}


def patch_tables(bitstream: bytes, instances) -> bytes:
    out = bytearray(bitstream)
    for inst in instances:
        if inst.offset < 0 or inst.end > len(out):
            raise IndexError(f"{inst.kind.name} instance at {inst.offset:#x} is out of bounds")
        out[inst.offset:inst.end] = malicious_table_image(inst.kind)
    return bytes(out)


def disable_self_tests(fw: FirmwareBlob) -> FirmwareBlob:
    """Make the self-test dispatcher report success unconditionally."""
    return replace(fw, self_test_enforced=False)


def reroute_key_derivation(fw: FirmwareBlob) -> FirmwareBlob:
    """Point every AES constructor call site at the ARM software AES."""
    return replace(fw, aes_routing=(ROUTE_SOFTWARE,) * AES_CALL_SITES)


def install_pair_logger(fw: FirmwareBlob) -> FirmwareBlob:
    """Hook the read path so one sector's pairs land in the flash log."""
    return replace(fw, pair_logger=True)


@dataclass
class InterdictionReport:
    found: dict
    patched: list
    already_patched: bool
    flags: list

    def lines(self) -> list:
        out = [f"found {k.name}={n}" for k, n in self.found.items()]
        out += [f"patched {inst.kind.name} at {inst.offset:#07x}" for inst in self.patched]
        out.append(f"instances_patched={len(self.patched)}")
        out += [f"flag {flag}" for flag in self.flags]
        return out


_EXPECTED_MALICIOUS = {
    TableKind.T_TILDE: 16,
    TableKind.MC_INV: 16,
    TableKind.S_FWD: 8,
    TableKind.S_INV: 0,
}


def run_interdiction(image: FlashImage) -> tuple:
    """Apply the full implant. Returns ``(image, InterdictionReport)``.

    The header's firmware hash is left stale on purpose; the self-tests that
    would notice are switched off instead.
    """
    bits = image.bitstream
    instances = scan_tables(bits)
    counts = count_kinds(instances)
    if counts == EXPECTED_COUNTS:
        bits = seal_container(patch_tables(bits, instances))
        patched, already = instances, False
    else:
        mal_counts = count_kinds(scan_tables(bits, malicious=True))
        if mal_counts != _EXPECTED_MALICIOUS:
            raise ScanMismatchError(counts)
        patched, already = [], True

    fw = image.firmware
    flags = []
    if fw.self_test_enforced:
        flags.append("self_test_enforced 1->0")
    if any(route != ROUTE_SOFTWARE for route in fw.aes_routing):
        flags.append(f"aes_routing {AES_CALL_SITES} sites -> software")
    if not fw.pair_logger:
        flags.append("pair_logger 0->1")
    fw = install_pair_logger(reroute_key_derivation(disable_self_tests(fw)))
    image = image.with_firmware(fw).with_bitstream(bits)
    return image, InterdictionReport(counts, patched, already, flags)


def interdict(image: FlashImage) -> FlashImage:
    return run_interdiction(image)[0]
