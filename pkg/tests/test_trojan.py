import random
from dataclasses import replace

import pytest

from xtstrojan.flash import ROUTE_FPGA, ROUTE_SOFTWARE, FirmwareBlob
from xtstrojan.trojan import (
    EXPECTED_COUNTS,
    BitstreamContainer,
    ScanMismatchError,
    TableInstance,
    TableKind,
    build_container,
    canonical_table_image,
    count_kinds,
    disable_self_tests,
    interdict,
    malicious_table_image,
    patch_tables,
    reroute_key_derivation,
    run_interdiction,
    scan_tables,
)

from oracles import FIPS_SBOX, clmul_reduce

FIPS_INV = bytes(FIPS_SBOX.index(y) for y in range(256))


def entry(image, x):
    return image[4 * x:4 * x + 4]


def test_canonical_images():
    t = canonical_table_image(TableKind.T_TILDE)
    assert entry(t, 0x00) == bytes([0x63, 0x52, 0xC6, 0xA5])
    assert entry(canonical_table_image(TableKind.MC_INV), 0x01) == bytes([0x09, 0x0B, 0x0D, 0x0E])
    assert canonical_table_image(TableKind.S_FWD) == FIPS_SBOX
    assert canonical_table_image(TableKind.S_INV) == FIPS_INV
    assert len(canonical_table_image(TableKind.S_FWD)) == 256
    for x in range(256):
        s = FIPS_SBOX[x]
        assert entry(t, x) == bytes([s, FIPS_INV[x], clmul_reduce(s, 2), clmul_reduce(s, 3)])


def test_malicious_images():
    t = malicious_table_image(TableKind.T_TILDE)
    assert entry(t, 0x80) == bytes([0x80, 0x80, 0x1B, 0x9B])
    assert malicious_table_image(TableKind.S_FWD)[0x2A] == 0x2A
    assert malicious_table_image(TableKind.S_INV) == bytes(range(256))
    assert malicious_table_image(TableKind.MC_INV) == canonical_table_image(TableKind.MC_INV)
    for x in range(256):
        assert entry(t, x) == bytes([x, x, clmul_reduce(x, 2), clmul_reduce(x, 3)])


@pytest.mark.parametrize("seed", range(100))
def test_scan_finds_provisioned_tables(seed):
    raw, placed = build_container(random.Random(seed))
    found = scan_tables(raw)
    assert found == sorted(placed)
    assert [i.kind for i in found] == [i.kind for i in sorted(placed)]
    assert count_kinds(found) == EXPECTED_COUNTS
    assert all(i.offset % 4 == 0 for i in found)


def test_container_header(rng):
    raw, placed = build_container(rng)
    header = BitstreamContainer.parse(raw)
    assert header.design_signature == b"SPYRUS_HYDRA2005"
    assert header.part_id.startswith(b"XC3S")
    assert sorted(header.records) == sorted(placed)
    assert len(raw) == 0x45600


def test_scan_blank():
    assert scan_tables(b"\xff" * 0x45600) == []


def test_scan_exact_match_only(rng):
    raw, placed = build_container(rng)
    victim = placed[0]
    damaged = bytearray(raw)
    damaged[victim.offset + 17] ^= 0x40
    counts = count_kinds(scan_tables(bytes(damaged)))
    assert sum(counts.values()) == 39
    assert counts[victim.kind] == EXPECTED_COUNTS[victim.kind] - 1


def test_identical_images_reported_once(rng):
    raw, placed = build_container(rng)
    patched = patch_tables(raw, placed)
    found = scan_tables(patched, malicious=True)
    assert [i.offset for i in found] == [i.offset for i in sorted(placed)]
    counts = count_kinds(found)
    # identity S and S^-1 are the same bytes; the first kind in scan order claims them
    assert counts[TableKind.S_FWD] == 8 and counts[TableKind.S_INV] == 0
    assert counts[TableKind.T_TILDE] == 16 and counts[TableKind.MC_INV] == 16


def test_patch_touches_only_instances(rng):
    raw, placed = build_container(rng)
    patched = patch_tables(raw, scan_tables(raw))
    inside = bytearray(len(raw))
    for inst in placed:
        inside[inst.offset:inst.end] = b"\x01" * inst.length
    changed = [k for k in range(len(raw)) if raw[k] != patched[k]]
    assert all(inside[k] for k in changed)
    # the AES S-box has no fixed points; MC^-1 is left as is
    assert len(changed) == 16 * 1024 + 8 * 256
    for inst in placed:
        assert patched[inst.offset:inst.end] == malicious_table_image(inst.kind)


def test_patch_bounds():
    with pytest.raises(IndexError):
        patch_tables(bytes(100), [TableInstance(0, TableKind.S_FWD, 256)])


def test_disable_self_tests():
    fw = FirmwareBlob(code=b"x", initial_tweak=5, attempt_counter=2)
    off = disable_self_tests(fw)
    assert fw.self_test_enforced and not off.self_test_enforced
    assert replace(off, self_test_enforced=True) == fw
    assert disable_self_tests(off) == off


def test_reroute_key_derivation():
    fw = FirmwareBlob(code=b"x")
    assert fw.aes_routing == (ROUTE_FPGA,) * 12
    rerouted = reroute_key_derivation(fw)
    assert rerouted.aes_routing == (ROUTE_SOFTWARE,) * 12
    assert replace(rerouted, aes_routing=fw.aes_routing) == fw


def test_interdict(honest):
    image = honest[0]
    bad, report = run_interdiction(image)
    assert len(report.patched) == 40 and not report.already_patched
    fw = bad.firmware
    assert not fw.self_test_enforced and fw.pair_logger
    assert fw.aes_routing == (ROUTE_SOFTWARE,) * 12
    # header hash deliberately left alone
    assert bad.region("security_header") == image.region("security_header")
    assert count_kinds(scan_tables(bad.bitstream))[TableKind.T_TILDE] == 0


def test_interdict_idempotent(honest):
    once = interdict(honest[0])
    assert interdict(once) == once
    again, report = run_interdiction(once)
    assert report.already_patched and report.patched == []


def test_interdict_rejects_unknown_bitstream(honest):
    blank = honest[0].with_bitstream(b"\xff" * 0x45600)
    with pytest.raises(ScanMismatchError):
        interdict(blank)
