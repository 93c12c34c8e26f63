"""Batch front end: provision, interdict, victim-run, recover, selftest, scan, verify.

Exit codes: 0 success, 1 I/O, 2 usage, 3 image parse error, 4 self-test or
verification failure, 5 table-scan mismatch, 6 recovery failure, 7 device
refused an operation.
"""

import argparse
import hashlib
import os
import random
import sys
import tempfile
from pathlib import Path

from .attack import material_from_log, recover_all
from .device import DeviceError, Hsm, Phase, boot, decode_fpga, run_self_tests
from .flash import FlashFormatError, SECTOR_SIZE, parse_image, read_sd_dump, verify_image, write_sd_dump
from .provision import DEFAULT_INITIAL_TWEAK, DEFAULT_PASSWORD, provision
from .trojan import EXPECTED_COUNTS, ScanMismatchError, count_kinds, run_interdiction, scan_tables
from .xts import XtsKeys

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SELFTEST = 4
EXIT_SCAN = 5
EXIT_RECOVERY = 6
EXIT_DEVICE = 7


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _load_image(path):
    try:
        return parse_image(_read(path))
    except FlashFormatError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from None


def _hsm_path(args):
    return args.hsm or f"{args.image}.hsm"


def _load_hsm(args) -> Hsm:
    try:
        return Hsm(XtsKeys.from_bytes(_read(_hsm_path(args))))
    except ValueError as exc:
        raise CliError(f"bad HSM key file: {exc}", EXIT_PARSE) from None


def _hex(text: str) -> int:
    return int(text, 16)


def _emit(lines):
    for line in lines:
        print(line)


# -- commands ----------------------------------------------------------------


def cmd_provision(args):
    tweak = DEFAULT_INITIAL_TWEAK if args.initial_tweak is None else args.initial_tweak
    image, hsm = provision(args.seed, args.password, tweak)
    atomic_write(args.image, image.serialize())
    atomic_write(_hsm_path(args), hsm.keys.to_bytes())
    if args.sd:
        atomic_write(args.sd, b"")
    _emit(verify_image(image).lines())
    print(f"initial_tweak={tweak:#x}")
    return EXIT_OK


def cmd_interdict(args):
    image = _load_image(args.image)
    found = count_kinds(scan_tables(image.bitstream))
    if found != EXPECTED_COUNTS:
        _emit(f"found {k.name}={n}" for k, n in found.items())
        raise CliError("canonical tables not found as expected; refusing to patch", EXIT_SCAN)
    try:
        image, report = run_interdiction(image)
    except ScanMismatchError as exc:
        raise CliError(str(exc), EXIT_SCAN) from None
    atomic_write(args.out, image.serialize())
    _emit(report.lines())
    return EXIT_OK


def _parse_script(text):
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *rest = line.split(maxsplit=1)
        steps.append((lineno, op.upper(), rest[0] if rest else ""))
    return steps


def _write_source(source, rng):
    if source.startswith("random:"):
        return rng.randbytes(int(source[len("random:"):], 0))
    if source.startswith("file:"):
        return _read(source[len("file:"):])
    raise CliError(f"unknown data source {source!r}", EXIT_USAGE)


def cmd_victim_run(args):
    image = _load_image(args.image)
    hsm = _load_hsm(args)
    sd = read_sd_dump(_read(args.sd)) if args.sd and Path(args.sd).exists() else {}
    device = boot(image, hsm, sd)
    if device.phase is Phase.ERROR:
        _emit(device.boot_report.lines())
        reason = device.boot_problem or "failed: " + ", ".join(device.boot_report.failed())
        raise CliError(f"device entered ERROR state during boot ({reason})", EXIT_SELFTEST)

    rng = random.Random(args.seed)
    truth = {}
    try:
        for lineno, op, arg in _parse_script(_read(args.script).decode()):
            if op == "AUTH":
                ok = device.authenticate(arg)
                print(f"AUTH {'OK' if ok else 'FAIL'} attempts={device.firmware.attempt_counter}")
                if device.phase is Phase.ERROR:
                    raise CliError("secure channel failed; device in ERROR state", EXIT_DEVICE)
            elif op == "WRITE":
                sector_text, source = arg.split(maxsplit=1)
                sector = int(sector_text, 0)
                data = _write_source(source, rng)
                device.write_data(sector, data)
                for k in range(len(data) // SECTOR_SIZE):
                    truth[sector + k] = data[k * SECTOR_SIZE:(k + 1) * SECTOR_SIZE]
                print(f"WRITE {sector} sectors={len(data) // SECTOR_SIZE}")
            elif op == "READ":
                sector_text, count_text = arg.split()
                data = device.read_data(int(sector_text, 0), int(count_text, 0))
                print(f"READ {int(sector_text, 0)} sectors={len(data) // SECTOR_SIZE} "
                      f"sha256={hashlib.sha256(data).hexdigest()}")
            elif op == "LOCK":
                device.lock()
                print("LOCK")
            else:
                raise CliError(f"script line {lineno}: unknown command {op}", EXIT_USAGE)
    except (DeviceError, ValueError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError(f"device refused operation: {exc}", EXIT_DEVICE) from None
    finally:
        atomic_write(args.image, device.image.serialize())
        if args.sd:
            atomic_write(args.sd, write_sd_dump(device.sd))

    if args.out:
        atomic_write(args.out, write_sd_dump(truth))
    if device.image.pair_log is not None:
        print(f"pair_log sector={device.image.pair_log.sector_number}")
    return EXIT_OK


def cmd_recover(args):
    image = _load_image(args.image)
    log = image.pair_log
    if log is None:
        raise CliError("no pair log in the flash image", EXIT_RECOVERY)
    try:
        plaintext, report = recover_all(_read(args.sd), material_from_log(log))
    except FlashFormatError as exc:
        raise CliError(f"malformed SD dump: {exc}", EXIT_RECOVERY) from None
    atomic_write(args.out, plaintext)
    _emit(report.lines())
    return EXIT_OK


def cmd_selftest(args):
    image = _load_image(args.image)
    sbox, _, problem = decode_fpga(image.bitstream)
    if sbox is None:
        print("FPGA-CONFIG FAIL")
        raise CliError(problem, EXIT_SELFTEST)
    report = run_self_tests(image, sbox)
    _emit(report.lines())
    return EXIT_OK if report.ok else EXIT_SELFTEST


def cmd_scan(args):
    image = _load_image(args.image)
    instances = scan_tables(image.bitstream, malicious=args.malicious)
    for inst in instances:
        print(f"{inst.kind.name} offset={inst.offset:#07x} length={inst.length}")
    _emit(f"count {k.name}={n}" for k, n in count_kinds(instances).items())
    print(f"total={len(instances)}")
    return EXIT_OK


def cmd_verify(args):
    report = verify_image(_load_image(args.image))
    _emit(report.lines())
    return EXIT_OK if report.ok else EXIT_SELFTEST


def build_parser():
    parser = argparse.ArgumentParser(prog="xtstrojan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--image", required=True, help="flash image path")
        return p

    p = command("provision", cmd_provision, "build an honest flash image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sd", help="empty SD dump to create")
    p.add_argument("--hsm", help="HSM key file (default: <image>.hsm)")
    p.add_argument("--password", default=DEFAULT_PASSWORD)
    p.add_argument("--initial-tweak", type=_hex)

    p = command("interdict", cmd_interdict, "implant the S-box Trojan")
    p.add_argument("--out", required=True)

    p = command("victim-run", cmd_victim_run, "run a scripted user session")
    p.add_argument("--sd", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--hsm")
    p.add_argument("--seed", type=int, default=0, help="seed for random: write sources")
    p.add_argument("--out", help="write the plaintext the victim stored, in dump layout")

    p = command("recover", cmd_recover, "recover user data from a Trojaned dump")
    p.add_argument("--sd", required=True)
    p.add_argument("--out", required=True)

    command("selftest", cmd_selftest, "run the power-up known-answer tests")
    p = command("scan", cmd_scan, "list substitution tables in the bitstream")
    p.add_argument("--malicious", action="store_true", help="look for the patched images")
    command("verify", cmd_verify, "check the security header")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
