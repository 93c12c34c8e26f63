"""State machine of the encrypted USB drive.

Boot configures the FPGA from the flash container, runs the power-up
self-tests when the firmware enforces them, and lands in LOCKED or ERROR.
User data always goes through the FPGA cipher, whose S-box is read out of
the container's BRAM images; patching those images is what turns the
device into the Trojaned one.
"""

import enum
import hashlib
from dataclasses import dataclass, field, replace

from .aes import (
    SBoxPair,
    canonical_sbox,
    cbc_decrypt,
    cbc_encrypt,
    encrypt_block,
    expand_key,
)
from .flash import (
    FPGA_SIGNATURE,
    MAX_ATTEMPTS,
    ROUTE_SOFTWARE,
    SECTOR_SIZE,
    FlashImage,
    PairLog,
    compute_firmware_hash,
    parse_image,
    password_digest,
)
from .trojan import BitstreamContainer, ContainerError, TableKind, container_crc
from .xts import XtsKeys, xts_decrypt_sector, xts_decrypt_units, xts_encrypt_sector, xts_encrypt_units

__all__ = [
    "Phase",
    "DeviceError",
    "PhaseError",
    "MissingSectorError",
    "Hsm",
    "SdCardStore",
    "CheckReport",
    "Device",
    "boot",
    "decode_fpga",
    "run_self_tests",
]


class Phase(enum.Enum):
    POWERED_OFF = "POWERED_OFF"
    ERROR = "ERROR"
    LOCKED = "LOCKED"
    UNLOCKED = "UNLOCKED"


class DeviceError(RuntimeError):
    pass


class PhaseError(DeviceError):
    pass


class MissingSectorError(DeviceError, KeyError):
    pass


@dataclass(frozen=True)
class Hsm:
    """Stand-in for the secure element: it holds the XTS keys and nothing reads them out."""

    keys: XtsKeys

    @property
    def channel_key(self) -> bytes:
        return hashlib.sha256(b"secure-channel" + self.keys.k2).digest()


class SdCardStore(dict):
    """Sector number to 512-byte ciphertext."""

    def __setitem__(self, sector: int, data: bytes):
        if len(data) != SECTOR_SIZE:
            raise ValueError(f"SD sectors are {SECTOR_SIZE} bytes, got {len(data)}")
        super().__setitem__(sector, bytes(data))


@dataclass
class CheckReport:
    checks: list = field(default_factory=list)  # (name, ok)

    def add(self, name: str, ok: bool):
        self.checks.append((name, bool(ok)))

    @property
    def ok(self) -> bool:
        return all(ok for _, ok in self.checks)

    def failed(self) -> list:
        return [name for name, ok in self.checks if not ok]

    def __getitem__(self, name: str) -> bool:
        for n, ok in self.checks:
            if n == name:
                return ok
        raise KeyError(name)

    def lines(self) -> list:
        return [f"{name} {'PASS' if ok else 'FAIL'}" for name, ok in self.checks]


def decode_fpga(bitstream: bytes) -> tuple:
    """Configure the FPGA model from a container.

    Returns ``(sbox_or_None, design_signature, problem)``; ``problem`` is a
    short reason string when configuration failed.
    """
    try:
        header = BitstreamContainer.parse(bitstream)
    except ContainerError as exc:
        return None, b"", str(exc)
    if container_crc(bitstream) != header.crc:
        return None, header.design_signature, "bitstream CRC mismatch"
    try:
        fwd = header.first(TableKind.S_FWD)
        inv = header.first(TableKind.S_INV)
        sbox = SBoxPair(bitstream[fwd.offset:fwd.end], bitstream[inv.offset:inv.end])
    except (ContainerError, ValueError) as exc:
        return None, header.design_signature, f"S-box BRAMs unusable: {exc}"
    return sbox, header.design_signature, ""


def run_self_tests(image: FlashImage, fpga_sbox: SBoxPair) -> CheckReport:
    """Known-answer tests from the flash vector block plus the firmware hash."""
    tv = image.test_vectors
    report = CheckReport()

    ks = expand_key(tv.cbc_key, fpga_sbox)
    enc = cbc_encrypt(tv.cbc_input, tv.cbc_iv, ks, fpga_sbox)
    dec = cbc_decrypt(tv.cbc_expected, tv.cbc_iv, ks, fpga_sbox)
    report.add("AES-256-CBC", enc == tv.cbc_expected and dec == tv.cbc_input)

    keys = XtsKeys(tv.xts_k1, tv.xts_k2)
    enc = xts_encrypt_units(tv.xts_input, tv.xts_tweak, keys, fpga_sbox)
    dec = xts_decrypt_units(tv.xts_expected, tv.xts_tweak, keys, fpga_sbox)
    report.add("AES-256-XTS", enc == tv.xts_expected and dec == tv.xts_input)

    for bits in (224, 256, 384, 512):
        report.add(f"SHA-{bits}", hashlib.new(f"sha{bits}", tv.sha_input).digest() == tv.sha_expected[bits])

    report.add("FIRMWARE-SHA-384", compute_firmware_hash(image) == image.header.firmware_hash)
    return report


class Device:
    """One powered drive. Operations are strictly sequential."""

    def __init__(self, image: FlashImage, hsm: Hsm, sd: dict | None = None):
        self.image = image
        self.hsm = hsm
        self.sd = SdCardStore(sd or {})
        self.phase = Phase.POWERED_OFF
        self.fpga_sbox: SBoxPair | None = None
        self.boot_report = CheckReport()
        self.boot_problem = ""
        self.self_test_report: CheckReport | None = None
        self.pair_log_writes = 0

    # -- power-up ---------------------------------------------------------

    def boot(self) -> Phase:
        self.image = parse_image(self.image.serialize())
        self.boot_report = CheckReport()
        self.self_test_report = None
        sbox, signature, problem = decode_fpga(self.image.bitstream)
        self.boot_report.add("FPGA-CONFIG", sbox is not None)
        self.fpga_sbox = sbox
        if sbox is None:
            self.boot_problem = problem
            self.phase = Phase.ERROR
            return self.phase
        self.boot_problem = ""
        if self.image.firmware.self_test_enforced:
            self.boot_report.add("FPGA-SIGNATURE", signature == FPGA_SIGNATURE)
            self.self_test_report = run_self_tests(self.image, sbox)
            self.boot_report.checks.extend(self.self_test_report.checks)
        self.phase = Phase.LOCKED if self.boot_report.ok else Phase.ERROR
        return self.phase

    # -- persistent firmware state ----------------------------------------

    @property
    def firmware(self):
        return self.image.firmware

    def _store_firmware(self, fw):
        # the genuine firmware keeps its own hash current; a stale hash stays stale
        intact = compute_firmware_hash(self.image) == self.image.header.firmware_hash
        self.image = self.image.with_firmware(fw, rehash=intact)

    def _require(self, *phases):
        if self.phase not in phases:
            wanted = "/".join(p.value for p in phases)
            raise PhaseError(f"operation needs phase {wanted}, device is {self.phase.value}")

    # -- host session -----------------------------------------------------

    def open_secure_channel(self) -> bool:
        """Run each AES constructor site against the host's standard AES.

        Sites routed to a Trojaned FPGA disagree with the host and the
        channel cannot be established.
        """
        key = self.hsm.channel_key
        reference = expand_key(key)
        for site, route in enumerate(self.firmware.aes_routing):
            box = canonical_sbox() if route == ROUTE_SOFTWARE else self.fpga_sbox
            challenge = hashlib.sha256(b"site" + bytes([site])).digest()[:16]
            if encrypt_block(challenge, expand_key(key, box), box) != encrypt_block(challenge, reference):
                return False
        return True

    def _channel_or_error(self):
        if not self.open_secure_channel():
            self.phase = Phase.ERROR
            raise DeviceError("secure channel initialisation failed")

    def set_password(self, password: str | bytes):
        fw = self.firmware
        if fw.has_password:
            self._require(Phase.UNLOCKED)
        else:
            self._require(Phase.LOCKED, Phase.UNLOCKED)
        self._channel_or_error()
        salt = hashlib.sha256(b"salt" + fw.password_salt + fw.password_digest).digest()[:16]
        self._store_firmware(
            replace(fw, password_salt=salt, password_digest=password_digest(password, salt), attempt_counter=0)
        )

    def authenticate(self, password: str | bytes) -> bool:
        """Check the password. Ten consecutive failures erase the SD card.

        Once wiped the counter stays at its limit and every attempt fails.
        """
        self._require(Phase.LOCKED)
        fw = self.firmware
        if fw.attempt_counter >= MAX_ATTEMPTS:
            return False
        try:
            self._channel_or_error()
        except DeviceError:
            return False
        if fw.has_password and password_digest(password, fw.password_salt) == fw.password_digest:
            if fw.attempt_counter:
                self._store_firmware(replace(fw, attempt_counter=0))
            self.phase = Phase.UNLOCKED
            return True
        counter = fw.attempt_counter + 1
        self._store_firmware(replace(fw, attempt_counter=counter))
        if counter >= MAX_ATTEMPTS:
            self.sd.clear()
        return False

    def lock(self):
        self._require(Phase.UNLOCKED)
        self.phase = Phase.LOCKED

    # -- data path --------------------------------------------------------

    def tweak_for(self, sector: int) -> int:
        return self.firmware.initial_tweak + sector

    def write_data(self, start_sector: int, data: bytes):
        self._require(Phase.UNLOCKED)
        if len(data) % SECTOR_SIZE:
            raise ValueError(f"write length {len(data)} is not a multiple of {SECTOR_SIZE}")
        base = self.firmware.initial_tweak
        for k in range(len(data) // SECTOR_SIZE):
            sector = start_sector + k
            chunk = data[k * SECTOR_SIZE:(k + 1) * SECTOR_SIZE]
            self.sd[sector] = xts_encrypt_sector(chunk, base + sector, self.hsm.keys, self.fpga_sbox)

    def read_data(self, start_sector: int, n_sectors: int) -> bytes:
        self._require(Phase.UNLOCKED)
        fw = self.firmware
        out = []
        for sector in range(start_sector, start_sector + n_sectors):
            try:
                cipher = self.sd[sector]
            except KeyError:
                raise MissingSectorError(f"sector {sector} has never been written") from None
            out.append(xts_decrypt_sector(cipher, fw.initial_tweak + sector, self.hsm.keys, self.fpga_sbox))
        if fw.pair_logger and out and self.image.pair_log is None:
            log = PairLog.from_sector(start_sector, fw.initial_tweak, out[0], self.sd[start_sector])
            self.image = self.image.with_pair_log(log)
            self.pair_log_writes += 1
        return b"".join(out)


def boot(image: FlashImage | bytes, hsm: Hsm, sd: dict | None = None) -> Device:
    if not isinstance(image, FlashImage):
        image = parse_image(bytes(image))
    device = Device(image, hsm, sd)
    device.boot()
    return device
