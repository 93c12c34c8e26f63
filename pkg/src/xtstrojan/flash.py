"""Bit-exact model of the drive's 1 MiB SPI flash.

Layout (half-open ranges)::

    arm1             0x00000 - 0x048C0   boot firmware
    unused1          0x048C0 - 0x10000   0xFF
    arm2             0x10000 - 0x28B78   main firmware, config trailer at the end
    testvectors      0x28B78 - 0x2A200   self-test known answers
    security_header  0x2A200 - 0x2A400
    bitstream        0x2A400 - 0x6FA00   FPGA configuration container
    tail             0x6FA00 - 0x100000  0xFF, pair log at the start once written

Multi-byte integers are little-endian throughout.
"""

import enum
import hashlib
import struct
from dataclasses import dataclass, field, replace

__all__ = [
    "FLASH_SIZE",
    "REGIONS",
    "LOG_OFFSET",
    "FlashFormatError",
    "WrongSizeError",
    "BadSignatureError",
    "MalformedTrailerError",
    "RegionOverflowError",
    "SecurityHeader",
    "FirmwareBlob",
    "TestVectorBlock",
    "PairLog",
    "ImageConfig",
    "FlashImage",
    "VerificationReport",
    "build_image",
    "parse_image",
    "compute_firmware_hash",
    "verify_image",
    "password_digest",
    "read_sd_dump",
    "write_sd_dump",
]

FLASH_SIZE = 0x100000

REGIONS = {
    "arm1": (0x00000, 0x048C0),
    "unused1": (0x048C0, 0x10000),
    "arm2": (0x10000, 0x28B78),
    "testvectors": (0x28B78, 0x2A200),
    "security_header": (0x2A200, 0x2A400),
    "bitstream": (0x2A400, 0x6FA00),
    "tail": (0x6FA00, 0x100000),
}

LOG_OFFSET = REGIONS["tail"][0]
HEADER_SIGNATURE = 0x11223344
FPGA_SIGNATURE = b"SPYRUS_HYDRA2005"
BITSTREAM_LENGTH = REGIONS["bitstream"][1] - REGIONS["bitstream"][0]
SECTOR_SIZE = 512
MAX_ATTEMPTS = 10

ROUTE_FPGA = 0x01
ROUTE_SOFTWARE = 0x02
AES_CALL_SITES = 12


class FlashFormatError(ValueError):
    pass


class WrongSizeError(FlashFormatError):
    pass


class BadSignatureError(FlashFormatError):
    pass


class MalformedTrailerError(FlashFormatError):
    pass


class RegionOverflowError(FlashFormatError):
    pass


def region_size(name: str) -> int:
    start, end = REGIONS[name]
    return end - start


# -- security header ---------------------------------------------------------

_HDR_SIG, _HDR_FPGA, _HDR_LEN, _HDR_HASH = 0x00, 0x04, 0x14, 0x1D0


@dataclass(frozen=True)
class SecurityHeader:
    firmware_hash: bytes
    header_signature: int = HEADER_SIGNATURE
    fpga_signature: bytes = FPGA_SIGNATURE
    bitstream_length: int = BITSTREAM_LENGTH

    def pack(self) -> bytes:
        raw = bytearray(region_size("security_header"))
        struct.pack_into("<I", raw, _HDR_SIG, self.header_signature)
        raw[_HDR_FPGA:_HDR_FPGA + 16] = self.fpga_signature.ljust(16, b"\0")[:16]
        struct.pack_into("<I", raw, _HDR_LEN, self.bitstream_length)
        raw[_HDR_HASH:_HDR_HASH + 48] = self.firmware_hash
        return bytes(raw)

    @classmethod
    def unpack(cls, raw: bytes) -> "SecurityHeader":
        (sig,) = struct.unpack_from("<I", raw, _HDR_SIG)
        (length,) = struct.unpack_from("<I", raw, _HDR_LEN)
        return cls(
            firmware_hash=bytes(raw[_HDR_HASH:_HDR_HASH + 48]),
            header_signature=sig,
            fpga_signature=bytes(raw[_HDR_FPGA:_HDR_FPGA + 16]),
            bitstream_length=length,
        )


# -- firmware trailer --------------------------------------------------------

TRAILER_MAGIC = b"FWCF"
# magic, self_test_enforced, routing[12], initial_tweak, salt[16], digest[48],
# attempt_counter, pair_logger
_TRAILER = struct.Struct("<4sB12sQ16s48sBB")
TRAILER_SIZE = _TRAILER.size


@dataclass(frozen=True)
class FirmwareBlob:
    """Main ARM firmware: opaque code followed by the behavioural trailer."""

    code: bytes
    self_test_enforced: bool = True
    aes_routing: tuple = (ROUTE_FPGA,) * AES_CALL_SITES
    initial_tweak: int = 0x1000
    password_salt: bytes = bytes(16)
    password_digest: bytes = bytes(48)
    attempt_counter: int = 0
    pair_logger: bool = False

    def __post_init__(self):
        if len(self.aes_routing) != AES_CALL_SITES:
            raise MalformedTrailerError(f"expected {AES_CALL_SITES} AES routing flags")
        if any(f not in (ROUTE_FPGA, ROUTE_SOFTWARE) for f in self.aes_routing):
            raise MalformedTrailerError("unknown AES routing flag")
        if not 0 <= self.attempt_counter <= MAX_ATTEMPTS:
            raise MalformedTrailerError(f"attempt counter {self.attempt_counter} out of range")
        if len(self.password_salt) != 16 or len(self.password_digest) != 48:
            raise MalformedTrailerError("bad password field sizes")

    @property
    def has_password(self) -> bool:
        return self.password_digest != bytes(48)

    def pack(self) -> bytes:
        space = region_size("arm2") - TRAILER_SIZE
        if len(self.code) > space:
            raise RegionOverflowError(f"firmware code is {len(self.code)} bytes, room for {space}")
        trailer = _TRAILER.pack(
            TRAILER_MAGIC,
            int(self.self_test_enforced),
            bytes(self.aes_routing),
            self.initial_tweak,
            self.password_salt,
            self.password_digest,
            self.attempt_counter,
            int(self.pair_logger),
        )
        return self.code.ljust(space, b"\xff") + trailer

    @classmethod
    def unpack(cls, region: bytes) -> "FirmwareBlob":
        if len(region) != region_size("arm2"):
            raise MalformedTrailerError("firmware region has the wrong size")
        magic, enforced, routing, tweak, salt, digest, counter, logger = _TRAILER.unpack(
            region[-TRAILER_SIZE:]
        )
        if magic != TRAILER_MAGIC:
            raise MalformedTrailerError("firmware trailer magic missing")
        if enforced > 1 or logger > 1:
            raise MalformedTrailerError("boolean trailer flag out of range")
        return cls(
            code=bytes(region[:-TRAILER_SIZE]),
            self_test_enforced=bool(enforced),
            aes_routing=tuple(routing),
            initial_tweak=tweak,
            password_salt=salt,
            password_digest=digest,
            attempt_counter=counter,
            pair_logger=bool(logger),
        )


def password_digest(password: str | bytes, salt: bytes, rounds: int = 1000) -> bytes:
    if isinstance(password, str):
        password = password.encode("utf-8")
    digest = hashlib.sha384(salt + password).digest()
    for _ in range(rounds - 1):
        digest = hashlib.sha384(digest).digest()
    return digest


# -- test vectors ------------------------------------------------------------

TV_MAGIC = b"TVEC"


class TV(enum.IntEnum):
    CBC_KEY = 1
    CBC_IV = 2
    CBC_INPUT = 3
    CBC_EXPECTED = 4
    XTS_K1 = 5
    XTS_K2 = 6
    XTS_TWEAK = 7
    XTS_INPUT = 8
    XTS_EXPECTED = 9
    SHA_INPUT = 10
    SHA224_EXPECTED = 11
    SHA256_EXPECTED = 12
    SHA384_EXPECTED = 13
    SHA512_EXPECTED = 14


@dataclass(frozen=True)
class TestVectorBlock:
    """Known-answer parameters for the power-up self-tests."""

    __test__ = False  # not a pytest class

    cbc_key: bytes
    cbc_iv: bytes
    cbc_input: bytes
    cbc_expected: bytes
    xts_k1: bytes
    xts_k2: bytes
    xts_tweak: int
    xts_input: bytes
    xts_expected: bytes
    sha_input: bytes
    sha_expected: dict = field(default_factory=dict)

    @classmethod
    def standard(cls) -> "TestVectorBlock":
        from .aes import cbc_encrypt, expand_key
        from .xts import XtsKeys, xts_encrypt_units

        # the device's CBC vector lists a 16-byte key; AES-256 needs 32
        key = b"\x2b" * 32
        iv = b"\x3c" * 16
        data = b"\x11" * 32
        k1, k2 = bytes(range(0x20, 0x40)), bytes(range(0x40, 0x60))
        tweak = 0xA2566E3D7EC48F3B
        x = bytes(range(0xF0, 0x100))
        return cls(
            cbc_key=key,
            cbc_iv=iv,
            cbc_input=data,
            cbc_expected=cbc_encrypt(data, iv, expand_key(key)),
            xts_k1=k1,
            xts_k2=k2,
            xts_tweak=tweak,
            xts_input=x,
            xts_expected=xts_encrypt_units(x, tweak, XtsKeys(k1, k2)),
            sha_input=b"abc",
            sha_expected={
                bits: hashlib.new(f"sha{bits}", b"abc").digest() for bits in (224, 256, 384, 512)
            },
        )

    def _records(self):
        yield TV.CBC_KEY, self.cbc_key
        yield TV.CBC_IV, self.cbc_iv
        yield TV.CBC_INPUT, self.cbc_input
        yield TV.CBC_EXPECTED, self.cbc_expected
        yield TV.XTS_K1, self.xts_k1
        yield TV.XTS_K2, self.xts_k2
        yield TV.XTS_TWEAK, self.xts_tweak.to_bytes(8, "little")
        yield TV.XTS_INPUT, self.xts_input
        yield TV.XTS_EXPECTED, self.xts_expected
        yield TV.SHA_INPUT, self.sha_input
        for bits, tag in (
            (224, TV.SHA224_EXPECTED),
            (256, TV.SHA256_EXPECTED),
            (384, TV.SHA384_EXPECTED),
            (512, TV.SHA512_EXPECTED),
        ):
            yield tag, self.sha_expected[bits]

    def pack(self) -> bytes:
        out = bytearray(TV_MAGIC)
        records = list(self._records())
        out.append(len(records))
        for tag, value in records:
            out += struct.pack("<BH", tag, len(value)) + value
        size = region_size("testvectors")
        if len(out) > size:
            raise RegionOverflowError("test vectors exceed their region")
        return bytes(out.ljust(size, b"\xff"))

    @classmethod
    def unpack(cls, raw: bytes) -> "TestVectorBlock":
        if raw[:4] != TV_MAGIC:
            raise FlashFormatError("test-vector block magic missing")
        count, pos, values = raw[4], 5, {}
        for _ in range(count):
            if pos + 3 > len(raw):
                raise FlashFormatError("truncated test-vector record")
            tag, length = struct.unpack_from("<BH", raw, pos)
            pos += 3
            try:
                values[TV(tag)] = bytes(raw[pos:pos + length])
            except ValueError:
                raise FlashFormatError(f"unknown test-vector tag {tag}") from None
            pos += length
        missing = set(TV) - set(values)
        if missing:
            raise FlashFormatError(f"missing test vectors: {sorted(t.name for t in missing)}")
        return cls(
            cbc_key=values[TV.CBC_KEY],
            cbc_iv=values[TV.CBC_IV],
            cbc_input=values[TV.CBC_INPUT],
            cbc_expected=values[TV.CBC_EXPECTED],
            xts_k1=values[TV.XTS_K1],
            xts_k2=values[TV.XTS_K2],
            xts_tweak=int.from_bytes(values[TV.XTS_TWEAK], "little"),
            xts_input=values[TV.XTS_INPUT],
            xts_expected=values[TV.XTS_EXPECTED],
            sha_input=values[TV.SHA_INPUT],
            sha_expected={
                224: values[TV.SHA224_EXPECTED],
                256: values[TV.SHA256_EXPECTED],
                384: values[TV.SHA384_EXPECTED],
                512: values[TV.SHA512_EXPECTED],
            },
        )


# -- pair log ----------------------------------------------------------------

LOG_MAGIC = b"PLOG"
_LOG_HEAD = struct.Struct("<4sQQ")
PAIR_COUNT = 32
LOG_SIZE = _LOG_HEAD.size + PAIR_COUNT * 32


@dataclass(frozen=True)
class PairLog:
    """Plaintext/ciphertext units of one sector, in ascending unit order."""

    sector_number: int
    initial_tweak: int
    pairs: tuple  # 32 x (plaintext, ciphertext)

    def __post_init__(self):
        if len(self.pairs) != PAIR_COUNT:
            raise ValueError(f"pair log needs exactly {PAIR_COUNT} pairs")
        if any(len(p) != 16 or len(c) != 16 for p, c in self.pairs):
            raise ValueError("pairs must be 16-byte blocks")

    @classmethod
    def from_sector(cls, sector_number, initial_tweak, plaintext, ciphertext):
        pairs = tuple(
            (bytes(plaintext[k:k + 16]), bytes(ciphertext[k:k + 16]))
            for k in range(0, SECTOR_SIZE, 16)
        )
        return cls(sector_number, initial_tweak, pairs)

    def pack(self) -> bytes:
        body = b"".join(p + c for p, c in self.pairs)
        return _LOG_HEAD.pack(LOG_MAGIC, self.sector_number, self.initial_tweak) + body

    @classmethod
    def unpack(cls, raw: bytes) -> "PairLog | None":
        """Decode the log region; ``None`` if nothing has been recorded."""
        if len(raw) < LOG_SIZE or raw[:4] != LOG_MAGIC:
            return None
        _, sector, tweak = _LOG_HEAD.unpack_from(raw)
        body = raw[_LOG_HEAD.size:LOG_SIZE]
        pairs = tuple((body[k:k + 16], body[k + 16:k + 32]) for k in range(0, len(body), 32))
        return cls(sector, tweak, pairs)


# -- image -------------------------------------------------------------------


@dataclass(frozen=True)
class FlashImage:
    data: bytes

    def __post_init__(self):
        object.__setattr__(self, "data", bytes(self.data))
        if len(self.data) != FLASH_SIZE:
            raise WrongSizeError(f"flash image must be {FLASH_SIZE:#x} bytes, got {len(self.data):#x}")

    def region(self, name: str) -> bytes:
        start, end = REGIONS[name]
        return self.data[start:end]

    @property
    def header(self) -> SecurityHeader:
        return SecurityHeader.unpack(self.region("security_header"))

    @property
    def firmware(self) -> FirmwareBlob:
        return FirmwareBlob.unpack(self.region("arm2"))

    @property
    def test_vectors(self) -> TestVectorBlock:
        return TestVectorBlock.unpack(self.region("testvectors"))

    @property
    def bitstream(self) -> bytes:
        return self.region("bitstream")

    @property
    def pair_log(self) -> PairLog | None:
        return PairLog.unpack(self.region("tail"))

    def serialize(self) -> bytes:
        return self.data

    def with_region(self, name: str, content: bytes) -> "FlashImage":
        start, end = REGIONS[name]
        if len(content) != end - start:
            raise RegionOverflowError(f"{name} content must be exactly {end - start:#x} bytes")
        return FlashImage(self.data[:start] + bytes(content) + self.data[end:])

    def with_header(self, header: SecurityHeader) -> "FlashImage":
        return self.with_region("security_header", header.pack())

    def with_firmware(self, fw: FirmwareBlob, rehash: bool = False) -> "FlashImage":
        image = self.with_region("arm2", fw.pack())
        if rehash:
            image = image.with_header(replace(image.header, firmware_hash=compute_firmware_hash(image)))
        return image

    def with_bitstream(self, content: bytes) -> "FlashImage":
        return self.with_region("bitstream", content)

    def with_pair_log(self, log: PairLog) -> "FlashImage":
        tail = bytearray(self.region("tail"))
        raw = log.pack()
        tail[:len(raw)] = raw
        return self.with_region("tail", bytes(tail))


@dataclass
class ImageConfig:
    """Everything needed to lay out a fresh image."""

    firmware: FirmwareBlob
    bitstream: bytes
    arm1: bytes = b""
    test_vectors: TestVectorBlock | None = None


def _fit(name: str, content: bytes, fill: int = 0xFF) -> bytes:
    size = region_size(name)
    if len(content) > size:
        raise RegionOverflowError(f"{name}: {len(content):#x} bytes exceed region size {size:#x}")
    return bytes(content) + bytes([fill]) * (size - len(content))


def build_image(config: ImageConfig) -> FlashImage:
    tv = config.test_vectors or TestVectorBlock.standard()
    parts = {
        "arm1": _fit("arm1", config.arm1),
        "unused1": _fit("unused1", b""),
        "arm2": config.firmware.pack(),
        "testvectors": tv.pack(),
        "security_header": bytes(region_size("security_header")),
        "bitstream": _fit("bitstream", config.bitstream),
        "tail": _fit("tail", b""),
    }
    image = FlashImage(b"".join(parts[name] for name in REGIONS))
    header = SecurityHeader(firmware_hash=compute_firmware_hash(image))
    return image.with_header(header)


def parse_image(raw: bytes) -> FlashImage:
    if len(raw) != FLASH_SIZE:
        raise WrongSizeError(f"flash image must be {FLASH_SIZE:#x} bytes, got {len(raw):#x}")
    image = FlashImage(raw)
    sig = image.header.header_signature
    if sig != HEADER_SIGNATURE:
        raise BadSignatureError(f"security header signature {sig:#010x}, expected {HEADER_SIGNATURE:#010x}")
    image.firmware  # raises MalformedTrailerError
    return image


def compute_firmware_hash(image: FlashImage) -> bytes:
    return hashlib.sha384(image.region("arm2")).digest()


@dataclass
class VerificationReport:
    checks: list  # (name, ok, detail)

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def failed(self) -> list:
        return [name for name, ok, _ in self.checks if not ok]

    def lines(self) -> list:
        return [f"{name}={detail} {'OK' if ok else 'FAIL'}" for name, ok, detail in self.checks]


def verify_image(image: FlashImage) -> VerificationReport:
    header = image.header
    digest = compute_firmware_hash(image)
    checks = [
        ("header_signature", header.header_signature == HEADER_SIGNATURE, f"{header.header_signature:#x}"),
        ("bitstream_length", header.bitstream_length == BITSTREAM_LENGTH, f"{header.bitstream_length:#x}"),
        ("firmware_hash", header.firmware_hash == digest, header.firmware_hash.hex()[:16]),
    ]
    return VerificationReport(checks)


# -- SD card dumps -----------------------------------------------------------


def read_sd_dump(raw: bytes) -> dict:
    """Sector ``n`` lives at byte offset ``512 * n``."""
    if len(raw) % SECTOR_SIZE:
        raise FlashFormatError(f"SD dump length {len(raw)} is not a whole number of sectors")
    return {n: bytes(raw[n * SECTOR_SIZE:(n + 1) * SECTOR_SIZE]) for n in range(len(raw) // SECTOR_SIZE)}


def write_sd_dump(store: dict) -> bytes:
    if not store:
        return b""
    out = bytearray(SECTOR_SIZE * (max(store) + 1))
    for n, sector in store.items():
        out[n * SECTOR_SIZE:(n + 1) * SECTOR_SIZE] = sector
    return bytes(out)
