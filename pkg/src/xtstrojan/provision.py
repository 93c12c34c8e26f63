"""Factory provisioning: one seed fixes keys, firmware bytes and table placement."""

import random

from .device import Hsm
from .flash import (
    FirmwareBlob,
    ImageConfig,
    TRAILER_SIZE,
    build_image,
    password_digest,
    region_size,
)
from .trojan import build_container
from .xts import XtsKeys

__all__ = ["DEFAULT_INITIAL_TWEAK", "DEFAULT_PASSWORD", "provision"]

DEFAULT_INITIAL_TWEAK = 0x1000
DEFAULT_PASSWORD = "correct horse"


def provision(seed: int = 0, password: str = DEFAULT_PASSWORD,
              initial_tweak: int = DEFAULT_INITIAL_TWEAK):
    """Build an honest image. Returns ``(FlashImage, Hsm)``."""
    rng = random.Random(seed)
    keys = XtsKeys(rng.randbytes(32), rng.randbytes(32))
    container, _ = build_container(rng)
    salt = rng.randbytes(16)
    fw = FirmwareBlob(
        code=rng.randbytes(region_size("arm2") - TRAILER_SIZE - 0x100),
        initial_tweak=initial_tweak,
        password_salt=salt,
        password_digest=password_digest(password, salt) if password else bytes(48),
    )
    arm1 = rng.randbytes(region_size("arm1") - 0x40)
    image = build_image(ImageConfig(firmware=fw, bitstream=container, arm1=arm1))
    return image, Hsm(keys)
