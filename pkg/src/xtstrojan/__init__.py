"""Simulation of an S-box Trojan in an XTS-AES-256 encrypted flash drive.

Submodules: ``aes`` and ``linear`` (cipher and its linearisation), ``xts``,
``flash`` (image layout), ``trojan`` (scanner and patcher), ``device``
(drive state machine), ``attack`` (recovery) and ``cli``.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
