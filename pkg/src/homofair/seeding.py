"""Stable seed derivation for independent random streams.

Every random stream in the toolkit is keyed by a tuple of identifying
values (master seed, grid coordinates, model name, run index, ...).
The derivation must be reproducible across processes and Python
invocations, so it is built on SHA-256 rather than Python's salted
``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Map a tuple of identifying values to a 63-bit seed.

    Floats are keyed by their exact ``repr`` so that e.g. 0.1 and
    0.1000000001 derive different streams while the same value always
    derives the same stream.
    """
    tokens = []
    for part in parts:
        if isinstance(part, float):
            tokens.append(repr(part))
        elif isinstance(part, (int, np.integer)):
            tokens.append(str(int(part)))
        elif isinstance(part, str):
            tokens.append(part)
        else:
            raise TypeError(f"unsupported seed component type: {type(part).__name__}")
    digest = hashlib.sha256("\x1f".join(tokens).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_from(*parts) -> np.random.Generator:
    """Independent generator for the stream identified by ``parts``."""
    return np.random.default_rng(derive_seed(*parts))
