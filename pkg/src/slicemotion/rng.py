"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from the experiment seed plus a tuple of labels, e.g.
``substream(seed, "trajectory", "axial")``. Labels are hashed with BLAKE2b so
the same (seed, labels) pair gives the same stream on every platform and in
every call order.
"""

import hashlib

import numpy as np


def philox_key(seed: int, *labels: int | str) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(16, "little", signed=True))
    for label in labels:
        if isinstance(label, str):
            h.update(b"s" + label.encode())
        else:
            h.update(b"i" + int(label).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def substream(seed: int, *labels: int | str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=philox_key(seed, *labels)))
