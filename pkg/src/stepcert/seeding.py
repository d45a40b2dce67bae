"""Named seed derivation so every random stream hangs off one root seed."""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *names) -> int:
    """Return a 64-bit seed for the stream ``root/name1/name2/...``.

    The mapping is a hash, so adding a new stream never shifts existing ones.
    """
    key = "/".join([str(int(root) & _MASK64), *map(str, names)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *names))
