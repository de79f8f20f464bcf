"""Seed derivation: every component draws from ``SeedSequence(seed, spawn_key)``.

The spawn key is the component path, with string parts hashed by CRC-32, so a
partial re-run of one component reproduces the same stream.
"""
import zlib

import numpy as np


def _key(parts):
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        else:
            out.append(int(p))
    return tuple(out)


def rng_for(seed, *parts):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=_key(parts)))


def child_seed(seed, *parts):
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
