"""Deterministic seed derivation.

All randomness in an experiment flows from one root seed. Sub-tasks get
independent streams via named children: the label path is hashed into a
SeedSequence spawn key, so adding tasks or running them in parallel never
reorders anyone else's draws.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(labels) -> tuple[int, ...]:
    out = []
    for label in labels:
        if isinstance(label, (int, np.integer)):
            out.append(int(label) & 0xFFFFFFFF)
        else:
            out.append(zlib.crc32(str(label).encode("utf-8")))
    return tuple(out)


def seed_sequence(root: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root), spawn_key=_key(labels))


def rng_for(root: int, *labels) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root, *labels))


def child_seed(root: int, *labels) -> int:
    """A plain integer seed for APIs that take one."""
    return int(seed_sequence(root, *labels).generate_state(1)[0])
