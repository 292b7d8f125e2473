"""Deterministic seed derivation and buffered random draws.

Every stochastic routine takes an explicit ``numpy.random.Generator``.
Experiment code derives one generator per (task, replicate) from a 64-bit
master seed with a counter-based mix, so results are independent of worker
scheduling and adding a task never perturbs the streams of existing tasks.

The mix is fixed for all time: ``blake2b(master || task_name || counter)``
truncated to 128 bits and fed to PCG64.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "derive_rng", "BufferedDraws"]

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, task: str, counter: int = 0) -> int:
    """Derive a 128-bit child seed from (master, task label, counter)."""
    h = hashlib.blake2b(digest_size=16)
    h.update((master_seed & _MASK64).to_bytes(8, "little"))
    h.update(task.encode("utf-8"))
    h.update((counter & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def derive_rng(master_seed: int, task: str, counter: int = 0) -> np.random.Generator:
    """PCG64 generator for one (task, replicate) stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, task, counter)))


class BufferedDraws:
    """Block-buffered scalar draws for tight event loops.

    Pulls exponential and uniform variates from a Generator in blocks and
    hands them out as plain Python floats, which is several times faster
    than per-call Generator methods.
    """

    __slots__ = ("_gen", "_block", "_exp", "_ie", "_uni", "_iu")

    def __init__(self, gen: np.random.Generator, block: int = 16384):
        self._gen = gen
        self._block = block
        self._exp = gen.standard_exponential(block).tolist()
        self._ie = 0
        self._uni = gen.random(block).tolist()
        self._iu = 0

    def expo(self) -> float:
        """One standard exponential variate."""
        i = self._ie
        if i == self._block:
            self._exp = self._gen.standard_exponential(self._block).tolist()
            i = 0
        self._ie = i + 1
        return self._exp[i]

    def u01(self) -> float:
        """One uniform variate on [0, 1)."""
        i = self._iu
        if i == self._block:
            self._uni = self._gen.random(self._block).tolist()
            i = 0
        self._iu = i + 1
        return self._uni[i]
