"""Deterministic derivation of named random streams from a single root seed.

Every stochastic routine in the package takes either an explicit
``numpy.random.Generator`` or an integer root seed.  Substreams are derived
by hashing the root together with a purpose label (plus optional integer
counters such as replicate or greedy-step indices).  Two consequences:

* adding a new consumer of randomness never perturbs existing streams, and
* results are independent of scheduling/worker count, because each task's
  stream is a pure function of ``(root, labels...)``.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "as_generator"]

_MASK64 = (1 << 64) - 1


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root: int, *labels) -> np.random.Generator:
    """Return a generator for the stream named ``(root, *labels)``.

    Labels may be strings (hashed) or integers (used directly), e.g.
    ``substream(42, "traces", 17)`` for the 17th trace-sampling stream.
    """
    entropy = [int(root) & _MASK64] + [_label_word(lb) for lb in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
