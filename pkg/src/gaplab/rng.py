"""Counter-based random streams for reproducible parallel Monte Carlo.

Every (seed, stream id) pair keys an independent Philox generator, so the
sample index space can be pre-partitioned into fixed chunks and each chunk
bound to its own stream. Results then do not depend on how chunks are
scheduled across workers.

Stream ids below 2**32 are reserved for sample chunks; ids at AUX_BASE and
above are for per-experiment fixtures (random observables, Haar bases,
Hamiltonians) so that changing the sample count never reshuffles fixtures.
"""

from __future__ import annotations

import numpy as np

CHUNK_SIZE = 4096  # fixed chunk of the sample index space, independent of workers
AUX_BASE = 1 << 32

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent generator keyed by (seed, stream_id)."""
    if stream_id < 0:
        raise ValueError("stream_id must be nonnegative")
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def chunk_stream(seed: int, chunk_index: int, namespace: int = 0) -> np.random.Generator:
    """Stream for sample chunk ``chunk_index`` within a namespace.

    Namespaces separate independent sampling passes of one experiment (for
    example a reference half and a tail half) without any risk of stream
    reuse. Each namespace admits 2**24 chunks.
    """
    if not 0 <= namespace < 256:
        raise ValueError("namespace out of range")
    if not 0 <= chunk_index < (1 << 24):
        raise ValueError("chunk_index out of range")
    return stream(seed, (namespace << 24) | chunk_index)


def aux_stream(seed: int, slot: int) -> np.random.Generator:
    """Stream for a fixed per-experiment object, independent of sample count."""
    if slot < 0:
        raise ValueError("slot must be nonnegative")
    return stream(seed, AUX_BASE + slot)


def chunk_sizes(n_total: int, chunk: int = CHUNK_SIZE) -> list[int]:
    """Split n_total samples into fixed-size chunks (last one may be short)."""
    if n_total < 0:
        raise ValueError("sample count must be nonnegative")
    full, rest = divmod(n_total, chunk)
    sizes = [chunk] * full
    if rest:
        sizes.append(rest)
    return sizes
