"""Named, counter-derived random streams.

Every draw in the library comes from a stream keyed by (seed, purpose,
sub-keys...), so graph realization, vertex noise, edge noise, initial
values and tree sampling can each be fixed or varied independently, and
parallel execution order can never change results.
"""

from __future__ import annotations

import numpy as np

# Stream purposes.  These are part of the reproducibility contract:
# never reorder or reuse the numbers.
GRAPH = 0       # half-edge pairing / edge coin flips
ATTRS = 1       # vertex attribute sampling
ZETA = 2        # per-vertex noise, sub-keyed by step
XI = 3          # per-edge-slot noise, sub-keyed by step
INIT = 4        # initial value vectors, sub-keyed by copy index
TREE = 5        # tree node sampling
POOL = 6        # population-dynamics body draws, sub-keyed by iteration
POOL_ROOT = 7   # population-dynamics root draws, sub-keyed by iteration
ROOTS = 8       # root sampling for neighborhood surveys
MOMENTS = 9     # Monte Carlo moment estimation
TASK = 10       # experiment task keying (replica, size)
BOOT = 11       # bootstrap resampling inside reports


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream (seed, *key); same inputs give the same stream."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def child_seed(seed: int, *key: int) -> int:
    """Derive an integer sub-seed usable as the root seed of a nested run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])
