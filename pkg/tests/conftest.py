import math

import pytest

from odin_pipeline import uniform_database


@pytest.fixture
def uniform8():
    """8 layers of 1 ms, plus one mode that doubles every layer."""
    return uniform_database(8, (2.0,))


def brute_force_best(state, db, ep_count):
    """Reference enumerator written independently of the package.

    Recursively builds every composition, sums stage times straight from the
    raw matrix and keeps the (bottleneck, counts) minimum, so ties fall to
    the lexicographically smallest counts.
    """
    m = db.layer_count
    col = [[float(db.times[l, k]) for l in range(m)] for k in range(db.mode_count)]
    best = None

    def walk(prefix, used):
        nonlocal best
        pos = len(prefix)
        if pos == ep_count - 1:
            counts = prefix + [m - used]
            start = 0
            worst = 0.0
            for i, c in enumerate(counts):
                worst = max(worst, math.fsum(col[state[i]][start:start + c]))
                start += c
            key = (worst, tuple(counts))
            if best is None or key < best:
                best = key
            return
        for c in range(m - used + 1):
            walk(prefix + [c], used + c)

    walk([], 0)
    return best[1], 1.0 / best[0]
