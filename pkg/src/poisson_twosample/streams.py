"""Deterministic random-stream derivation.

Every source of randomness in this package flows from a single master seed
through a documented counter-based scheme:

* ``stream(master, *path)`` returns an independent ``numpy.random.Generator``
  backed by Philox, keyed by ``SeedSequence([master, *path])``.  The path is a
  tuple of small integers; the tag constants below fix the layout used by the
  experiment harness, so that simulation ``i`` of a study reproduces exactly
  regardless of how work is split across processes.

* Rademacher sign matrices are drawn from the raw Philox output: entry
  ``(b, i)`` of a ``rows x cols`` matrix is the top bit of raw 64-bit word
  number ``b * blocks(cols) * 4 + i`` of the derived stream, where
  ``blocks(cols) = ceil(cols / 4)``.  Rows are padded to whole Philox counter
  blocks (4 words), so row ``b`` is reachable in O(1) via
  ``Philox.advance(b * blocks(cols))``; ``rademacher_rows`` exploits this.
  Replicate ``b`` of a bootstrap therefore owns a fixed counter range of the
  sign stream, independent of how many replicates are drawn.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Sub-stream tags used by the experiment harness: simulation i of a study with
# master seed s draws its first process from (s, i, TAG_F), the second from
# (s, i, TAG_G) and the signs for the c-th test of the study from
# (s, i, TAG_SIGNS, c).
TAG_F = 1
TAG_G = 2
TAG_SIGNS = 3


def seed_sequence(master: int, *path: int) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream identified by (master, *path)."""
    words = [int(master) & _MASK64] + [int(p) & _MASK64 for p in path]
    return np.random.SeedSequence(words)


def stream(master: int, *path: int) -> np.random.Generator:
    """Independent Philox-backed generator for (master, *path)."""
    return np.random.Generator(np.random.Philox(seed_sequence(master, *path)))


def _sign_blocks(cols: int) -> int:
    # Philox emits 4 64-bit words per counter increment; pad each row to
    # whole blocks so rows sit at fixed counter offsets.
    return max(1, -(-cols // 4))


def _raw_to_signs(raw: np.ndarray, rows: int, cols: int) -> np.ndarray:
    signs = 1 - 2 * (raw >> 63).astype(np.int8)
    return signs.reshape(rows, -1)[:, :cols]


def rademacher_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """``rows x cols`` matrix of i.i.d. +-1 signs (int8), row b = replicate b.

    ``rng`` must be a freshly derived stream (its counter at a block
    boundary) for the random-access layout documented above to hold.
    """
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=np.int8)
    nwords = rows * _sign_blocks(cols) * 4
    raw = rng.bit_generator.random_raw(nwords)
    return _raw_to_signs(raw, rows, cols)


def rademacher_rows(
    seed_seq: np.random.SeedSequence, row_start: int, rows: int, cols: int
) -> np.ndarray:
    """Rows ``[row_start, row_start + rows)`` of ``rademacher_matrix``.

    Random access without generating earlier rows; used to verify (and to
    exploit, under worker parallelism) the counter-based replicate layout.
    """
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols), dtype=np.int8)
    bg = np.random.Philox(seed_seq)
    blocks = _sign_blocks(cols)
    bg.advance(row_start * blocks)
    raw = bg.random_raw(rows * blocks * 4)
    return _raw_to_signs(raw, rows, cols)
