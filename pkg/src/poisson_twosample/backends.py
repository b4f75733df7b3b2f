"""Hot numeric kernels with selectable numpy/numba implementations.

Two operations dominate the runtime of every study: evaluating the quadratic
chaos statistic for a batch of sign vectors against a dense Gram matrix
(``chaos_batch``), and accumulating signed per-cell sums for the Haar feature
paths (``cell_sum_batch``).  Both exist in two implementations:

* ``numpy`` -- BLAS matmul / cumulative-sum formulations;
* ``numba`` -- explicit ``@njit(parallel=True)`` loops.

Neither dominates: on BLAS-backed installs the matmul form of
``chaos_batch`` is a few times faster than the compiled loops, while the
numba scatter loop wins ``cell_sum_batch`` by more than an order of
magnitude (see benchmarks/bench_backends.py).  The default mode ``auto``
therefore routes each kernel to its measured winner; set the
``POISSON_TWOSAMPLE_BACKEND`` environment variable to ``numpy`` or ``numba``
(read once at import) to force a uniform implementation.

``chaos_single`` (one sign vector) is separate: it always uses a sequential
compiled loop summing ordered pairs row by row with the diagonal skipped, so
its result is bit-identical to a naive double loop over ordered pairs.  Batch
results are deterministic per backend but may differ from the single path in
the last ulps because BLAS reorders reductions.

Within one replicate batch, chunking is fixed (``_CHUNK`` rows), so results
never depend on how many worker processes split a study.  BLAS results do
depend on the BLAS thread count; the experiment harness pins BLAS to one
thread per simulation to keep studies byte-reproducible for any worker count.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

BACKEND_ENV = "POISSON_TWOSAMPLE_BACKEND"

_CHUNK = 4096


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _chaos_batch_numpy(gram: np.ndarray, signs: np.ndarray) -> np.ndarray:
    e = signs.astype(np.float64, copy=False)
    nrep = e.shape[0]
    out = np.empty(nrep)
    trace = float(np.trace(gram))
    for start in range(0, nrep, _CHUNK):
        chunk = e[start : start + _CHUNK]
        out[start : start + _CHUNK] = np.einsum("bi,bi->b", chunk @ gram, chunk)
    return out - trace


def _cell_sum_batch_numpy(cells: np.ndarray, ncells: int, signs: np.ndarray) -> np.ndarray:
    e = signs.astype(np.float64, copy=False)
    nrep = e.shape[0]
    if e.shape[1] == 0 or ncells == 0:
        return np.zeros((nrep, ncells))
    order = np.argsort(cells, kind="stable")
    sorted_cells = cells[order]
    bounds = np.searchsorted(sorted_cells, np.arange(ncells + 1))
    csum = np.concatenate([np.zeros((nrep, 1)), np.cumsum(e[:, order], axis=1)], axis=1)
    return csum[:, bounds[1:]] - csum[:, bounds[:-1]]


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily on first use)
# ---------------------------------------------------------------------------

try:
    import numba
    from numba import njit, prange

    # workqueue is always available and avoids the TBB version probe warning
    numba.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _chaos_batch_numba(gram, signs):
        nrep, npts = signs.shape
        out = np.empty(nrep)
        trace = 0.0
        for i in range(npts):
            trace += gram[i, i]
        for b in prange(nrep):
            e = signs[b]
            acc = 0.0
            for i in range(npts):
                row = 0.0
                for j in range(npts):
                    row += gram[i, j] * e[j]
                acc += row * e[i]
            out[b] = acc - trace
        return out

    @njit(cache=True, parallel=True)
    def _cell_sum_batch_numba(cells, ncells, signs):
        nrep, npts = signs.shape
        out = np.zeros((nrep, ncells))
        for b in prange(nrep):
            for i in range(npts):
                c = cells[i]
                if 0 <= c < ncells:
                    out[b, c] += signs[b, i]
        return out

    @njit(cache=True)
    def _chaos_single_numba(gram, marks):
        npts = marks.shape[0]
        acc = 0.0
        for i in range(npts):
            for j in range(npts):
                if i != j:
                    acc += gram[i, j] * marks[i] * marks[j]
        return acc

    def _chaos_batch_numba_wrap(gram, signs):
        return _chaos_batch_numba(gram, signs.astype(np.float64, copy=False))

    def _cell_sum_batch_numba_wrap(cells, ncells, signs):
        return _cell_sum_batch_numba(
            np.asarray(cells, dtype=np.int64), ncells, signs.astype(np.float64, copy=False)
        )


def _chaos_single_python(gram, marks):
    npts = len(marks)
    acc = 0.0
    for i in range(npts):
        for j in range(npts):
            if i != j:
                acc += float(gram[i, j]) * float(marks[i]) * float(marks[j])
    return acc


IMPLEMENTATIONS = {"numpy": {"chaos_batch": _chaos_batch_numpy, "cell_sum_batch": _cell_sum_batch_numpy}}
if _HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "chaos_batch": _chaos_batch_numba_wrap,
        "cell_sum_batch": _cell_sum_batch_numba_wrap,
    }


# measured winners on this package's workloads; see the module docstring
_AUTO = {"chaos_batch": "numpy", "cell_sum_batch": "numba" if _HAVE_NUMBA else "numpy"}


def _resolve_backend() -> str:
    requested = os.environ.get(BACKEND_ENV, "auto").lower()
    if requested not in ("auto", "numpy", "numba"):
        warnings.warn(f"{BACKEND_ENV}={requested!r} not recognized; using auto")
        return "auto"
    if requested == "numba" and not _HAVE_NUMBA:
        warnings.warn("numba unavailable; falling back to numpy backend")
        return "numpy"
    return requested


_BACKEND = _resolve_backend()


def backend_name() -> str:
    """Active batch-kernel backend ('auto', 'numpy' or 'numba')."""
    return _BACKEND


def _impl(kernel_name: str):
    backend = _AUTO[kernel_name] if _BACKEND == "auto" else _BACKEND
    return IMPLEMENTATIONS[backend][kernel_name]


def chaos_batch(gram: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Quadratic chaos for each sign row: sum_{i != j} G[i,j] e_i e_j.

    Computed as the full quadratic form minus the stored diagonal.
    ``signs`` has shape (nrep, n) matching the Gram size; returns (nrep,).
    """
    if signs.ndim != 2 or signs.shape[1] != gram.shape[0]:
        raise ValueError(
            f"sign matrix shape {signs.shape} does not match gram size {gram.shape[0]}"
        )
    if signs.shape[1] == 0:
        return np.zeros(signs.shape[0])
    return _impl("chaos_batch")(gram, signs)


def cell_sum_batch(cells: np.ndarray, ncells: int, signs: np.ndarray) -> np.ndarray:
    """Signed sums per cell: out[b, c] = sum of signs[b, i] with cells[i] == c.

    Entries of ``cells`` outside [0, ncells) are ignored (points off the
    kernel support).
    """
    if signs.ndim != 2 or signs.shape[1] != len(cells):
        raise ValueError("sign matrix width must match the number of points")
    return _impl("cell_sum_batch")(np.asarray(cells, dtype=np.int64), ncells, signs)


def chaos_single(gram: np.ndarray, marks: np.ndarray) -> float:
    """sum_{i != j} G[i,j] m_i m_j, ordered-pair row-major summation."""
    if len(marks) != gram.shape[0]:
        raise ValueError(f"marks length {len(marks)} does not match gram size {gram.shape[0]}")
    if len(marks) < 2:
        return 0.0
    m = np.asarray(marks, dtype=np.float64)
    if _HAVE_NUMBA:
        return float(_chaos_single_numba(gram, m))
    return float(_chaos_single_python(gram, m))
