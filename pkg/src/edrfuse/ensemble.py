"""Fusing the estimate pool into a single respiratory signal.

The 10 Hz estimates are standardized column-wise with a sliding z-score,
stacked into a pool matrix, expanded with a short history of lagged rows,
and reduced to the top left-singular vector of that lag-embedded matrix.
The singular vector, sign-aligned with the pool consensus, is the ensembled
respiratory estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import svds

from .estimators import EdrEstimate
from .signalcore import DegenerateDataError, InsufficientDataError, local_zscore

EDR_RATE = 10.0
DEFAULT_LAGS = 10
DEFAULT_HALF_WINDOW = 50
# rows beyond which the iterative SVD beats full LAPACK
DENSE_SVD_CUTOFF = 4000


@dataclass(frozen=True)
class EstimatePool:
    """Standardized estimate columns over their largest common non-null span."""

    matrix: np.ndarray            # (rows, columns), no nulls
    labels: tuple[str, ...]
    offset: int                   # grid index of the first retained row
    total_rows: int               # full 10 Hz grid length, floor(10 T)

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]

    def column_series(self, label: str) -> np.ndarray:
        """One standardized column re-embedded on the full 10 Hz grid."""
        j = self.labels.index(label)
        out = np.full(self.total_rows, np.nan)
        out[self.offset: self.offset + self.matrix.shape[0]] = self.matrix[:, j]
        return out


@dataclass(frozen=True)
class EnsembledEdr:
    """Fused respiratory estimate on the 10 Hz grid; warm-up samples are null."""

    values: np.ndarray
    rate: float = EDR_RATE
    degenerate_spectrum: bool = False

    @property
    def head_nulls(self) -> int:
        finite = np.flatnonzero(~np.isnan(self.values))
        return int(finite[0]) if finite.size else self.values.size


def build_pool(
    estimates: list[EdrEstimate],
    duration: float,
    half_window: int = DEFAULT_HALF_WINDOW,
) -> EstimatePool:
    """Standardize every 10 Hz estimate and trim to the common non-null span."""
    if len(estimates) < 2:
        raise InsufficientDataError("insufficient estimates: need at least 2")
    total = int(np.floor(EDR_RATE * duration))
    cols = []
    labels = []
    for est in estimates:
        if est.series10 is None:
            raise ValueError(f"estimate {est.label} has no 10 Hz series")
        if est.series10.size != total:
            raise ValueError(f"estimate {est.label} is not on the shared grid")
        cols.append(local_zscore(est.series10, half_window))
        labels.append(est.label)
    matrix = np.column_stack(cols)
    valid = np.all(np.isfinite(matrix), axis=1)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise DegenerateDataError("estimates share no non-null samples")
    first, last = int(idx[0]), int(idx[-1])
    if not valid[first: last + 1].all():
        raise DegenerateDataError("estimates have interior nulls")
    return EstimatePool(matrix[first: last + 1], tuple(labels), first, total)


def lag_embed(pool: EstimatePool, lags: int = DEFAULT_LAGS) -> np.ndarray:
    """Append recent history to every pool row.

    Row i of the result concatenates pool rows ``i+lags-1, ..., i`` (newest
    first), so the output has ``rows - lags + 1`` rows and ``lags *
    n_columns`` columns.
    """
    if lags < 1:
        raise ValueError("lags must be at least 1")
    m = pool.matrix
    if m.shape[0] < lags + 1:
        raise InsufficientDataError("pool too short for the requested lag depth")
    rows = m.shape[0] - lags + 1
    blocks = [m[lags - 1 - t: lags - 1 - t + rows] for t in range(lags)]
    return np.hstack(blocks)


def fuse(embedded: np.ndarray, pool: EstimatePool) -> EnsembledEdr:
    """Top left-singular direction of the lag-embedded pool, on the full grid.

    The direction keeps its unit norm; its sign is chosen so it correlates
    non-negatively with the mean of the pool columns.  A (near-)tied top
    singular pair is flagged, not rejected.  The ``lags - 1`` samples of
    history warm-up plus any trimmed boundary stay null.
    """
    if embedded.ndim != 2 or min(embedded.shape) < 2:
        raise InsufficientDataError("embedded matrix too small to factor")
    if not np.isfinite(embedded).all():
        raise ValueError("embedded matrix must be free of nulls")
    rows = embedded.shape[0]
    lags = pool.matrix.shape[0] - rows + 1
    if lags < 1 or pool.offset + lags - 1 + rows > pool.total_rows:
        raise ValueError("embedded matrix is inconsistent with the pool")

    if rows > DENSE_SVD_CUTOFF and min(embedded.shape) > 3:
        v0 = np.random.default_rng(0).standard_normal(min(embedded.shape))
        u2, s2, _ = svds(embedded, k=2, v0=v0)
        top = int(np.argmax(s2))
        u = u2[:, top]
        s_top = float(s2[top])
        s_next = float(np.delete(s2, top).max())
    else:
        uf, sf, _ = np.linalg.svd(embedded, full_matrices=False)
        u = uf[:, 0]
        s_top = float(sf[0])
        s_next = float(sf[1]) if sf.size > 1 else 0.0

    degenerate = s_top == 0.0 or (s_top - s_next) <= 1e-12 * s_top

    consensus = pool.matrix[lags - 1:].mean(axis=1)
    uc = u - u.mean()
    cc = consensus - consensus.mean()
    denom = np.linalg.norm(uc) * np.linalg.norm(cc)
    if denom > 0 and float(uc @ cc) < 0:
        u = -u

    values = np.full(pool.total_rows, np.nan)
    start = pool.offset + lags - 1
    values[start: start + rows] = u
    return EnsembledEdr(values, EDR_RATE, degenerate)
