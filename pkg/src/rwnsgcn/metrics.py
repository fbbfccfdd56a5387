"""Classification accuracy and the cosine-dispersion statistic.

The dispersion statistic aggregates pairwise cosine distances twice
through the same quotient-of-sums form: per node over its pairs, then
over nodes.  Near-zero distances would blow up the reciprocal sums, so
they are excluded and counted instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rwnsgcn.dpp import cosine_rows

__all__ = ["MadReport", "accuracy", "mad"]

ZERO_DISTANCE_TOL = 1e-12


@dataclass(frozen=True)
class MadReport:
    value: float  # reported x100
    pairs_used: int
    pairs_skipped_zero: int


def accuracy(preds: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of masked nodes classified correctly."""
    mask = np.asarray(mask)
    if mask.size == 0:
        raise ValueError("mask is empty")
    return float(np.mean(np.asarray(preds)[mask] == np.asarray(labels)[mask]))


def mad(embeddings: np.ndarray) -> MadReport:
    """Mean average cosine distance over all ordered row pairs, x100.

    D_ij = 1 - cos(x_i, x_j); per node D_i = (sum_j D_ij) / (sum_j 1/D_ij)
    and the total is the same quotient over the D_i.  Ordered pairs with
    D_ij below ``ZERO_DISTANCE_TOL`` are excluded from both sums; nodes
    with no surviving pair are excluded from the outer sums.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2 or emb.shape[0] < 2:
        raise ValueError("need at least two embedding rows")
    n = emb.shape[0]
    dist = 1.0 - cosine_rows(emb, emb)
    offdiag = ~np.eye(n, dtype=bool)
    usable = offdiag & (dist >= ZERO_DISTANCE_TOL)
    pairs_used = int(usable.sum())
    pairs_skipped = int(offdiag.sum() - pairs_used)

    row_has = usable.any(axis=1)
    if int(row_has.sum()) < 2:
        raise ValueError("fewer than 2 usable rows (all pairwise distances ~ 0)")
    d_sum = np.where(usable, dist, 0.0).sum(axis=1)
    inv = np.zeros_like(dist)
    np.divide(1.0, dist, where=usable, out=inv)
    inv_sum = inv.sum(axis=1)
    d_i = d_sum[row_has] / inv_sum[row_has]
    value = float(d_i.sum() / (1.0 / d_i).sum())
    return MadReport(
        value=100.0 * value, pairs_used=pairs_used, pairs_skipped_zero=pairs_skipped
    )
