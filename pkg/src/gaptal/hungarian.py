"""Minimum-cost square assignment via shortest augmenting paths.

O(n^3) potential-based formulation with the column scan vectorized in
numpy. Rows are inserted in index order and argmin takes the first minimum,
so among equally optimal assignments the one preferred maps lower row
(query) indices to lower column indices: deterministic and stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


@dataclass
class Assignment:
    """Result of matching queries (rows) to targets (columns).

    pairs lists (query_index, target_index) for the real targets only;
    unmatched holds the query indices assigned to padding columns.
    """

    pairs: list[tuple[int, int]]
    unmatched: list[int] = field(default_factory=list)
    total_cost: float = 0.0

    def matched_queries(self) -> list[int]:
        return [q for q, _ in self.pairs]


def solve_square(cost: np.ndarray) -> np.ndarray:
    """column index assigned to each row, minimizing the total cost."""
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError(f"assignment needs a square matrix, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise NumericError("assignment cost matrix contains non-finite entries")
    n = c.shape[0]
    # 1-based columns; index 0 is the virtual column holding the row being inserted
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    row_of = np.zeros(n + 1, dtype=np.int64)  # row (1-based) matched to column, 0 = free
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            reduced = c[i0 - 1] - u[i0] - v[1:]  # candidate costs for columns 1..n
            free = ~used[1:]
            improve = free & (reduced < minv[1:])
            cols = np.flatnonzero(improve) + 1
            minv[cols] = reduced[cols - 1]
            way[cols] = j0
            free_cols = np.flatnonzero(free) + 1
            j1 = int(free_cols[np.argmin(minv[free_cols])])  # first minimum: lowest column
            delta = minv[j1]
            u[row_of[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0 != 0:
            j1 = int(way[j0])
            row_of[j0] = row_of[j1]
            j0 = j1
    col_of_row = np.empty(n, dtype=np.int64)
    col_of_row[row_of[1:] - 1] = np.arange(n)
    return col_of_row


def hungarian(cost: np.ndarray, num_real_targets: int | None = None) -> Assignment:
    """Assignment over a padded square cost matrix.

    Columns at index >= num_real_targets are padding; queries landing there
    are reported as unmatched. total_cost sums the full matrix including
    padding columns (whose entries are zero by construction upstream).
    """
    c = np.asarray(cost, dtype=np.float64)
    cols = solve_square(c)
    n = c.shape[0]
    n_real = n if num_real_targets is None else num_real_targets
    pairs = [(q, int(cols[q])) for q in range(n) if cols[q] < n_real]
    unmatched = [q for q in range(n) if cols[q] >= n_real]
    total = float(c[np.arange(n), cols].sum())
    return Assignment(pairs=sorted(pairs), unmatched=sorted(unmatched), total_cost=total)
