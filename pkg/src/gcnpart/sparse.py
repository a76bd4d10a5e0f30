"""CSR sparse and dense matrix kernels.

Every numeric path in the package runs through this module: CSR storage,
adjacency normalization D^{-1/2}(A+I)D^{-1/2}, sparse-dense and dense-dense
products, CSR transpose, and the row-gather primitive that assembles
point-to-point message payloads (the copy-operator realization of the
diagonal selector matrices, kept as index lists instead of materialized
diagonals).

All scalars are float64. Dot products consume operands in ascending index
order (CSR columns are sorted), so repeated runs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_index_array(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.int64))


def dense(x) -> np.ndarray:
    """Coerce to a 2-D float64 C-contiguous array (the dense matrix type)."""
    a = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if a.ndim != 2:
        raise ValueError(f"dense matrix must be 2-D, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed sparse row matrix with sorted columns and no explicit zeros.

    Invariants checked at construction: row_offsets is non-decreasing with
    row_offsets[0] == 0 and row_offsets[-1] == nnz; column indices are
    strictly increasing within each row and < n_cols.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _as_index_array(self.row_offsets))
        object.__setattr__(self, "col_indices", _as_index_array(self.col_indices))
        object.__setattr__(
            self, "values", np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        )
        ro, ci, v = self.row_offsets, self.col_indices, self.values
        if len(ro) != self.n_rows + 1 or ro[0] != 0:
            raise ValueError("row_offsets must have length n_rows+1 and start at 0")
        if np.any(np.diff(ro) < 0) or ro[-1] != len(ci):
            raise ValueError("row_offsets must be non-decreasing and end at nnz")
        if len(v) != len(ci):
            raise ValueError("values and col_indices must have equal length")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            row = ci[ro[i] : ro[i + 1]]
            if len(row) > 1 and np.any(np.diff(row) <= 0):
                raise ValueError(f"columns in row {i} not strictly increasing")
        for arr in (ro, ci, v):
            arr.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[s:e], self.values[s:e]

    def has_full_diagonal(self) -> bool:
        if self.n_rows != self.n_cols:
            return False
        for i in range(self.n_rows):
            cols, _ = self.row(i)
            k = np.searchsorted(cols, i)
            if k >= len(cols) or cols[k] != i:
                return False
        return True

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(np.arange(self.n_rows), self.row_nnz())
        out[rows, self.col_indices] = self.values
        return out

    @classmethod
    def from_coo(cls, n_rows: int, n_cols: int, rows, cols, values=None) -> "CsrMatrix":
        """Build from triplets; duplicate (row, col) entries are summed."""
        rows = _as_index_array(rows)
        cols = _as_index_array(cols)
        if values is None:
            values = np.ones(len(rows))
        values = np.asarray(values, dtype=np.float64)
        if not (len(rows) == len(cols) == len(values)):
            raise ValueError("triplet arrays must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= n_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise ValueError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows):
            keep = np.ones(len(rows), dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(keep) - 1
            summed = np.zeros(int(group[-1]) + 1)
            np.add.at(summed, group, values)
            rows, cols, values = rows[keep], cols[keep], summed
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
        return cls(n_rows, n_cols, offsets, cols, values)

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = dense(a)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


@dataclass(frozen=True)
class RowBlock:
    """A set of matrix rows owned by one processor, keyed by global row ids.

    global_row_ids is strictly increasing; local holds the row data (sparse
    or dense) in that order, at full column width.
    """

    global_row_ids: np.ndarray
    local: "CsrMatrix | np.ndarray"

    def __post_init__(self):
        ids = _as_index_array(self.global_row_ids)
        object.__setattr__(self, "global_row_ids", ids)
        if len(ids) > 1 and np.any(np.diff(ids) <= 0):
            raise ValueError("global_row_ids must be strictly increasing")
        n_local = self.local.n_rows if isinstance(self.local, CsrMatrix) else self.local.shape[0]
        if n_local != len(ids):
            raise ValueError("row count of local data must match global_row_ids")
        ids.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return len(self.global_row_ids)


def normalize_adjacency(a: CsrMatrix, add_self_loops: bool = True) -> CsrMatrix:
    """Return the degree-normalized adjacency D^{-1/2}(A+I)D^{-1/2}.

    D(i,i) sums row i of A+I (row sums, i.e. out-degrees for directed
    input). With add_self_loops every degree is >= 1, so every diagonal
    entry of the result is nonzero.
    """
    if a.n_rows != a.n_cols:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    n = a.n_rows
    if add_self_loops:
        rows = np.repeat(np.arange(n), a.row_nnz())
        rows = np.concatenate([rows, np.arange(n)])
        cols = np.concatenate([a.col_indices, np.arange(n)])
        vals = np.concatenate([a.values, np.ones(n)])
        tilde = CsrMatrix.from_coo(n, n, rows, cols, vals)
    else:
        tilde = a
    deg = np.zeros(n)
    np.add.at(deg, np.repeat(np.arange(n), tilde.row_nnz()), tilde.values)
    if np.any(deg <= 0):
        bad = int(np.argmax(deg <= 0))
        raise ValueError(f"row {bad} has non-positive degree; cannot normalize")
    inv_sqrt = 1.0 / np.sqrt(deg)
    row_of = np.repeat(np.arange(n), tilde.row_nnz())
    scaled = tilde.values * inv_sqrt[row_of] * inv_sqrt[tilde.col_indices]
    return CsrMatrix(n, n, tilde.row_offsets, tilde.col_indices, scaled)


def spmm(a: CsrMatrix, h: np.ndarray) -> np.ndarray:
    """Sparse @ dense. Row i accumulates its nonzeros in ascending column order."""
    h = dense(h)
    if a.n_cols != h.shape[0]:
        raise ValueError(f"spmm shape mismatch: {a.shape} @ {h.shape}")
    out = np.zeros((a.n_rows, h.shape[1]))
    ro, ci, v = a.row_offsets, a.col_indices, a.values
    for i in range(a.n_rows):
        s, e = ro[i], ro[i + 1]
        if s != e:
            out[i] = v[s:e] @ h[ci[s:e]]
    return out


def dmm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Dense @ dense with a shape check."""
    x, y = dense(x), dense(y)
    if x.shape[1] != y.shape[0]:
        raise ValueError(f"dmm shape mismatch: {x.shape} @ {y.shape}")
    return x @ y


def hadamard(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Element-wise product of two equal-shape dense matrices."""
    x, y = dense(x), dense(y)
    if x.shape != y.shape:
        raise ValueError(f"hadamard shape mismatch: {x.shape} vs {y.shape}")
    return x * y


def transpose_sparse(a: CsrMatrix) -> CsrMatrix:
    """CSR of A^T with sorted columns (stable sort keeps rows bit-exact)."""
    rows = np.repeat(np.arange(a.n_rows, dtype=np.int64), a.row_nnz())
    order = np.argsort(a.col_indices, kind="stable")
    out_cols = rows[order]
    out_vals = a.values[order]
    offsets = np.zeros(a.n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(a.col_indices, minlength=a.n_cols), out=offsets[1:])
    return CsrMatrix(a.n_cols, a.n_rows, offsets, out_cols, out_vals)


def gather_rows(block: RowBlock, wanted_global_ids) -> np.ndarray:
    """Copy the block rows for wanted_global_ids, in the order requested.

    This is the copy-semiring selector multiply: the selector is an index
    list, and "multiplication" carries the block row unchanged.
    """
    wanted = _as_index_array(wanted_global_ids)
    owned = block.global_row_ids
    width = block.local.n_cols if isinstance(block.local, CsrMatrix) else block.local.shape[1]
    if len(wanted) == 0:
        return np.zeros((0, width))
    if len(owned) == 0:
        raise KeyError(f"row {int(wanted[0])} is not owned by this block")
    pos = np.searchsorted(owned, wanted)
    bad = (pos >= len(owned)) | (owned[np.minimum(pos, len(owned) - 1)] != wanted)
    if np.any(bad):
        missing = wanted[bad][0]
        raise KeyError(f"row {int(missing)} is not owned by this block")
    if isinstance(block.local, CsrMatrix):
        out = np.zeros((len(wanted), block.local.n_cols))
        for k, i in enumerate(pos):
            cols, vals = block.local.row(int(i))
            out[k, cols] = vals
        return out
    return block.local[pos].copy()
