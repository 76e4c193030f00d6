"""Sparse column-oriented matrices, dense vectors, and update sequences.

Dense vectors are plain 1-D float64 numpy arrays; the helpers below
(:func:`l1_norm`, :func:`sigma`, :func:`uniform_vector`) give them the
vocabulary the solvers use. All indices are 0-based in code; file formats
and the CLI speak 1-based and convert at the I/O boundary.

Matrices are immutable after construction and safe to share across threads
read-only. Vectors are single-writer: the owner of an array mutates it, no
internal locking anywhere.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "SparseColumnMatrix",
    "UpdateSequence",
    "as_vector",
    "l1_norm",
    "sigma",
    "uniform_vector",
    "select_coordinate",
]


def as_vector(values, n: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a 1-D float64 array, optionally checking its length."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"expected a vector of length {n}, got {v.shape[0]}")
    return v


def l1_norm(v) -> float:
    """Sum of absolute entries; zero exactly when the vector is zero."""
    return float(np.abs(np.asarray(v)).sum())


def sigma(v) -> float:
    """Signed sum of entries."""
    return float(np.asarray(v).sum())


def uniform_vector(n: int) -> np.ndarray:
    """The vector (1/n, ..., 1/n); its entry sum is 1."""
    if n <= 0:
        raise ValueError("dimension must be positive")
    return np.full(n, 1.0 / n)


def select_coordinate(v, i: int) -> np.ndarray:
    """Vector equal to ``v`` at coordinate ``i`` and zero elsewhere.

    This is the coordinate-selection operator used by single-coordinate
    updates; it is always realized through an index, never as a stored
    n-by-n matrix.
    """
    v = as_vector(v)
    if not 0 <= i < v.shape[0]:
        raise ValueError(f"coordinate {i} out of range for dimension {v.shape[0]}")
    out = np.zeros_like(v)
    out[i] = v[i]
    return out


class SparseColumnMatrix:
    """Square real matrix stored by columns (compressed sparse column layout).

    Within each column entries are sorted by row, duplicate rows are
    rejected, and exact zeros are dropped at construction, so nnz-based
    cost and mass accounting are exact. Column orientation is deliberate:
    the coordinate-level diffusion step distributes fluid from one source
    coordinate along a single column in O(nnz(column)).

    All arithmetic is 64-bit floating point.
    """

    __slots__ = ("n", "indptr", "rows", "vals", "cols", "_col_l1", "_has_diag")

    def __init__(self, n: int, indptr: np.ndarray, rows: np.ndarray, vals: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.rows = rows
        self.vals = vals
        # Flat column index of every stored entry (entries are column-sorted).
        self.cols = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(indptr))
        # Per-column absolute sums, one pass over each column at build time.
        self._col_l1 = np.array(
            [float(np.abs(vals[indptr[j]:indptr[j + 1]]).sum()) for j in range(self.n)]
        )
        self._has_diag = np.zeros(self.n, dtype=bool)
        self._has_diag[rows[rows == self.cols]] = True

    @classmethod
    def from_entries(
        cls, n: int, entries: Iterable[tuple[int, int, float]]
    ) -> "SparseColumnMatrix":
        """Build from (row, col, value) triplets with 0-based indices.

        Zero values are dropped; a duplicated (row, col) position is an error.
        """
        if n <= 0:
            raise ValueError("dimension must be positive")
        rr: list[int] = []
        cc: list[int] = []
        vv: list[float] = []
        for i, j, v in entries:
            i = int(i)
            j = int(j)
            v = float(v)
            if not 0 <= i < n or not 0 <= j < n:
                raise ValueError(f"entry ({i}, {j}) outside the {n}x{n} matrix")
            if v == 0.0:
                continue
            rr.append(i)
            cc.append(j)
            vv.append(v)
        if rr:
            r = np.asarray(rr, dtype=np.int64)
            c = np.asarray(cc, dtype=np.int64)
            v = np.asarray(vv, dtype=np.float64)
            order = np.lexsort((r, c))
            r, c, v = r[order], c[order], v[order]
            dup = (np.diff(c) == 0) & (np.diff(r) == 0)
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at (row {r[k]}, col {c[k]})")
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, c + 1, 1)
            indptr = np.cumsum(indptr)
        else:
            r = np.empty(0, dtype=np.int64)
            v = np.empty(0, dtype=np.float64)
            indptr = np.zeros(n + 1, dtype=np.int64)
        return cls(n, indptr, r, v)

    @classmethod
    def from_dense(cls, a) -> "SparseColumnMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square 2-D array, got shape {a.shape}")
        n = a.shape[0]
        entries = [(i, j, a[i, j]) for j in range(n) for i in range(n) if a[i, j] != 0.0]
        return cls.from_entries(n, entries)

    @classmethod
    def identity(cls, n: int) -> "SparseColumnMatrix":
        return cls.from_entries(n, ((i, i, 1.0) for i in range(n)))

    @classmethod
    def zero(cls, n: int) -> "SparseColumnMatrix":
        return cls.from_entries(n, ())

    @property
    def nnz(self) -> int:
        return int(self.vals.shape[0])

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of column ``j`` (views, do not mutate)."""
        if not 0 <= j < self.n:
            raise ValueError(f"column {j} out of range for dimension {self.n}")
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.rows[lo:hi], self.vals[lo:hi]

    def col_nnz(self, j: int) -> int:
        if not 0 <= j < self.n:
            raise ValueError(f"column {j} out of range for dimension {self.n}")
        return int(self.indptr[j + 1] - self.indptr[j])

    def col_l1(self, j: int) -> float:
        """Absolute sum of column ``j``."""
        if not 0 <= j < self.n:
            raise ValueError(f"column {j} out of range for dimension {self.n}")
        return float(self._col_l1[j])

    def column_l1_norms(self) -> np.ndarray:
        """All column absolute sums (copy)."""
        return self._col_l1.copy()

    def matvec(self, v) -> np.ndarray:
        """Matrix-vector product: every stored entry scaled by its column's v_j."""
        v = as_vector(v, self.n)
        per_entry = self.vals * v[self.cols]
        return np.bincount(self.rows, weights=per_entry, minlength=self.n)

    def has_diagonal_entry(self, j: int) -> bool:
        if not 0 <= j < self.n:
            raise ValueError(f"column {j} out of range for dimension {self.n}")
        return bool(self._has_diag[j])

    def add_scaled_column(self, dest: np.ndarray, j: int, scale: float) -> np.ndarray:
        """In place: dest += scale * column j. Touches only nnz(column j) entries."""
        if not 0 <= j < self.n:
            raise ValueError(f"column {j} out of range for dimension {self.n}")
        dest = as_vector(dest, self.n)
        if scale != 0.0:
            lo, hi = self.indptr[j], self.indptr[j + 1]
            dest[self.rows[lo:hi]] += scale * self.vals[lo:hi]
        return dest

    def scaled(self, factor: float) -> "SparseColumnMatrix":
        """New matrix with every stored value multiplied by ``factor``."""
        if factor == 0.0:
            return SparseColumnMatrix.zero(self.n)
        return SparseColumnMatrix(
            self.n, self.indptr.copy(), self.rows.copy(), self.vals * float(factor)
        )

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for j in range(self.n):
            lo, hi = self.indptr[j], self.indptr[j + 1]
            out[self.rows[lo:hi], j] = self.vals[lo:hi]
        return out

    def __repr__(self) -> str:
        return f"SparseColumnMatrix(n={self.n}, nnz={self.nnz})"


class UpdateSequence:
    """Infinite stream of 0-based coordinate indices with a fairness contract.

    Fairness means every coordinate appears infinitely often. Round-robin
    sequences are fair by construction; explicit lists are replayed
    cyclically and must mention every coordinate at least once (rejected at
    construction otherwise); custom generators carry the fairness contract
    themselves, only the index range is checked.
    """

    __slots__ = ("kind", "n", "_indices", "_factory")

    def __init__(
        self,
        kind: str,
        n: int,
        indices: tuple[int, ...] | None = None,
        factory: Callable[[], Iterable[int]] | None = None,
    ):
        if n <= 0:
            raise ValueError("dimension must be positive")
        self.kind = kind
        self.n = int(n)
        self._indices = indices
        self._factory = factory

    @classmethod
    def round_robin(cls, n: int) -> "UpdateSequence":
        """0, 1, ..., n-1, 0, 1, ... — every window of n outputs is a permutation."""
        return cls("round_robin", n)

    @classmethod
    def explicit(cls, n: int, indices: Sequence[int]) -> "UpdateSequence":
        """Replay ``indices`` cyclically; must cover every coordinate."""
        idx = tuple(int(i) for i in indices)
        for i in idx:
            if not 0 <= i < n:
                raise ValueError(f"index {i} out of range for dimension {n}")
        missing = set(range(n)) - set(idx)
        if missing:
            raise ValueError(
                f"unfair sequence: coordinates {sorted(missing)} never appear"
            )
        return cls("explicit_list", n, indices=idx)

    @classmethod
    def custom(cls, n: int, factory: Callable[[], Iterable[int]]) -> "UpdateSequence":
        """Wrap a generator factory; restarted when exhausted (cyclic replay)."""
        return cls("custom_generator", n, factory=factory)

    def iter_indices(self) -> Iterator[int]:
        """Fresh infinite iterator over the sequence."""
        if self.kind == "round_robin":
            return itertools.cycle(range(self.n))
        if self.kind == "explicit_list":
            assert self._indices is not None
            return itertools.cycle(self._indices)
        return self._iter_custom()

    def _iter_custom(self) -> Iterator[int]:
        assert self._factory is not None
        while True:
            produced = False
            for i in self._factory():
                i = int(i)
                if not 0 <= i < self.n:
                    raise ValueError(f"index {i} out of range for dimension {self.n}")
                produced = True
                yield i
            if not produced:
                raise ValueError("custom sequence produced no indices")

    def take(self, k: int) -> list[int]:
        """First ``k`` indices of a fresh iteration."""
        return list(itertools.islice(self.iter_indices(), k))

    def __repr__(self) -> str:
        return f"UpdateSequence({self.kind}, n={self.n})"
