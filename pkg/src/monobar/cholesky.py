"""Sparse Cholesky factorization with a reusable symbolic phase.

The symbolic analysis (fill-reducing ordering, elimination tree, pattern of
the factor) depends only on the sparsity pattern of the matrix, so it is done
once by :class:`SparseCholesky` and every later call to
:meth:`SparseCholesky.factorize` only recomputes numerical values.

Matrices are passed as the lower triangle in CSC form.
"""

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import reverse_cuthill_mckee


class FactorizationError(ArithmeticError):
    """Raised when a matrix is not numerically positive definite.

    ``pivot`` is the index (in the caller's ordering) of the column whose
    pivot became nonpositive.
    """

    def __init__(self, pivot, value):
        self.pivot = int(pivot)
        self.value = float(value)
        super().__init__(
            f"matrix not positive definite: pivot {self.value:.3e} at index {self.pivot}"
        )


@njit(cache=True)
def _etree(n, rowptr, colind):
    # rowptr/colind: strictly-lower part of the permuted matrix, by rows
    parent = np.full(n, -1, dtype=np.int64)
    ancestor = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(rowptr[i], rowptr[i + 1]):
            k = colind[p]
            while k != -1 and k < i:
                nxt = ancestor[k]
                ancestor[k] = i
                if nxt == -1:
                    parent[k] = i
                k = nxt
    return parent


@njit(cache=True)
def _row_patterns(n, rowptr, colind, parent):
    # ereach for every row: nonzero columns of L(i, :i)
    mark = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    cap = max(16, 2 * len(colind))
    out = np.empty(cap, dtype=np.int64)
    rptr = np.zeros(n + 1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    total = 0
    for i in range(n):
        mark[i] = i
        start = total
        for p in range(rowptr[i], rowptr[i + 1]):
            k = colind[p]
            top = 0
            while k != -1 and mark[k] != i:
                stack[top] = k
                top += 1
                mark[k] = i
                k = parent[k]
            for t in range(top):
                if total >= cap:
                    cap *= 2
                    grown = np.empty(cap, dtype=np.int64)
                    grown[:total] = out[:total]
                    out = grown
                out[total] = stack[t]
                total += 1
        # columns must be visited in increasing order during the numeric phase
        out[start:total] = np.sort(out[start:total])
        rptr[i + 1] = total
        for t in range(start, total):
            counts[out[t]] += 1
    return rptr, out[:total].copy(), counts


@njit(cache=True)
def _column_pattern(n, rptr, rcols, counts):
    lp = np.zeros(n + 1, dtype=np.int64)
    for j in range(n):
        lp[j + 1] = lp[j] + counts[j] + 1
    li = np.empty(lp[n], dtype=np.int64)
    fill = lp[:-1].copy()
    for j in range(n):
        li[fill[j]] = j
        fill[j] += 1
    # position of L(i, k) inside column k, aligned with rcols
    rpos = np.empty(len(rcols), dtype=np.int64)
    for i in range(n):
        for t in range(rptr[i], rptr[i + 1]):
            k = rcols[t]
            li[fill[k]] = i
            rpos[t] = fill[k]
            fill[k] += 1
    return lp, li, rpos


@njit(cache=True)
def _numeric(n, cp, ci, cx, lp, li, rptr, rcols, rpos, lx):
    """Left-looking numeric factorization; returns -1 or the failing column."""
    work = np.zeros(n)
    for j in range(n):
        for p in range(cp[j], cp[j + 1]):
            work[ci[p]] = cx[p]
        for t in range(rptr[j], rptr[j + 1]):
            k = rcols[t]
            pos = rpos[t]
            ljk = lx[pos]
            for p in range(pos, lp[k + 1]):
                work[li[p]] -= lx[p] * ljk
        d = work[j]
        work[j] = 0.0
        if not d > 0.0 or not np.isfinite(d):
            lx[lp[j]] = d
            for p in range(lp[j] + 1, lp[j + 1]):
                work[li[p]] = 0.0
            return j
        ljj = np.sqrt(d)
        lx[lp[j]] = ljj
        for p in range(lp[j] + 1, lp[j + 1]):
            i = li[p]
            lx[p] = work[i] / ljj
            work[i] = 0.0
    return -1


@njit(cache=True)
def _solve(n, lp, li, lx, b):
    y = b.copy()
    for j in range(n):
        y[j] /= lx[lp[j]]
        yj = y[j]
        for p in range(lp[j] + 1, lp[j + 1]):
            y[li[p]] -= lx[p] * yj
    for j in range(n - 1, -1, -1):
        s = y[j]
        for p in range(lp[j] + 1, lp[j + 1]):
            s -= lx[p] * y[li[p]]
        y[j] = s / lx[lp[j]]
    return y


def lower_csc(matrix):
    """Lower triangle of ``matrix`` as a canonical CSC matrix (explicit zeros kept)."""
    a = sp.coo_matrix(matrix)
    keep = a.row >= a.col
    a = sp.csc_matrix((a.data[keep], (a.row[keep], a.col[keep])), shape=a.shape)
    a.sum_duplicates()
    a.sort_indices()
    return a


class SparseCholesky:
    """Cholesky factorization ``A = P^T L L^T P`` of an SPD matrix.

    Parameters
    ----------
    pattern : sparse matrix
        Lower triangle (CSC, sorted, no duplicates) whose *structure* every
        later matrix must share. Values are ignored.
    ordering : {"rcm", "natural"}
        Fill-reducing permutation computed during analysis.
    """

    def __init__(self, pattern, ordering="rcm"):
        pattern = sp.csc_matrix(pattern)
        n = pattern.shape[0]
        if pattern.shape != (n, n):
            raise ValueError("pattern must be square")
        self.n = n
        self._indptr = pattern.indptr.copy()
        self._indices = pattern.indices.copy()
        self.input_nnz = int(pattern.nnz)

        if ordering == "rcm" and n > 1:
            ones = sp.csr_matrix(
                (np.ones(pattern.nnz), pattern.indices, pattern.indptr), shape=(n, n)
            )
            sym = (ones + ones.T).tocsr()
            perm = np.asarray(reverse_cuthill_mckee(sym, symmetric_mode=True), dtype=np.int64)
        elif ordering in ("rcm", "natural"):
            perm = np.arange(n, dtype=np.int64)
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
        pinv = np.empty(n, dtype=np.int64)
        pinv[perm] = np.arange(n)
        self.perm = perm

        # permuted lower pattern, and where each input entry lands in it
        cols = np.repeat(np.arange(n), np.diff(pattern.indptr))
        pr, pc = pinv[pattern.indices], pinv[cols]
        lo, hi = np.minimum(pr, pc), np.maximum(pr, pc)
        order = np.lexsort((hi, lo))
        self._map = np.empty(pattern.nnz, dtype=np.int64)
        self._map[order] = np.arange(pattern.nnz)
        crow, ccol = hi[order], lo[order]
        self._cp = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self._cp, ccol + 1, 1)
        self._cp = np.cumsum(self._cp)
        self._ci = crow.astype(np.int64)

        strict = crow > ccol
        by_row = np.lexsort((ccol[strict], crow[strict]))
        rrow, rcol = crow[strict][by_row], ccol[strict][by_row]
        rowptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(rowptr, rrow + 1, 1)
        rowptr = np.cumsum(rowptr)
        colind = rcol.astype(np.int64)

        self.parent = _etree(n, rowptr, colind)
        self._rptr, self._rcols, counts = _row_patterns(n, rowptr, colind, self.parent)
        self._lp, self._li, self._rpos = _column_pattern(n, self._rptr, self._rcols, counts)
        self._lx = np.zeros(len(self._li))
        self._factored = False

    @property
    def factor_nnz(self):
        """Number of stored entries of the Cholesky factor (including the diagonal)."""
        return int(self._lp[-1])

    def matches(self, matrix):
        """True if ``matrix`` (lower CSC) has exactly the analysed structure."""
        return (
            matrix.shape == (self.n, self.n)
            and np.array_equal(matrix.indptr, self._indptr)
            and np.array_equal(matrix.indices, self._indices)
        )

    def factorize(self, matrix):
        """Numeric factorization of a matrix sharing the analysed pattern."""
        if not self.matches(matrix):
            raise ValueError("sparsity pattern differs from the analysed pattern")
        return self.factorize_values(matrix.data)

    def factorize_values(self, values):
        """Numeric factorization from the value array aligned with the pattern."""
        cx = np.empty(len(self._ci))
        cx[self._map] = values
        self._factored = False
        fail = _numeric(
            self.n, self._cp, self._ci, cx, self._lp, self._li,
            self._rptr, self._rcols, self._rpos, self._lx,
        )
        if fail >= 0:
            raise FactorizationError(self.perm[fail], self._lx[self._lp[fail]])
        self._factored = True
        return self

    def solve(self, b):
        if not self._factored:
            raise RuntimeError("no valid numeric factorization")
        b = np.asarray(b, dtype=float)
        y = _solve(self.n, self._lp, self._li, self._lx, b[self.perm])
        x = np.empty_like(y)
        x[self.perm] = y
        return x

    def factor_dense(self):
        """Dense copy of the permuted factor L (testing aid)."""
        cols = np.repeat(np.arange(self.n), np.diff(self._lp))
        out = np.zeros((self.n, self.n))
        out[self._li, cols] = self._lx
        return out
