"""Numba kernels for deterministic parallel linear algebra.

Every kernel is thread-count independent by construction: parallel loops
range over disjoint output elements (or a fixed number of reduction
chunks), and each output element is accumulated serially in a fixed
order.  Reruns are bit-identical at any thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# fixed reduction chunk count, independent of the thread count
_N_CHUNKS = 1024


@njit(parallel=True, cache=True)
def csr_matvec(indptr, indices, data, v, out):
    """out = A @ v for CSR A, row-parallel, row sums in storage order."""
    n = out.shape[0]
    for i in prange(n):
        acc = 0.0 + 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * v[indices[p]]
        out[i] = acc


@njit(parallel=True, cache=True)
def vdot_chunked(a, b):
    """conj(a) . b with a fixed chunk-pairwise reduction order."""
    n = a.shape[0]
    chunks = min(_N_CHUNKS, n) if n > 0 else 1
    size = (n + chunks - 1) // chunks
    partial = np.zeros(chunks, np.complex128)
    for c in prange(chunks):
        lo = c * size
        hi = min(lo + size, n)
        acc = 0.0 + 0.0j
        for i in range(lo, hi):
            acc += np.conj(a[i]) * b[i]
        partial[c] = acc
    total = 0.0 + 0.0j
    for c in range(chunks):
        total += partial[c]
    return total


@njit(parallel=True, cache=True)
def norm_sq(a):
    """|a|^2 summed with the same fixed chunk order as vdot_chunked."""
    n = a.shape[0]
    chunks = min(_N_CHUNKS, n) if n > 0 else 1
    size = (n + chunks - 1) // chunks
    partial = np.zeros(chunks, np.float64)
    for c in prange(chunks):
        lo = c * size
        hi = min(lo + size, n)
        acc = 0.0
        for i in range(lo, hi):
            x = a[i]
            acc += x.real * x.real + x.imag * x.imag
        partial[c] = acc
    total = 0.0
    for c in range(chunks):
        total += partial[c]
    return total


@njit(parallel=True, cache=True)
def axpy(y, alpha, x):
    """y += alpha * x elementwise."""
    for i in prange(y.shape[0]):
        y[i] += alpha * x[i]


@njit(parallel=True, cache=True)
def scale(y, alpha):
    for i in prange(y.shape[0]):
        y[i] *= alpha


@njit(parallel=True, cache=True)
def diag_mul(diag, v, out):
    """out = diag * v elementwise (initialises out)."""
    for i in prange(out.shape[0]):
        out[i] = diag[i] * v[i]


@njit(parallel=True, cache=True)
def apply_axis_accum(v, out, mat, n_left, d, n_right):
    """out += (I_left (x) mat (x) I_right) v, skipping zero entries of mat.

    v and out are flat complex vectors of length n_left*d*n_right; within
    each (left, row) slab the inner update is a contiguous axpy.
    """
    block = d * n_right
    for l in prange(n_left):
        base = l * block
        for r in range(d):
            ob = base + r * n_right
            for c in range(d):
                m = mat[r, c]
                if m != 0:
                    vb = base + c * n_right
                    for k in range(n_right):
                        out[ob + k] += m * v[vb + k]


@njit(parallel=True, cache=True)
def apply_fibers_accum(v, out, rows, cols, vals, offsets, bases):
    """out += M v where M acts on a set of axes addressed through fibers.

    `bases` lists the flat index of every basis state whose occupations
    vanish on the acted-on axes; `offsets[k]` is the flat-index offset of
    joint local state k.  (rows, cols, vals) is the local matrix in COO
    form over those joint states.
    """
    nnz = vals.shape[0]
    for b in prange(bases.shape[0]):
        base = bases[b]
        for p in range(nnz):
            out[base + offsets[rows[p]]] += vals[p] * v[base + offsets[cols[p]]]


@njit(parallel=True, cache=True)
def reconstruct_blocked(basis, w, out):
    """out = sum_j w[j] * basis[j, :], streamed in row blocks."""
    m, n = basis.shape
    block = 16384
    nblocks = (n + block - 1) // block
    for bi in prange(nblocks):
        lo = bi * block
        hi = min(lo + block, n)
        for i in range(lo, hi):
            out[i] = 0.0 + 0.0j
        for j in range(m):
            wj = w[j]
            if wj != 0:
                for i in range(lo, hi):
                    out[i] += wj * basis[j, i]


@njit(parallel=True, cache=True)
def row_dots(basis, nrows, w):
    """out[j] = conj(basis[j]) . w for the first nrows rows."""
    out = np.zeros(nrows, np.complex128)
    for j in prange(nrows):
        acc = 0.0 + 0.0j
        row = basis[j]
        for i in range(row.shape[0]):
            acc += np.conj(row[i]) * w[i]
        out[j] = acc
    return out


@njit(parallel=True, cache=True)
def subtract_projections(basis, nrows, coeffs, w):
    """w -= sum_j coeffs[j] * basis[j], fixed j order per element."""
    n = w.shape[0]
    block = 16384
    nblocks = (n + block - 1) // block
    for bi in prange(nblocks):
        lo = bi * block
        hi = min(lo + block, n)
        for j in range(nrows):
            cj = coeffs[j]
            if cj != 0:
                row = basis[j]
                for i in range(lo, hi):
                    w[i] -= cj * row[i]


@njit(parallel=True, cache=True)
def weighted_abs2_sums(psi, weights):
    """out[k] = sum_i weights[k, i] * |psi[i]|^2, chunk-deterministic.

    weights is an (nobs, n) float64 array (e.g. per-mode occupation
    numbers per basis state).
    """
    nobs, n = weights.shape
    chunks = min(_N_CHUNKS, n) if n > 0 else 1
    size = (n + chunks - 1) // chunks
    partial = np.zeros((chunks, nobs), np.float64)
    for c in prange(chunks):
        lo = c * size
        hi = min(lo + size, n)
        for i in range(lo, hi):
            x = psi[i]
            p = x.real * x.real + x.imag * x.imag
            for k in range(nobs):
                partial[c, k] += weights[k, i] * p
    out = np.zeros(nobs, np.float64)
    for c in range(chunks):
        for k in range(nobs):
            out[k] += partial[c, k]
    return out
