"""Sum-of-products operator form for memory-light application at scale.

A SumOfProducts holds an optional full-space diagonal plus a list of
product terms whose factors are *local* matrices acting on one or a few
subsystem axes.  Applying it streams the state vector through axis-local
kernels instead of materializing a full-space sparse matrix, which keeps
both memory and bandwidth proportional to the vector size.  For small
spaces :meth:`to_sparse` materializes the equivalent CSR operator, which
tests compare entrywise against independently assembled matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import SpaceMismatchError
from .hspace import HilbertSpace
from .operators import SparseOperator, StateVector

__all__ = ["AxisFactor", "AxisSumFactor", "AxesFactor", "SumOfProducts", "Workspace"]


class Workspace:
    """Two reusable scratch vectors for SumOfProducts application."""

    def __init__(self, dim: int):
        self.bufs = (np.empty(dim, np.complex128), np.empty(dim, np.complex128))


class AxisFactor:
    """A local matrix acting on a single subsystem axis."""

    def __init__(self, space: HilbertSpace, axis: int, mat: np.ndarray):
        d = space.dims[axis]
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.shape != (d, d):
            raise ValueError(f"local matrix shape {mat.shape} != ({d}, {d})")
        self.axis = axis
        self.mat = mat
        self.n_left = 1
        for dd in space.dims[:axis]:
            self.n_left *= dd
        self.d = d
        self.n_right = space.strides[axis]

    def scaled(self, space, coeff: complex) -> "AxisFactor":
        return AxisFactor(space, self.axis, self.mat * coeff)

    def apply_accum(self, v: np.ndarray, out: np.ndarray) -> None:
        _kernels.apply_axis_accum(v, out, self.mat, self.n_left, self.d, self.n_right)

    def to_csr(self, space: HilbertSpace) -> sp.csr_matrix:
        return sp.kron(
            sp.kron(sp.identity(self.n_left, format="csr"), sp.csr_matrix(self.mat)),
            sp.identity(self.n_right, format="csr"),
            format="csr",
        )


class AxisSumFactor:
    """A sum of single-axis local matrices applied as one factor."""

    def __init__(self, space: HilbertSpace, parts):
        self.parts = tuple(AxisFactor(space, axis, mat) for axis, mat in parts)
        if not self.parts:
            raise ValueError("AxisSumFactor needs at least one part")

    def scaled(self, space, coeff: complex) -> "AxisSumFactor":
        return AxisSumFactor(space, [(p.axis, p.mat * coeff) for p in self.parts])

    def apply_accum(self, v: np.ndarray, out: np.ndarray) -> None:
        for p in self.parts:
            p.apply_accum(v, out)

    def to_csr(self, space: HilbertSpace) -> sp.csr_matrix:
        acc = None
        for p in self.parts:
            m = p.to_csr(space)
            acc = m if acc is None else acc + m
        return acc.tocsr()


class AxesFactor:
    """A local matrix acting jointly on several (possibly non-adjacent) axes.

    The joint local basis is row-major over the listed axes, matching the
    space's global convention.
    """

    def __init__(self, space: HilbertSpace, axes, mat: np.ndarray):
        axes = tuple(axes)
        if len(set(axes)) != len(axes):
            raise ValueError("repeated axes in AxesFactor")
        local_dims = tuple(space.dims[a] for a in axes)
        dj = int(np.prod(local_dims))
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.shape != (dj, dj):
            raise ValueError(f"joint local matrix shape {mat.shape} != ({dj}, {dj})")
        self.axes = axes
        self.mat = mat

        # flat-index offset of each joint local state
        offsets = np.zeros(1, np.int64)
        for a in axes:
            step = np.arange(space.dims[a], dtype=np.int64) * space.strides[a]
            offsets = (offsets[:, None] + step[None, :]).ravel()
        self.offsets = offsets

        # flat indices of basis states with zero occupation on all `axes`
        bases = np.zeros(1, np.int64)
        for k, d in enumerate(space.dims):
            if k in axes:
                continue
            step = np.arange(d, dtype=np.int64) * space.strides[k]
            bases = (bases[:, None] + step[None, :]).ravel()
        self.bases = bases

        rows, cols = np.nonzero(mat)
        self.rows = rows.astype(np.int64)
        self.cols = cols.astype(np.int64)
        self.vals = np.ascontiguousarray(mat[rows, cols], dtype=np.complex128)

    def scaled(self, space, coeff: complex) -> "AxesFactor":
        return AxesFactor(space, self.axes, self.mat * coeff)

    def apply_accum(self, v: np.ndarray, out: np.ndarray) -> None:
        _kernels.apply_fibers_accum(
            v, out, self.rows, self.cols, self.vals, self.offsets, self.bases
        )

    def to_csr(self, space: HilbertSpace) -> sp.csr_matrix:
        n = space.total_dim
        nnz = self.vals.shape[0]
        nb = self.bases.shape[0]
        r = (self.bases[:, None] + self.offsets[self.rows][None, :]).ravel()
        c = (self.bases[:, None] + self.offsets[self.cols][None, :]).ravel()
        d = np.broadcast_to(self.vals, (nb, nnz)).ravel()
        return sp.coo_matrix((d, (r, c)), shape=(n, n)).tocsr()


class SumOfProducts:
    """diag + sum_k coeff_k * (F_k1 F_k2 ...) with axis-local factors.

    Terms are given as ``(coeff, [factor, ...])`` with factors listed in
    application order (first factor hits the vector first).  Factors
    within one term must act on disjoint axes or the caller must order
    them deliberately; application is exact either way.
    """

    def __init__(
        self,
        space: HilbertSpace,
        terms,
        diag: np.ndarray | None = None,
        hermitian_hint: bool | None = None,
    ):
        self.space = space
        self.hermitian_hint = hermitian_hint
        if diag is not None:
            dtype = np.complex128 if np.iscomplexobj(diag) else np.float64
            diag = np.ascontiguousarray(diag, dtype=dtype)
            if diag.shape != (space.total_dim,):
                raise ValueError("diagonal length does not match space dimension")
        self.diag = diag
        # fold each coefficient into that term's last-applied factor so
        # application needs no extra full-vector pass per term
        folded = []
        for coeff, factors in terms:
            factors = list(factors)
            if not factors:
                raise ValueError("a product term needs at least one factor")
            factors[-1] = factors[-1].scaled(space, complex(coeff))
            folded.append(tuple(factors))
        self.terms = tuple(folded)

    @property
    def fingerprint(self) -> str:
        return self.space.fingerprint

    @property
    def shape(self):
        n = self.space.total_dim
        return (n, n)

    def apply_raw(
        self, v: np.ndarray, out: np.ndarray | None = None, work: Workspace | None = None
    ) -> np.ndarray:
        n = self.space.total_dim
        if out is None:
            out = np.empty(n, np.complex128)
        if work is None:
            work = Workspace(n)
        if self.diag is not None:
            _kernels.diag_mul(self.diag, v, out)
        else:
            out.fill(0)
        b0, b1 = work.bufs
        for factors in self.terms:
            src = v
            for f in factors[:-1]:
                dst = b0 if src is not b0 else b1
                dst.fill(0)
                f.apply_accum(src, dst)
                src = dst
            factors[-1].apply_accum(src, out)
        return out

    def apply(self, psi: StateVector, work: Workspace | None = None) -> StateVector:
        if psi.fingerprint != self.fingerprint:
            raise SpaceMismatchError("state and operator live on different spaces")
        return StateVector(self.space, self.apply_raw(psi.data, work=work))

    def to_sparse(self) -> SparseOperator:
        """Materialize as a SparseOperator (intended for small spaces)."""
        n = self.space.total_dim
        acc = sp.csr_matrix((n, n), dtype=np.complex128)
        if self.diag is not None:
            acc = acc + sp.diags(self.diag, format="csr")
        for factors in self.terms:
            m = factors[0].to_csr(self.space)
            for f in factors[1:]:
                m = f.to_csr(self.space) @ m
            acc = acc + m
        return SparseOperator(self.space, acc, self.hermitian_hint)
