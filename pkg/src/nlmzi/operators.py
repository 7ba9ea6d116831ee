"""Elementary operators on composite spaces and sparse operator algebra.

Operators are immutable CSR matrices tagged with the fingerprint of the
space they act on; all binary operations require matching fingerprints.
Composition is exposed through Python operators: ``+``, ``-``, ``@``
(operator product), ``*`` (scalar), unary ``-``, and ``.H`` (adjoint).
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import HermiticityError, SpaceMismatchError
from .hspace import Boson, HilbertSpace, TwoLevel

__all__ = [
    "SparseOperator",
    "StateVector",
    "identity",
    "destroy",
    "create",
    "number",
    "pauli",
    "embed",
    "apply",
    "expectation",
    "commutator",
    "entrywise_max_diff",
]

HERMITICITY_TOL = 1e-12
_EXPECTATION_IMAG_TOL = 1e-9
_NORM_WARN_TOL = 1e-6

_PAULI = {
    # basis order (|g>, |e>); sigma_z |g> = -|g> so n = (1+sigma_z)/2 kills |g>
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=np.complex128),
    "z": np.array([[-1, 0], [0, 1]], dtype=np.complex128),
}


class StateVector:
    """Dense complex amplitude vector over a HilbertSpace.

    The underlying array is marked read-only; derive new states instead
    of mutating.
    """

    __slots__ = ("space", "data")

    def __init__(self, space: HilbertSpace, data: np.ndarray):
        data = np.ascontiguousarray(data, dtype=np.complex128)
        if data.shape != (space.total_dim,):
            raise ValueError(
                f"amplitude vector has shape {data.shape}, expected ({space.total_dim},)"
            )
        if not np.all(np.isfinite(data.view(np.float64))):
            raise ValueError("amplitude vector contains non-finite entries")
        data.flags.writeable = False
        self.space = space
        self.data = data

    @property
    def fingerprint(self) -> str:
        return self.space.fingerprint

    def norm(self) -> float:
        return float(np.sqrt(_kernels.norm_sq(self.data)))

    def inner(self, other: "StateVector") -> complex:
        _require_same_space(self, other)
        return complex(_kernels.vdot_chunked(self.data, other.data))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.data / n)

    def __repr__(self):
        return f"StateVector(dim={self.space.total_dim}, norm={self.norm():.12f})"


class SparseOperator:
    """Sparse complex operator over a HilbertSpace.

    `hermitian_hint=True` asserts Hermiticity; it is verified on demand
    by :meth:`check_hermitian` and enforced inside :func:`expectation`.
    """

    __slots__ = ("space", "matrix", "hermitian_hint")

    def __init__(self, space: HilbertSpace, matrix, hermitian_hint: bool | None = None):
        m = sp.csr_matrix(matrix, dtype=np.complex128)
        if m.shape != (space.total_dim, space.total_dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dimension {space.total_dim}"
            )
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        self.space = space
        self.matrix = m
        self.hermitian_hint = hermitian_hint

    # -- metadata ------------------------------------------------------

    @property
    def fingerprint(self) -> str:
        return self.space.fingerprint

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def __repr__(self):
        return f"SparseOperator(dim={self.shape[0]}, nnz={self.nnz}, hermitian={self.hermitian_hint})"

    # -- algebra -------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        _require_same_space(self, other)
        hint = True if (self.hermitian_hint and other.hermitian_hint) else None
        return SparseOperator(self.space, self.matrix + other.matrix, hint)

    def __sub__(self, other):
        if not isinstance(other, SparseOperator):
            return NotImplemented
        _require_same_space(self, other)
        hint = True if (self.hermitian_hint and other.hermitian_hint) else None
        return SparseOperator(self.space, self.matrix - other.matrix, hint)

    def __neg__(self):
        return SparseOperator(self.space, -self.matrix, self.hermitian_hint)

    def __mul__(self, scalar):
        if isinstance(scalar, SparseOperator):
            return self.__matmul__(scalar)
        z = complex(scalar)
        hint = self.hermitian_hint if z.imag == 0.0 else None
        return SparseOperator(self.space, self.matrix * z, hint)

    def __rmul__(self, scalar):
        return self.__mul__(scalar)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if not isinstance(other, SparseOperator):
            return NotImplemented
        _require_same_space(self, other)
        return SparseOperator(self.space, self.matrix @ other.matrix, None)

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(
            self.space, self.matrix.conj().transpose().tocsr(), self.hermitian_hint
        )

    @property
    def H(self) -> "SparseOperator":
        return self.adjoint()

    # -- verification ---------------------------------------------------

    def hermiticity_defect(self) -> float:
        """Largest entrywise |A - A^dagger|."""
        diff = (self.matrix - self.matrix.conj().transpose()).tocsr()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def check_hermitian(self, tol: float = HERMITICITY_TOL) -> None:
        defect = self.hermiticity_defect()
        if defect > tol:
            raise HermiticityError(
                f"operator tagged Hermitian has entrywise defect {defect:.3e} > {tol:.0e}"
            )

    # -- action ----------------------------------------------------------

    def apply(self, psi: StateVector) -> StateVector:
        _require_same_space(self, psi)
        out = self.apply_raw(psi.data)
        return StateVector(self.space, out)

    def apply_raw(self, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(self.shape[0], np.complex128)
        m = self.matrix
        _kernels.csr_matvec(m.indptr, m.indices, m.data, v, out)
        return out

    # -- export ----------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def to_matrix_market(self, path) -> None:
        """Debug dump in Matrix Market coordinate format."""
        sp.save_npz  # keep scipy import honest under linters
        from scipy.io import mmwrite

        mmwrite(str(path), self.matrix.tocoo())


# -- constructors ---------------------------------------------------------


def identity(space: HilbertSpace) -> SparseOperator:
    return SparseOperator(space, sp.identity(space.total_dim, format="csr"), True)


def lowering_matrix(dim: int) -> np.ndarray:
    """Local annihilation matrix: <n-1| a |n> = sqrt(n)."""
    m = np.zeros((dim, dim), dtype=np.complex128)
    for n in range(1, dim):
        m[n - 1, n] = np.sqrt(n)
    return m


def embed(
    space: HilbertSpace, label: str, local, hermitian_hint: bool | None = None
) -> SparseOperator:
    """Embed a local matrix on one subsystem, identity elsewhere."""
    k = space.axis(label)
    d = space.dims[k]
    local = np.asarray(local, dtype=np.complex128)
    if local.shape != (d, d):
        raise ValueError(f"local matrix shape {local.shape} does not match dim {d}")
    n_left = 1
    for dd in space.dims[:k]:
        n_left *= dd
    n_right = space.strides[k]
    m = sp.kron(
        sp.kron(sp.identity(n_left, format="csr"), sp.csr_matrix(local)),
        sp.identity(n_right, format="csr"),
        format="csr",
    )
    return SparseOperator(space, m, hermitian_hint)


def _require_boson(space: HilbertSpace, label: str):
    sub = space.subsystem(label)
    if not isinstance(sub.kind, Boson):
        raise TypeError(f"subsystem {label!r} is not a boson mode")
    return sub


def destroy(space: HilbertSpace, label: str) -> SparseOperator:
    """Embedded annihilation operator; transitions above the cutoff drop."""
    sub = _require_boson(space, label)
    return embed(space, label, lowering_matrix(sub.dim))


def create(space: HilbertSpace, label: str) -> SparseOperator:
    """Embedded creation operator, adjoint of :func:`destroy`."""
    sub = _require_boson(space, label)
    return embed(space, label, lowering_matrix(sub.dim).conj().T)


def number(space: HilbertSpace, label: str) -> SparseOperator:
    sub = _require_boson(space, label)
    return embed(space, label, np.diag(np.arange(sub.dim, dtype=np.complex128)), True)


def pauli(space: HilbertSpace, label: str, axis: str) -> SparseOperator:
    if axis not in _PAULI:
        raise ValueError(f"pauli axis must be one of x/y/z, got {axis!r}")
    sub = space.subsystem(label)
    if not isinstance(sub.kind, TwoLevel):
        raise TypeError(f"subsystem {label!r} is not a two-level system")
    return embed(space, label, _PAULI[axis], True)


# -- functional forms ------------------------------------------------------


def apply(op: SparseOperator, psi: StateVector) -> StateVector:
    return op.apply(psi)


def expectation(op, psi: StateVector) -> complex:
    """<psi| op |psi>; enforces realness for Hermitian-tagged operators."""
    _require_same_space(op, psi)
    nrm = psi.norm()
    if abs(nrm - 1.0) > _NORM_WARN_TOL:
        warnings.warn(
            f"expectation on a state with norm {nrm:.9f} (|norm-1| > {_NORM_WARN_TOL})",
            stacklevel=2,
        )
    opsi = op.apply_raw(psi.data)
    val = complex(_kernels.vdot_chunked(psi.data, opsi))
    if getattr(op, "hermitian_hint", None):
        if abs(val.imag) > _EXPECTATION_IMAG_TOL * (1.0 + abs(val.real)):
            raise HermiticityError(
                f"Hermitian-tagged expectation has imaginary part {val.imag:.3e} "
                f"(re = {val.real:.3e})"
            )
    return val


def commutator(a: SparseOperator, b: SparseOperator) -> SparseOperator:
    return a @ b - b @ a


def entrywise_max_diff(a: SparseOperator, b: SparseOperator) -> float:
    _require_same_space(a, b)
    diff = (a.matrix - b.matrix).tocsr()
    return float(np.abs(diff.data).max()) if diff.nnz else 0.0


def _require_same_space(a, b):
    if a.fingerprint != b.fingerprint:
        raise SpaceMismatchError(
            f"space fingerprint mismatch: {a.fingerprint} vs {b.fingerprint}"
        )
