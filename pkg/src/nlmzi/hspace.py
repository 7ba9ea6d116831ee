"""Composite Hilbert spaces as ordered tensor products of subsystems.

A space is an ordered list of labelled subsystems, either truncated boson
modes (Fock states |0>..|cutoff>, local dimension cutoff+1) or two-level
systems (|g> = index 0, |e> = index 1).  Basis states are indexed
row-major with the *last* listed subsystem varying fastest, so the stride
of subsystem k is the product of the local dimensions after it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Boson",
    "TwoLevel",
    "Subsystem",
    "HilbertSpace",
    "Partition",
    "build_space",
    "basis_index",
    "basis_unindex",
    "partition",
]

# int64 index arithmetic must never overflow
_MAX_TOTAL_DIM = 2**62


@dataclass(frozen=True)
class Boson:
    """A bosonic mode truncated at Fock state |cutoff> (local dim cutoff+1)."""

    cutoff: int

    def __post_init__(self):
        if not isinstance(self.cutoff, int) or self.cutoff < 1:
            raise ValueError(f"boson cutoff must be an integer >= 1, got {self.cutoff!r}")

    @property
    def dim(self) -> int:
        return self.cutoff + 1


@dataclass(frozen=True)
class TwoLevel:
    """A two-level system; |g> = index 0, |e> = index 1."""

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class Subsystem:
    label: str
    kind: Boson | TwoLevel

    @property
    def dim(self) -> int:
        return self.kind.dim


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of subsystems with a row-major basis index map.

    Construct through :func:`build_space`; the constructor assumes its
    arguments are already validated and consistent.
    """

    subsystems: tuple[Subsystem, ...]
    dims: tuple[int, ...]
    strides: tuple[int, ...]
    total_dim: int
    fingerprint: str = field(compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    def axis(self, label: str) -> int:
        """Position of `label` in the subsystem ordering."""
        for k, s in enumerate(self.subsystems):
            if s.label == label:
                return k
        raise KeyError(f"no subsystem labelled {label!r} in space {self.labels}")

    def subsystem(self, label: str) -> Subsystem:
        return self.subsystems[self.axis(label)]

    def dim_of(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def index(self, occupations) -> int:
        return basis_index(self, occupations)

    def unindex(self, index: int) -> tuple[int, ...]:
        return basis_unindex(self, index)

    def occupation_array(self, label: str) -> np.ndarray:
        """Occupation of `label` for every basis index, as an int32 vector."""
        k = self.axis(label)
        idx = np.arange(self.total_dim, dtype=np.int64)
        return ((idx // self.strides[k]) % self.dims[k]).astype(np.int32)

    def to_dict(self) -> dict:
        subs = []
        for s in self.subsystems:
            if isinstance(s.kind, Boson):
                subs.append({"label": s.label, "kind": "boson", "cutoff": s.kind.cutoff})
            else:
                subs.append({"label": s.label, "kind": "two_level"})
        return {"subsystems": subs}

    @staticmethod
    def from_dict(d: dict) -> "HilbertSpace":
        subs = []
        for entry in d["subsystems"]:
            if entry["kind"] == "boson":
                subs.append(Subsystem(entry["label"], Boson(int(entry["cutoff"]))))
            elif entry["kind"] == "two_level":
                subs.append(Subsystem(entry["label"], TwoLevel()))
            else:
                raise ValueError(f"unknown subsystem kind {entry['kind']!r}")
        return build_space(subs)


@dataclass(frozen=True)
class Partition:
    """A bipartition of a space's subsystems into kept and traced-out sets.

    Label tuples preserve the subsystem order of the parent space.
    """

    space: HilbertSpace
    kept: tuple[str, ...]
    traced: tuple[str, ...]

    @property
    def kept_dim(self) -> int:
        d = 1
        for lbl in self.kept:
            d *= self.space.dim_of(lbl)
        return d

    @property
    def traced_dim(self) -> int:
        d = 1
        for lbl in self.traced:
            d *= self.space.dim_of(lbl)
        return d


def build_space(subsystems) -> HilbertSpace:
    """Build a HilbertSpace from an ordered list of subsystems.

    Raises ValueError on duplicate labels or a total dimension too large
    for int64 index arithmetic.
    """
    subs = tuple(subsystems)
    if not subs:
        raise ValueError("a space needs at least one subsystem")
    seen = set()
    for s in subs:
        if not isinstance(s, Subsystem):
            raise TypeError(f"expected Subsystem, got {type(s).__name__}")
        if s.label in seen:
            raise ValueError(f"duplicate subsystem label {s.label!r}")
        seen.add(s.label)

    dims = tuple(s.dim for s in subs)
    total = 1
    for d in dims:
        total *= d
        if total > _MAX_TOTAL_DIM:
            raise ValueError(
                f"total dimension overflows the index range (> 2^62) at subsystem "
                f"{subs[len(seen) - 1].label!r}"
            )

    strides = []
    acc = 1
    for d in reversed(dims):
        strides.append(acc)
        acc *= d
    strides = tuple(reversed(strides))

    raw = ";".join(
        f"{s.label}:B{s.kind.cutoff}" if isinstance(s.kind, Boson) else f"{s.label}:T"
        for s in subs
    )
    fp = hashlib.sha256(raw.encode()).hexdigest()[:16]
    return HilbertSpace(subs, dims, strides, total, fp)


def basis_index(space: HilbertSpace, occupations) -> int:
    """Map per-subsystem occupations to the flat basis index."""
    occs = tuple(occupations)
    if len(occs) != len(space.dims):
        raise ValueError(
            f"expected {len(space.dims)} occupations, got {len(occs)}"
        )
    idx = 0
    for n, d, s, sub in zip(occs, space.dims, space.strides, space.subsystems):
        if not 0 <= n < d:
            raise ValueError(
                f"occupation {n} out of range [0, {d}) for subsystem {sub.label!r}"
            )
        idx += n * s
    return idx


def basis_unindex(space: HilbertSpace, index: int) -> tuple[int, ...]:
    """Inverse of :func:`basis_index`."""
    if not 0 <= index < space.total_dim:
        raise ValueError(f"basis index {index} out of range [0, {space.total_dim})")
    occs = []
    rem = index
    for d, s in zip(space.dims, space.strides):
        occs.append(rem // s)
        rem %= s
    return tuple(occs)


def partition(space: HilbertSpace, kept) -> Partition:
    """Split the space's labels into a kept set and its traced complement."""
    kept_set = set(kept)
    if not kept_set:
        raise ValueError("kept set must be nonempty")
    unknown = kept_set - set(space.labels)
    if unknown:
        raise KeyError(f"unknown labels in kept set: {sorted(unknown)}")
    kept_ordered = tuple(lbl for lbl in space.labels if lbl in kept_set)
    traced_ordered = tuple(lbl for lbl in space.labels if lbl not in kept_set)
    return Partition(space, kept_ordered, traced_ordered)
