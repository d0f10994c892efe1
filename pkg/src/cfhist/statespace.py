"""Labeled finite-dimensional state space: channels x polarizations.

Every basis vector is a ``(channel, polarization)`` pair.  Circuits without
polarization optics use the single sentinel polarization :data:`UNPOLARIZED`,
so one engine serves both kinds of model.

States are dense complex vectors tied to their :class:`StateSpace`; projectors
are diagonal in the product basis and are stored as a set of basis vectors.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

H = "H"
V = "V"
UNPOLARIZED = "-"

POLARIZATIONS = (H, V)

ZERO_TOL = 1e-10
UNITARY_TOL = 1e-12


class StateSpaceError(ValueError):
    """Raised for malformed states, unknown basis labels or mismatched spaces."""


class NonUnitaryError(StateSpaceError):
    """Raised when a matrix that must be unitary is not."""


class BasisVector(NamedTuple):
    channel: str
    polarization: str

    def __str__(self) -> str:
        if self.polarization == UNPOLARIZED:
            return self.channel
        return f"{self.channel},{self.polarization}"


@dataclass(frozen=True)
class StateSpace:
    """Registry of channels and polarizations; fixed once constructed."""

    channels: tuple[str, ...]
    polarizations: tuple[str, ...] = POLARIZATIONS
    _index: dict[BasisVector, int] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        pols = tuple(self.polarizations)
        if len(set(channels)) != len(channels):
            raise StateSpaceError(f"duplicate channel in registry: {channels}")
        if len(set(pols)) != len(pols) or not pols:
            raise StateSpaceError(f"bad polarization set: {pols}")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "polarizations", pols)
        index = {
            BasisVector(ch, pol): i
            for i, (ch, pol) in enumerate((c, p) for c in channels for p in pols)
        }
        object.__setattr__(self, "_index", index)

    @classmethod
    def unpolarized(cls, channels: Iterable[str]) -> StateSpace:
        return cls(tuple(channels), (UNPOLARIZED,))

    @property
    def dim(self) -> int:
        return len(self._index)

    @property
    def basis(self) -> tuple[BasisVector, ...]:
        return tuple(self._index)

    @property
    def polarized(self) -> bool:
        return self.polarizations != (UNPOLARIZED,)

    def index(self, bv: BasisVector | tuple[str, str]) -> int:
        try:
            return self._index[BasisVector(*bv)]
        except KeyError:
            raise StateSpaceError(f"unknown basis vector {tuple(bv)!r}") from None

    def check_channel(self, channel: str) -> None:
        if channel not in self.channels:
            raise StateSpaceError(f"unknown channel {channel!r}")

    def basis_vector(self, channel: str, polarization: str | None = None) -> BasisVector:
        if polarization is None:
            if self.polarized:
                raise StateSpaceError("polarization required in a polarized space")
            polarization = UNPOLARIZED
        bv = BasisVector(channel, polarization)
        self.index(bv)
        return bv

    def require_same(self, other: StateSpace) -> None:
        if self != other:
            raise StateSpaceError("objects live in different state spaces")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude per basis vector; may be sub-normalized."""

    space: StateSpace
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise StateSpaceError(
                f"amplitude vector of shape {amps.shape} for space of dim {self.space.dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, channel: str, polarization: str | None = None) -> complex:
        bv = self.space.basis_vector(channel, polarization)
        return complex(self.amplitudes[self.space.index(bv)])

    def channel_weight(self, channel: str) -> float:
        """Squared norm carried by one channel, summed over polarizations."""
        self.space.check_channel(channel)
        return float(
            sum(
                abs(self.amplitudes[self.space.index((channel, p))]) ** 2
                for p in self.space.polarizations
            )
        )

    def items(self, tol: float = 0.0) -> Iterator[tuple[BasisVector, complex]]:
        """Nonzero entries (``|amp| > tol``) in basis order."""
        for bv, amp in zip(self.space.basis, self.amplitudes):
            if abs(amp) > tol:
                yield bv, complex(amp)

    def isclose(self, other: StateVector, tol: float = ZERO_TOL) -> bool:
        self.space.require_same(other.space)
        return bool(np.max(np.abs(self.amplitudes - other.amplitudes), initial=0.0) < tol)

    def __add__(self, other: StateVector) -> StateVector:
        self.space.require_same(other.space)
        return StateVector(self.space, self.amplitudes + other.amplitudes)

    def __repr__(self) -> str:
        terms = ", ".join(f"({bv}): {amp:.6g}" for bv, amp in self.items(ZERO_TOL))
        return f"StateVector({{{terms}}})"


@dataclass(frozen=True)
class Projector:
    """Orthogonal projection onto a set of basis vectors."""

    space: StateSpace
    support: frozenset[BasisVector]

    def __post_init__(self) -> None:
        support = frozenset(BasisVector(*bv) for bv in self.support)
        for bv in support:
            self.space.index(bv)
        object.__setattr__(self, "support", support)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.space.dim, dtype=bool)
        for bv in self.support:
            m[self.space.index(bv)] = True
        return m

    @property
    def is_zero(self) -> bool:
        return not self.support

    @property
    def is_identity(self) -> bool:
        return len(self.support) == self.space.dim

    def __or__(self, other: Projector) -> Projector:
        self.space.require_same(other.space)
        return Projector(self.space, self.support | other.support)

    def __add__(self, other: Projector) -> Projector:
        """Sum of two orthogonal projectors (e.g. ``B2 + C2``)."""
        if not orthogonal(self, other):
            raise StateSpaceError("sum of non-orthogonal projectors is not a projector")
        return self | other

    def __and__(self, other: Projector) -> Projector:
        self.space.require_same(other.space)
        return Projector(self.space, self.support & other.support)

    def __le__(self, other: Projector) -> bool:
        return self.support <= other.support


@dataclass(frozen=True, eq=False)
class UnitaryMap:
    """Dense square matrix over the basis; unitarity checked on construction."""

    space: StateSpace
    matrix: np.ndarray
    label: str = ""
    check: bool = True

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise StateSpaceError(
                f"matrix of shape {m.shape} for space of dim {self.space.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.check and unitarity_defect(m) >= UNITARY_TOL:
            raise NonUnitaryError(
                f"step {self.label or '?'} is not unitary "
                f"(max |U^dag U - I| = {unitarity_defect(m):.3e})"
            )

    @classmethod
    def identity(cls, space: StateSpace, label: str = "") -> UnitaryMap:
        return cls(space, np.eye(space.dim, dtype=complex), label)

    def __matmul__(self, other: UnitaryMap) -> UnitaryMap:
        """Composition: ``(U @ W)`` applies ``W`` first."""
        self.space.require_same(other.space)
        return UnitaryMap(self.space, self.matrix @ other.matrix, check=self.check and other.check)

    @property
    def dagger(self) -> UnitaryMap:
        return UnitaryMap(self.space, self.matrix.conj().T, check=self.check)


def unitarity_defect(matrix: np.ndarray) -> float:
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def make_state(
    space: StateSpace,
    assignments: Mapping[tuple[str, str], complex] | Iterable[tuple[tuple[str, str], complex]],
) -> StateVector:
    """Build a state from ``(channel, polarization) -> amplitude`` pairs.

    No normalization is applied.  Duplicate basis vectors and unknown labels
    raise :class:`StateSpaceError`.
    """
    pairs = assignments.items() if isinstance(assignments, Mapping) else assignments
    amps = np.zeros(space.dim, dtype=complex)
    seen: set[BasisVector] = set()
    for key, amp in pairs:
        bv = BasisVector(*key)
        if bv in seen:
            raise StateSpaceError(f"duplicate basis vector {tuple(bv)!r}")
        seen.add(bv)
        amps[space.index(bv)] = amp
    return StateVector(space, amps)


def basis_state(space: StateSpace, channel: str, polarization: str | None = None) -> StateVector:
    return make_state(space, {space.basis_vector(channel, polarization): 1.0})


def zero_state(space: StateSpace) -> StateVector:
    return StateVector(space, np.zeros(space.dim, dtype=complex))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    a.space.require_same(b.space)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def apply_unitary(u: UnitaryMap, s: StateVector) -> StateVector:
    u.space.require_same(s.space)
    return StateVector(s.space, u.matrix @ s.amplitudes)


def project(p: Projector, s: StateVector) -> StateVector:
    p.space.require_same(s.space)
    return StateVector(s.space, np.where(p.mask, s.amplitudes, 0.0))


def complement(p: Projector) -> Projector:
    return Projector(p.space, frozenset(p.space.basis) - p.support)


def orthogonal(p: Projector, q: Projector) -> bool:
    p.space.require_same(q.space)
    return p.support.isdisjoint(q.support)


def identity_projector(space: StateSpace) -> Projector:
    return Projector(space, frozenset(space.basis))


def zero_projector(space: StateSpace) -> Projector:
    return Projector(space, frozenset())


def channel_projector(
    space: StateSpace, *channels: str, polarization: str | None = None
) -> Projector:
    """Projector onto ``channels``; all polarizations unless one is given.

    ``channel_projector(space, "S", polarization=H)`` is ``S (x) H``.
    """
    for ch in channels:
        space.check_channel(ch)
    pols = space.polarizations if polarization is None else (polarization,)
    for pol in pols:
        if pol not in space.polarizations:
            raise StateSpaceError(f"unknown polarization {pol!r}")
    return Projector(space, frozenset(BasisVector(ch, pol) for ch in channels for pol in pols))


def polarization_projector(space: StateSpace, polarization: str) -> Projector:
    return channel_projector(space, *space.channels, polarization=polarization)
