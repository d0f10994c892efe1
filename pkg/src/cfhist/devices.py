"""Optical elements as step unitaries.

Conventions (real rotations, no reflection phase):

* beam splitter on ports ``(a, b)``: ``a -> cos t a + sin t b``,
  ``b -> -sin t a + cos t b``, for every polarization.  Reflectivity is
  ``cos^2 t``.  Swapping the port order gives the inverse splitter.
* polarization rotator: ``H -> cos t H + sin t V``, ``V -> -sin t H + cos t V``.
* polarizing beam splitters and routes are permutation matrices.  Only the
  routed inputs need to be given; basis vectors displaced by the routing are
  sent back to the vacated inputs, which keeps the map a permutation.  In the
  circuits here the displaced vectors are always empty at that time step.

Absorbers are routes into dedicated loss channels, so evolution stays unitary.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from math import cos, pi, sin

import numpy as np

from .statespace import (
    BasisVector,
    StateSpace,
    StateSpaceError,
    UnitaryMap,
)


class DeviceError(StateSpaceError):
    """Ill-formed device or step description."""


@dataclass(frozen=True)
class BeamSplitter:
    theta: float
    ports: tuple[str, str]

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= pi / 2 + 1e-15:
            raise DeviceError(f"beam splitter angle {self.theta} outside [0, pi/2]")


@dataclass(frozen=True)
class PolarizingBeamSplitter:
    routes: Mapping[tuple[str, str], str]


@dataclass(frozen=True)
class PolarizationRotator:
    theta: float
    channels: frozenset[str]


@dataclass(frozen=True)
class Mirror:
    channels: frozenset[str]


@dataclass(frozen=True)
class Route:
    mapping: Mapping[str, str]


DeviceSpec = BeamSplitter | PolarizingBeamSplitter | PolarizationRotator | Mirror | Route


@dataclass(frozen=True)
class StepSpec:
    devices: Sequence[DeviceSpec] = field(default_factory=tuple)
    label: str = ""


def beam_splitter_unitary(
    space: StateSpace, theta: float, port_a: str, port_b: str
) -> UnitaryMap:
    if port_a == port_b:
        raise DeviceError(f"beam splitter ports must differ, got {port_a!r} twice")
    space.check_channel(port_a)
    space.check_channel(port_b)
    c, s = cos(theta), sin(theta)
    m = np.eye(space.dim, dtype=complex)
    for pol in space.polarizations:
        ia = space.index((port_a, pol))
        ib = space.index((port_b, pol))
        # columns are inputs
        m[ia, ia], m[ib, ia] = c, s
        m[ia, ib], m[ib, ib] = -s, c
    return UnitaryMap(space, m)


def polarization_rotator_unitary(
    space: StateSpace, theta: float, channels: Iterable[str]
) -> UnitaryMap:
    if not space.polarized:
        raise DeviceError("polarization rotator needs a polarized state space")
    c, s = cos(theta), sin(theta)
    m = np.eye(space.dim, dtype=complex)
    for ch in set(channels):
        space.check_channel(ch)
        ih = space.index((ch, "H"))
        iv = space.index((ch, "V"))
        m[ih, ih], m[iv, ih] = c, s
        m[ih, iv], m[iv, iv] = -s, c
    return UnitaryMap(space, m)


def _permutation_unitary(space: StateSpace, moves: Mapping[BasisVector, BasisVector]) -> UnitaryMap:
    targets = list(moves.values())
    if len(set(targets)) != len(targets):
        raise DeviceError("routing is not injective: two inputs share an output")
    perm = {space.index(src): space.index(dst) for src, dst in moves.items()}
    displaced = sorted(set(perm.values()) - set(perm))
    vacated = sorted(set(perm) - set(perm.values()))
    perm.update(zip(displaced, vacated))
    m = np.zeros((space.dim, space.dim), dtype=complex)
    for i in range(space.dim):
        m[perm.get(i, i), i] = 1.0
    return UnitaryMap(space, m)


def pbs_unitary(space: StateSpace, routes: Mapping[tuple[str, str], str]) -> UnitaryMap:
    """Polarization-dependent routing ``(ch, pol) -> (routes[ch, pol], pol)``."""
    moves = {}
    for (ch, pol), dst in routes.items():
        src = BasisVector(ch, pol)
        space.index(src)
        moves[src] = BasisVector(dst, pol)
        space.index(moves[src])
    return _permutation_unitary(space, moves)


def route_unitary(space: StateSpace, mapping: Mapping[str, str]) -> UnitaryMap:
    """Polarization-blind channel routing ``ch -> mapping[ch]``."""
    for ch in (*mapping, *mapping.values()):
        space.check_channel(ch)
    moves = {
        BasisVector(src, pol): BasisVector(dst, pol)
        for src, dst in mapping.items()
        for pol in space.polarizations
    }
    return _permutation_unitary(space, moves)


def device_unitary(space: StateSpace, device: DeviceSpec) -> UnitaryMap:
    match device:
        case BeamSplitter(theta=theta, ports=(a, b)):
            return beam_splitter_unitary(space, theta, a, b)
        case PolarizingBeamSplitter(routes=routes):
            return pbs_unitary(space, routes)
        case PolarizationRotator(theta=theta, channels=channels):
            return polarization_rotator_unitary(space, theta, channels)
        case Mirror(channels=channels):
            for ch in channels:
                space.check_channel(ch)
            return UnitaryMap.identity(space)
        case Route(mapping=mapping):
            return route_unitary(space, mapping)
    raise DeviceError(f"unknown device {device!r}")


def build_step(spec: StepSpec, space: StateSpace) -> UnitaryMap:
    """Compose the devices of one time step in list order."""
    m = np.eye(space.dim, dtype=complex)
    for device in spec.devices:
        m = device_unitary(space, device).matrix @ m
    return UnitaryMap(space, m, label=spec.label)
