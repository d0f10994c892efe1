"""Circuit models and history families for the two interferometers.

Nested Mach-Zehnder (channels S..H, no polarization), times t0..t4::

    T10  BS1  S -> {A, D}            (outer, reflectivity cos^2 theta_outer into A)
    T21  BS2  D -> {B, C}            (inner); A held by a mirror
    T32  BS3  {B, C} -> {E, H}       (inverse of BS2, so D exits through H)
    T43  BS4  {A, E} -> {F, G}       (outer); H stays at its detector

Michelson outer cycle in the sequential layout, channel x polarization,
``N + 2`` steps per outer cycle (t0..t4 for N = 2)::

    T10      PR(pi/2M) on S, PBS (S,H)->A, (S,V)->D
    T21      PR(pi/2N) on D, PBS (D,H)->C, (D,V)->B
    middle   merge {B,C}->D, PR(pi/2N), split again       (N - 1 times)
    final    merge {B,C}->D, PBS (A,H)->S, (D,V)->S, (D,H)->loss

Loss and Bob-detector channels are shift registers (L1->L2->..., X1->X2->...),
which keeps every outer cycle's transfer matrix identical while never sending
absorbed amplitude back into the interferometer.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from math import acos, cos, pi, sqrt

import numpy as np

from .devices import (
    BeamSplitter,
    Mirror,
    PolarizationRotator,
    PolarizingBeamSplitter,
    Route,
    StepSpec,
    build_step,
)
from .histories import Decomposition, FamilyError, History, HistoryFamily
from .statespace import (
    H,
    UNITARY_TOL,
    V,
    StateSpace,
    StateSpaceError,
    StateVector,
    UnitaryMap,
    basis_state,
    channel_projector,
    complement,
)

MZI_CHANNELS = ("S", "A", "B", "C", "D", "E", "F", "G", "H")
COMMUNICATION = "C"


class ConfigError(StateSpaceError):
    """Parameters outside the protocol or free-form parameter space."""


class DarkPortError(ConfigError):
    """The inner interferometer leaks into its dark port E."""


def reflectivity_to_theta(r: float) -> float:
    if not 0.0 <= r <= 1.0:
        raise ConfigError(f"reflectivity {r} outside [0, 1]")
    return acos(sqrt(r))


def _check_cycles(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 2:
        raise ConfigError(f"{name} must be an integer >= 2, got {value!r}")


@dataclass(frozen=True)
class MziConfig:
    theta_outer: float
    theta_inner: float
    # BS3 angle; None means "same as BS2", which closes the inner interferometer
    theta_inner_out: float | None = None

    def __post_init__(self) -> None:
        for name in ("theta_outer", "theta_inner", "theta_inner_out"):
            t = getattr(self, name)
            if t is not None and not 0.0 <= t <= pi / 2:
                raise ConfigError(f"{name}={t} outside [0, pi/2]")

    @classmethod
    def protocol(cls, M: int, N: int) -> MziConfig:
        _check_cycles("M", M)
        _check_cycles("N", N)
        return cls(pi / (2 * M), pi / (2 * N))

    @classmethod
    def from_reflectivity(cls, outer: float, inner: float = 0.5) -> MziConfig:
        return cls(reflectivity_to_theta(outer), reflectivity_to_theta(inner))

    @property
    def reflectivity_outer(self) -> float:
        return cos(self.theta_outer) ** 2

    @property
    def reflectivity_inner(self) -> float:
        return cos(self.theta_inner) ** 2


@dataclass(frozen=True)
class MichelsonConfig:
    M: int = 2
    N: int = 2
    bob_blocks: bool = False
    outer_cycles_built: int = 1

    def __post_init__(self) -> None:
        _check_cycles("M", self.M)
        _check_cycles("N", self.N)
        if not isinstance(self.outer_cycles_built, (int, np.integer)) or self.outer_cycles_built < 1:
            raise ConfigError("outer_cycles_built must be a positive integer")

    @property
    def steps_per_cycle(self) -> int:
        return self.N + 2


@dataclass(frozen=True, eq=False)
class CircuitModel:
    kind: str
    space: StateSpace
    steps: tuple[UnitaryMap, ...]
    initial: StateVector
    config: MziConfig | MichelsonConfig
    roles: dict[str, tuple[str, ...]] = field(default_factory=dict)
    cycles: int = 1

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def steps_per_cycle(self) -> int:
        return self.n_steps // self.cycles

    @property
    def time_labels(self) -> tuple[str, ...]:
        return tuple(f"t{k}" for k in range(self.n_steps + 1))

    def cycle_transfer(self, cycle: int) -> np.ndarray:
        """Composed matrix of outer cycle ``cycle`` (1-based)."""
        if not 1 <= cycle <= self.cycles:
            raise ConfigError(f"cycle {cycle} not in 1..{self.cycles}")
        k = self.steps_per_cycle
        m = np.eye(self.space.dim, dtype=complex)
        for u in self.steps[(cycle - 1) * k : cycle * k]:
            m = u.matrix @ m
        return m


def _step_label(t: int) -> str:
    return f"T_{{{t + 1},{t}}}"


def build_griffiths_mzi(config: MziConfig) -> CircuitModel:
    space = StateSpace.unpolarized(MZI_CHANNELS)
    to, ti = config.theta_outer, config.theta_inner
    ti_out = ti if config.theta_inner_out is None else config.theta_inner_out
    specs = [
        StepSpec([Route({"S": "A"}), BeamSplitter(to, ("A", "D"))], _step_label(0)),
        StepSpec([Mirror(frozenset({"A"})), Route({"D": "B"}), BeamSplitter(ti, ("B", "C"))], _step_label(1)),
        # reversed port order: inverse of BS2 when the angles match
        StepSpec([BeamSplitter(ti_out, ("C", "B")), Route({"B": "H", "C": "E"})], _step_label(2)),
        StepSpec([BeamSplitter(to, ("E", "A")), Route({"A": "F", "E": "G"})], _step_label(3)),
    ]
    steps = tuple(build_step(s, space) for s in specs)
    model = CircuitModel(
        kind="griffiths-mzi",
        space=space,
        steps=steps,
        initial=basis_state(space, "S"),
        config=config,
        roles={"communication": (COMMUNICATION,), "detectors": ("H", "F", "G")},
    )
    leak = dark_port_leak(model)
    if leak >= UNITARY_TOL:
        raise DarkPortError(f"inner interferometer leaks {leak:.3e} into E")
    return model


def dark_port_leak(model: CircuitModel) -> float:
    """|amplitude in E at t3| for a unit amplitude entering D at t1."""
    s = basis_state(model.space, "D").amplitudes
    for u in model.steps[1:3]:
        s = u.matrix @ s
    return float(abs(s[model.space.index(("E", "-"))]))


def _michelson_space(cfg: MichelsonConfig) -> tuple[StateSpace, tuple[str, ...], tuple[str, ...]]:
    loss = tuple(f"L{k}" for k in range(1, cfg.outer_cycles_built + 1))
    bob = ()
    if cfg.bob_blocks:
        bob = tuple(f"X{k}" for k in range(1, cfg.N * cfg.outer_cycles_built + 1))
    return StateSpace(("S", "A", "B", "C", "D") + loss + bob), loss, bob


def _michelson_cycle_specs(cfg: MichelsonConfig, loss, bob, t0: int) -> list[StepSpec]:
    outer, inner = pi / (2 * cfg.M), pi / (2 * cfg.N)
    hold = Mirror(frozenset({"A"}))
    split = PolarizingBeamSplitter({("D", H): "C", ("D", V): "B"})
    merge = PolarizingBeamSplitter({("B", V): "D", ("C", H): "D"})
    block = []
    if bob:
        shift = {"C": bob[0]} | {a: b for a, b in zip(bob, bob[1:])}
        block = [Route(shift)]
    recombine = {("A", H): "S", ("D", V): "S", ("D", H): loss[0]}
    recombine |= {(a, H): b for a, b in zip(loss, loss[1:])}

    specs = [
        StepSpec(
            [PolarizationRotator(outer, frozenset({"S"})),
             PolarizingBeamSplitter({("S", H): "A", ("S", V): "D"})],
            _step_label(t0),
        ),
        StepSpec([hold, PolarizationRotator(inner, frozenset({"D"})), split], _step_label(t0 + 1)),
    ]
    for k in range(cfg.N - 1):
        specs.append(
            StepSpec(
                [hold, *block, merge, PolarizationRotator(inner, frozenset({"D"})), split],
                _step_label(t0 + 2 + k),
            )
        )
    specs.append(
        StepSpec([*block, merge, PolarizingBeamSplitter(recombine)], _step_label(t0 + cfg.N + 1))
    )
    return specs


def build_michelson(config: MichelsonConfig) -> CircuitModel:
    """``config.outer_cycles_built`` identical outer cycles back to back."""
    space, loss, bob = _michelson_space(config)
    per = config.steps_per_cycle
    specs = _michelson_cycle_specs(config, loss, bob, 0)
    first = tuple(build_step(s, space) for s in specs)
    steps = list(first)
    for c in range(1, config.outer_cycles_built):
        steps.extend(
            UnitaryMap(space, u.matrix, label=_step_label(c * per + j)) for j, u in enumerate(first)
        )
    kind = "michelson-cycle" if config.outer_cycles_built == 1 else "michelson-two-cycle"
    return CircuitModel(
        kind=kind,
        space=space,
        steps=tuple(steps),
        initial=basis_state(space, "S", H),
        config=config,
        roles={"communication": (COMMUNICATION,), "loss": loss, "bob": bob},
        cycles=config.outer_cycles_built,
    )


def build_michelson_cycle(config: MichelsonConfig) -> CircuitModel:
    if config.outer_cycles_built != 1:
        config = MichelsonConfig(config.M, config.N, config.bob_blocks, 1)
    return build_michelson(config)


def build_michelson_multi(config: MichelsonConfig) -> CircuitModel:
    if config.outer_cycles_built < 2:
        config = MichelsonConfig(config.M, config.N, config.bob_blocks, 2)
    return build_michelson(config)


def evolve(
    model: CircuitModel, initial: StateVector | None = None, start: int = 0
) -> list[StateVector]:
    """Unprojected state at every time from ``t_start`` on.

    Plain matrix-vector products; serves as the independent oracle for chain
    kets.
    """
    s = (model.initial if initial is None else initial).amplitudes
    out = [StateVector(model.space, s)]
    for u in model.steps[start:]:
        s = u.matrix @ s
        out.append(StateVector(model.space, s))
    return out


# ---------------------------------------------------------------- families


def _require(model: CircuitModel, *kinds: str) -> None:
    if model.kind not in kinds:
        raise FamilyError(f"family needs a {' or '.join(kinds)} model, got {model.kind}")


def _channels(model: CircuitModel, t: int, names: str, *, rest: str | None = None,
              flag_rest: bool = True) -> Decomposition:
    projs = [channel_projector(model.space, ch) for ch in names]
    labels = [f"{ch}{t}" for ch in names]
    return Decomposition.complete(projs, labels, rest_label=rest, flag_rest=flag_rest)


def family_FpA(model: CircuitModel) -> HistoryFamily:
    """S0 (.) {A1, D1, Q1} (.) {A2, B2+C2} (.) {A3, E3, H3} (.) F4."""
    _require(model, "griffiths-mzi")
    sp = model.space
    b2c2 = channel_projector(sp, "B", "C")
    slots = (
        _channels(model, 1, "AD", rest="Q1", flag_rest=False),
        Decomposition.complete([channel_projector(sp, "A"), b2c2], ["A2", "B2+C2"]),
        _channels(model, 3, "AEH"),
        _channels(model, 4, "F"),
    )
    return HistoryFamily(model.initial, model.steps, slots, name="FpA")


def family_FC(model: CircuitModel, refined: bool = False) -> HistoryFamily:
    """S0 (.) I1 (.) {C2, ~C2} (.) I3 (.) F4, optionally with {A3, E3, H3} at t3."""
    _require(model, "griffiths-mzi")
    sp = model.space
    c2 = channel_projector(sp, "C")
    slots = (
        Decomposition.identity(sp, "I1"),
        Decomposition((c2, complement(c2)), ("C2", "~C2")),
        _channels(model, 3, "AEH") if refined else Decomposition.identity(sp, "I3"),
        _channels(model, 4, "F"),
    )
    return HistoryFamily(model.initial, model.steps, slots, name="FC-refined" if refined else "FC")


def _michelson_slot(model: CircuitModel, t: int, local: int) -> Decomposition:
    """Channel decomposition at local time ``local`` (1..N+1) inside a cycle."""
    return _channels(model, t, "AD" if local == 1 else "ABC")


def _final_SH(model: CircuitModel, t: int) -> Decomposition:
    sh = channel_projector(model.space, "S", polarization=H)
    return Decomposition.complete([sh], [f"S{t}*H{t}"])


def family_Y(model: CircuitModel, refined: bool = False) -> HistoryFamily:
    """One outer cycle, initial S0*H0, final S*H.

    Coarse: identity at t1..t_{N+1}, final {S*H, S*V, ~S}.  Refined:
    {A, D} at t1 and {A, B, C} at t2..t_{N+1}; the final slot becomes
    {S*H, rest} with the rest branch left coarse.
    """
    _require(model, "michelson-cycle")
    sp = model.space
    n = model.n_steps
    if refined:
        middle = tuple(_michelson_slot(model, t, t) for t in range(1, n))
        final = _final_SH(model, n)
    else:
        middle = tuple(Decomposition.identity(sp, f"I{t}") for t in range(1, n))
        s = channel_projector(sp, "S")
        final = Decomposition(
            (channel_projector(sp, "S", polarization=H), channel_projector(sp, "S", polarization=V),
             complement(s)),
            (f"S{n}*H{n}", f"S{n}*V{n}", f"~S{n}"),
        )
    return HistoryFamily(model.initial, model.steps, middle + (final,),
                         name="Y-refined" if refined else "Y")


def family_two_cycle(model: CircuitModel, refine_cycle: int) -> HistoryFamily:
    """Whole-protocol family with channel events inside one chosen outer cycle."""
    _require(model, "michelson-two-cycle")
    if not 1 <= refine_cycle <= model.cycles:
        raise FamilyError(f"refine_cycle must be in 1..{model.cycles}")
    per = model.steps_per_cycle
    n = model.n_steps
    slots = []
    for t in range(1, n):
        cycle, local = divmod(t, per)
        if cycle + 1 == refine_cycle and 1 <= local <= per - 1:
            slots.append(_michelson_slot(model, t, local))
        else:
            slots.append(Decomposition.identity(model.space, f"I{t}"))
    slots.append(_final_SH(model, n))
    return HistoryFamily(model.initial, model.steps, tuple(slots), name=f"two-cycle-{refine_cycle}")


# ------------------------------------------------------- named questions


@dataclass(frozen=True)
class Query:
    """A named event on a family, optionally conditioned on a final projector."""

    name: str
    predicate: Callable[[History], bool]
    condition: int | None = 0


def _labels_pred(family: HistoryFamily, test: Callable[[tuple[str, ...]], bool]):
    return lambda h: test(family.labels(h))


def _channel_at_some_slot(family: HistoryFamily, channel: str, slots: range):
    def test(labels):
        return any(labels[k][:1] == channel and labels[k][1:].isdigit() for k in slots)

    return _labels_pred(family, test)


def queries(family: HistoryFamily) -> list[Query]:
    """Questions asked of each named family; conditions refer to final index 0."""
    n = len(family.slots)
    name = family.name
    if name == "FpA":
        return [
            Query("path A (A1,A2,A3) | F4",
                  _labels_pred(family, lambda lab: lab[:3] == ("A1", "A2", "A3"))),
            Query("D1 | F4", _labels_pred(family, lambda lab: lab[0] == "D1")),
        ]
    if name.startswith("FC"):
        return [Query("C2 | F4", _labels_pred(family, lambda lab: lab[1] == "C2"))]
    if name == "Y-refined":
        return [
            Query("C at some time | S*H", _channel_at_some_slot(family, "C", range(n - 1))),
            Query("A at every time | S*H",
                  _labels_pred(family, lambda lab: all(x.startswith("A") for x in lab[:-1]))),
        ]
    if name.startswith("two-cycle"):
        return [Query(f"C during cycle {name[-1]} | S*H",
                      _channel_at_some_slot(family, "C", range(n - 1)))]
    return []


def build_family(model: CircuitModel, name: str) -> HistoryFamily:
    builders = {
        "FpA": lambda m: family_FpA(m),
        "FC": lambda m: family_FC(m, refined=False),
        "FC-refined": lambda m: family_FC(m, refined=True),
        "Y": lambda m: family_Y(m, refined=False),
        "Y-refined": lambda m: family_Y(m, refined=True),
        "two-cycle-1": lambda m: family_two_cycle(m, 1),
        "two-cycle-2": lambda m: family_two_cycle(m, 2),
    }
    if name not in builders:
        raise FamilyError(f"unknown family {name!r}")
    return builders[name](model)


FAMILY_NAMES = ("FpA", "FC", "FC-refined", "Y", "Y-refined", "two-cycle-1", "two-cycle-2")

FAMILY_MODELS = {
    "FpA": "griffiths-mzi",
    "FC": "griffiths-mzi",
    "FC-refined": "griffiths-mzi",
    "Y": "michelson-cycle",
    "Y-refined": "michelson-cycle",
    "two-cycle-1": "michelson-two-cycle",
    "two-cycle-2": "michelson-two-cycle",
}


def survival_probability(model: CircuitModel) -> float:
    """|amplitude on (S, H)|^2 at the end of the model."""
    return abs(evolve(model)[-1].amplitude("S", H)) ** 2

