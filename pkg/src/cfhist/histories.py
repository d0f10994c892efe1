"""Consistent-histories engine.

A :class:`HistoryFamily` is an initial ket, one unitary per time step and one
projective decomposition per time ``t1..tn``.  A history picks one projector
per slot; its chain ket is ``P_n U_n ... P_1 U_1 |psi0>``.  The family is
consistent when all chain kets are mutually orthogonal, and then the squared
norm of a chain ket is the probability of that history.

Two bookkeeping conventions matter when reading results:

* Slots given as partial lists are completed with the complement of their
  union.  Projectors added this way are *flagged*; reports may hide histories
  that use them, but they always take part in consistency checks.
* Branches of the final slot listed in ``coarse_finals`` are not split by the
  intermediate slots: each contributes a single history with identity at
  every intermediate time.  By default this applies to the auto-added final
  complement, i.e. a family written ``... (.) F4`` refines only the ``F4``
  branch.  Chain kets with different final projectors are orthogonal anyway,
  so this changes nothing for the refined branch.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .statespace import (
    UNITARY_TOL,
    ZERO_TOL,
    Projector,
    StateSpace,
    StateSpaceError,
    StateVector,
    UnitaryMap,
    apply_unitary,
    complement,
    identity_projector,
    orthogonal,
    project,
    unitarity_defect,
)

COARSE = "."


class FamilyError(StateSpaceError):
    """Malformed decomposition, history or refinement."""


class InconsistentFamily(Exception):
    """Probabilities were requested from a family whose chain kets overlap."""

    def __init__(self, report: ConsistencyReport):
        self.report = report
        super().__init__(
            f"family is inconsistent (max |<K_a,K_b>| = {report.max_offdiag:.3e} "
            f">= {report.tolerance:g}); probabilities are meaningless"
        )


@dataclass(frozen=True)
class Decomposition:
    """Projectors for one time slot, ideally orthogonal and summing to identity."""

    projectors: tuple[Projector, ...]
    labels: tuple[str, ...]
    auto: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if not self.projectors:
            raise FamilyError("empty decomposition")
        if len(self.labels) != len(self.projectors):
            raise FamilyError("one label per projector required")
        space = self.projectors[0].space
        for p in self.projectors:
            space.require_same(p.space)

    @classmethod
    def complete(
        cls,
        projectors: Sequence[Projector],
        labels: Sequence[str],
        rest_label: str | None = None,
        flag_rest: bool = True,
    ) -> Decomposition:
        """Add the complement of the union when the projectors leave a gap.

        The complement is flagged unless ``flag_rest`` is false, which is how a
        complement that is itself part of a named family (``Q1``) is entered.
        """
        projectors = tuple(projectors)
        labels = tuple(labels)
        if not projectors:
            raise FamilyError("empty decomposition")
        for a, b in itertools.combinations(range(len(projectors)), 2):
            if not orthogonal(projectors[a], projectors[b]):
                raise FamilyError(f"projectors {labels[a]} and {labels[b]} overlap")
        union = projectors[0]
        for p in projectors[1:]:
            union = union | p
        rest = complement(union)
        if rest.is_zero:
            return cls(projectors, labels)
        label = rest_label if rest_label is not None else "~" + "+".join(labels)
        auto = frozenset({len(projectors)}) if flag_rest else frozenset()
        return cls(projectors + (rest,), labels + (label,), auto)

    @classmethod
    def identity(cls, space: StateSpace, label: str = "I") -> Decomposition:
        return cls((identity_projector(space),), (label,))

    @property
    def space(self) -> StateSpace:
        return self.projectors[0].space

    def __len__(self) -> int:
        return len(self.projectors)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise FamilyError(f"no projector labelled {label!r} in {self.labels}") from None

    def violations(self) -> list[str]:
        out = []
        for a, b in itertools.combinations(range(len(self)), 2):
            if not orthogonal(self.projectors[a], self.projectors[b]):
                out.append(f"projectors {self.labels[a]} and {self.labels[b]} overlap")
        covered = frozenset().union(*(p.support for p in self.projectors))
        missing = len(self.space.basis) - len(covered)
        if missing:
            out.append(f"projectors {'+'.join(self.labels)} miss {missing} basis vector(s)")
        return out


@dataclass(frozen=True)
class History:
    """One projector index per slot; ``None`` marks identity in a coarse branch."""

    choices: tuple[int | None, ...]

    @property
    def final(self) -> int:
        return self.choices[-1]


@dataclass(frozen=True, eq=False)
class HistoryFamily:
    initial: StateVector
    steps: tuple[UnitaryMap, ...]
    slots: tuple[Decomposition, ...]
    coarse_finals: frozenset[int] | None = None
    name: str = ""
    time_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "slots", tuple(self.slots))
        if not self.steps:
            raise FamilyError("a family needs at least one time step")
        if len(self.steps) != len(self.slots):
            raise FamilyError(
                f"{len(self.steps)} steps but {len(self.slots)} decompositions"
            )
        if self.coarse_finals is None:
            object.__setattr__(self, "coarse_finals", self.slots[-1].auto)
        bad = [f for f in self.coarse_finals if not 0 <= f < len(self.slots[-1])]
        if bad:
            raise FamilyError(f"coarse final indices out of range: {bad}")
        if not self.time_labels:
            object.__setattr__(
                self, "time_labels", tuple(f"t{k}" for k in range(len(self.steps) + 1))
            )

    @property
    def space(self) -> StateSpace:
        return self.initial.space

    @cached_property
    def fine_finals(self) -> tuple[int, ...]:
        return tuple(f for f in range(len(self.slots[-1])) if f not in self.coarse_finals)

    @cached_property
    def histories(self) -> tuple[History, ...]:
        middle = [range(len(d)) for d in self.slots[:-1]]
        fine = [History(c) for c in itertools.product(*middle, self.fine_finals)]
        n = len(self.slots) - 1
        coarse = [History((None,) * n + (f,)) for f in sorted(self.coarse_finals)]
        return tuple(fine + coarse)

    def check_history(self, history: History) -> None:
        if len(history.choices) != len(self.slots):
            raise FamilyError("history length does not match the family")
        if history.final in self.coarse_finals:
            if any(c is not None for c in history.choices[:-1]):
                raise FamilyError("coarse final branch takes identity at every slot")
        for c, d in zip(history.choices, self.slots):
            if c is not None and not 0 <= c < len(d):
                raise FamilyError(f"projector index {c} out of range")
            if c is None and history.final not in self.coarse_finals:
                raise FamilyError("identity choice only allowed in coarse branches")

    def labels(self, history: History) -> tuple[str, ...]:
        return tuple(
            COARSE if c is None else d.labels[c] for c, d in zip(history.choices, self.slots)
        )

    def history_by_labels(self, *labels: str) -> History:
        """Look up a history by its projector labels, one per slot."""
        if len(labels) != len(self.slots):
            raise FamilyError(f"need {len(self.slots)} labels, got {len(labels)}")
        choices = tuple(
            None if lab == COARSE else d.index(lab) for lab, d in zip(labels, self.slots)
        )
        h = History(choices)
        self.check_history(h)
        return h

    def is_flagged(self, history: History) -> bool:
        """True when the history uses an auto-added projector."""
        return any(
            c is not None and c in d.auto for c, d in zip(history.choices, self.slots)
        )


def chain_ket(family: HistoryFamily, history: History) -> StateVector:
    """``P_n U_n ... P_1 U_1 |initial>`` for one history."""
    return chain_ket_stages(family, history)[-1]


def chain_ket_stages(family: HistoryFamily, history: History) -> list[StateVector]:
    """Partial chain kets after each slot's projector (identity for coarse slots)."""
    family.check_history(history)
    state = family.initial
    out = []
    for u, d, c in zip(family.steps, family.slots, history.choices):
        state = apply_unitary(u, state)
        if c is not None:
            state = project(d.projectors[c], state)
        out.append(state)
    return out


def chain_kets(family: HistoryFamily) -> np.ndarray:
    """All chain kets as rows, in the order of ``family.histories``.

    Walks the history tree breadth-first so shared prefixes are evolved once.
    """
    rows = family.initial.amplitudes[None, :]
    last = len(family.slots) - 1
    for k, (u, d) in enumerate(zip(family.steps, family.slots)):
        rows = rows @ u.matrix.T
        picks = family.fine_finals if k == last else range(len(d))
        masks = np.array([d.projectors[j].mask for j in picks]).reshape(len(picks), -1)
        rows = (rows[:, None, :] * masks[None, :, :]).reshape(-1, rows.shape[1])
    coarse = []
    if family.coarse_finals:
        full = family.initial.amplitudes
        for u in family.steps:
            full = u.matrix @ full
        final = family.slots[-1]
        coarse = [np.where(final.projectors[f].mask, full, 0) for f in sorted(family.coarse_finals)]
    if coarse:
        rows = np.vstack([rows, np.array(coarse)])
    return rows


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    """Gram matrix of chain kets and the consistency verdict.

    ``gram`` is restricted to ``support``, the histories whose chain ket is not
    identically zero; every other Gram entry is exactly zero.
    """

    histories: tuple[History, ...]
    gram: np.ndarray
    support: tuple[int, ...]
    norms: np.ndarray
    max_offdiag: float
    tolerance: float
    argmax: tuple[int, int] | None = None
    kets: np.ndarray = field(default=None, repr=False)

    @property
    def consistent(self) -> bool:
        return self.max_offdiag < self.tolerance

    def full_gram(self) -> np.ndarray:
        n = len(self.histories)
        g = np.zeros((n, n), dtype=complex)
        idx = np.array(self.support, dtype=int)
        g[np.ix_(idx, idx)] = self.gram
        return g

    def entry(self, a: int, b: int) -> complex:
        return complex(np.vdot(self.kets[a], self.kets[b]))


def gram_matrix(family: HistoryFamily, tol: float = ZERO_TOL) -> ConsistencyReport:
    kets = chain_kets(family)
    norms = np.linalg.norm(kets, axis=1)
    support = np.flatnonzero(np.any(kets != 0, axis=1))
    ks = kets[support]
    gram = ks.conj() @ ks.T
    off = np.abs(gram - np.diag(np.diag(gram)))
    if off.size:
        flat = int(np.argmax(off))
        i, j = divmod(flat, off.shape[1])
        max_off = float(off[i, j])
        argmax = (int(support[i]), int(support[j])) if max_off > 0 else None
    else:
        max_off, argmax = 0.0, None
    return ConsistencyReport(
        histories=family.histories,
        gram=gram,
        support=tuple(int(s) for s in support),
        norms=norms,
        max_offdiag=max_off,
        tolerance=tol,
        argmax=argmax,
        kets=kets,
    )


def _consistent_report(
    family: HistoryFamily, tol: float, report: ConsistencyReport | None
) -> ConsistencyReport:
    report = report if report is not None else gram_matrix(family, tol)
    if not report.consistent:
        raise InconsistentFamily(report)
    return report


def history_probability(
    family: HistoryFamily,
    history: History,
    tol: float = ZERO_TOL,
    report: ConsistencyReport | None = None,
) -> float:
    """Extended Born rule: squared norm of the history's chain ket."""
    family.check_history(history)
    _consistent_report(family, tol, report)
    return chain_ket(family, history).norm() ** 2


def probability(
    family: HistoryFamily,
    predicate: Callable[[History], bool],
    condition: int | None = None,
    tol: float = ZERO_TOL,
    report: ConsistencyReport | None = None,
) -> float:
    """Total weight of histories satisfying ``predicate``.

    With ``condition`` (an index into the final slot) the result is the
    conditional probability given that final event.
    """
    report = _consistent_report(family, tol, report)
    weights = report.norms**2
    hist = report.histories
    if condition is None:
        return float(sum(w for h, w in zip(hist, weights) if predicate(h)))
    mass = float(sum(w for h, w in zip(hist, weights) if h.final == condition))
    if mass < ZERO_TOL:
        raise ValueError("conditioning event has zero probability")
    hit = float(sum(w for h, w in zip(hist, weights) if h.final == condition and predicate(h)))
    return hit / mass


def event_probability(
    family: HistoryFamily,
    slot: int,
    projector_indices: Iterable[int],
    condition: int | None = None,
    tol: float = ZERO_TOL,
    report: ConsistencyReport | None = None,
) -> float:
    """Probability that the projector chosen at ``slot`` is one of ``projector_indices``.

    In a coarse branch the slot holds identity, which counts as a hit only
    when the indices cover the whole slot.
    """
    wanted = frozenset(projector_indices)
    whole = wanted >= frozenset(range(len(family.slots[slot])))

    def hit(h: History) -> bool:
        c = h.choices[slot]
        return whole if c is None else c in wanted

    return probability(family, hit, condition, tol, report)


def _parents(old: Decomposition, new: Decomposition) -> list[int]:
    parents = []
    for p, lab in zip(new.projectors, new.labels):
        owners = [i for i, q in enumerate(old.projectors) if p <= q]
        if not owners:
            raise FamilyError(f"projector {lab} does not lie inside any projector of the slot")
        parents.append(owners[0])
    return parents


def refinement_parents(old: Decomposition, new: Decomposition) -> list[int]:
    """Index of the coarse projector containing each refined projector."""
    return _parents(old, new)


def refine_slot(
    family: HistoryFamily,
    slot: int,
    projectors: Sequence[Projector] | Decomposition,
    labels: Sequence[str] | None = None,
) -> HistoryFamily:
    """Split the projectors of one slot.

    Each new projector must lie inside one projector of the slot.  Whatever a
    coarse projector leaves uncovered becomes an extra projector; it is
    flagged when its parent was flagged or when it is a fresh remainder.
    """
    if not 0 <= slot < len(family.slots):
        raise FamilyError(f"slot {slot} out of range")
    old = family.slots[slot]
    if isinstance(projectors, Decomposition):
        given = projectors
    else:
        projectors = tuple(projectors)
        if labels is None:
            raise FamilyError("labels required when refining with bare projectors")
        given = Decomposition(projectors, tuple(labels))
    for a, b in itertools.combinations(range(len(given)), 2):
        if not orthogonal(given.projectors[a], given.projectors[b]):
            raise FamilyError(f"projectors {given.labels[a]} and {given.labels[b]} overlap")
    parents = _parents(old, given)

    projs = list(given.projectors)
    labs = list(given.labels)
    auto = set(given.auto)
    owner = list(parents)
    for i, q in enumerate(old.projectors):
        children = [given.projectors[j] for j, par in enumerate(parents) if par == i]
        covered = frozenset().union(*(c.support for c in children))
        rest = q.support - covered
        if not rest:
            continue
        if children:
            kids = [given.labels[j] for j, par in enumerate(parents) if par == i]
            label = ("~" + "+".join(kids)) if q.is_identity else f"{old.labels[i]}-({'+'.join(kids)})"
        else:
            label = old.labels[i]
        if children or i in old.auto:
            auto.add(len(projs))
        projs.append(Projector(q.space, rest))
        labs.append(label)
        owner.append(i)
    new = Decomposition(tuple(projs), tuple(labs), frozenset(auto))

    coarse = family.coarse_finals
    if slot == len(family.slots) - 1:
        coarse = frozenset(j for j, i in enumerate(owner) if i in family.coarse_finals)
    slots = family.slots[:slot] + (new,) + family.slots[slot + 1 :]
    return replace(family, slots=slots, coarse_finals=coarse)


def validate_family(family: HistoryFamily) -> list[str]:
    """Diagnostics for a family; an empty list means well-formed."""
    out = []
    for k, u in enumerate(family.steps):
        if u.space != family.space:
            out.append(f"step {k + 1} acts on a different state space")
            continue
        defect = unitarity_defect(u.matrix)
        if defect >= UNITARY_TOL:
            out.append(f"step {k + 1} ({u.label or 'unlabelled'}) is not unitary: defect {defect:.3e}")
    for k, d in enumerate(family.slots):
        if d.space != family.space:
            out.append(f"slot {k + 1} uses a different state space")
            continue
        out.extend(f"slot {k + 1}: {v}" for v in d.violations())
    return out
