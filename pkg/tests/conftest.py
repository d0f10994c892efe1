from math import pi

import numpy as np
import pytest

from cfhist.histories import Decomposition, HistoryFamily
from cfhist.protocols import (
    MichelsonConfig,
    MziConfig,
    build_griffiths_mzi,
    build_michelson_cycle,
    build_michelson_multi,
)
from cfhist.statespace import Projector

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def mzi():
    return build_griffiths_mzi(MziConfig.protocol(2, 2))


@pytest.fixture
def michelson():
    return build_michelson_cycle(MichelsonConfig(2, 2))


@pytest.fixture
def michelson_two():
    return build_michelson_multi(MichelsonConfig(2, 2))


def random_partition(space, rng, max_parts=3):
    """Random decomposition of the basis into 1..max_parts nonempty blocks."""
    basis = list(space.basis)
    k = int(rng.integers(1, max_parts + 1))
    owner = rng.integers(0, k, size=len(basis))
    blocks = [frozenset(b for b, o in zip(basis, owner) if o == j) for j in range(k)]
    blocks = [b for b in blocks if b]
    projs = tuple(Projector(space, b) for b in blocks)
    return Decomposition(projs, tuple(f"g{j}" for j in range(len(projs))))


def random_family(rng, coarse_branches=True):
    """Well-formed random family on one of the two models."""
    if rng.random() < 0.5:
        r = float(rng.uniform(0.05, 0.95))
        model = build_griffiths_mzi(MziConfig(np.arccos(np.sqrt(r)), pi / 4))
    else:
        model = build_michelson_cycle(MichelsonConfig(int(rng.integers(2, 4)), int(rng.integers(2, 4))))
    slots = [random_partition(model.space, rng) for _ in model.steps[:-1]]
    final = random_partition(model.space, rng)
    coarse = frozenset(j for j in range(len(final)) if coarse_branches and rng.random() < 0.3)
    if len(coarse) == len(final):
        coarse = frozenset()
    family = HistoryFamily(model.initial, model.steps, (*slots, final), coarse_finals=coarse)
    return model, family


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
