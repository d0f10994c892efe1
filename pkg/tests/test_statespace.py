import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfhist.statespace import (
    H,
    V,
    NonUnitaryError,
    Projector,
    StateSpace,
    StateSpaceError,
    UnitaryMap,
    apply_unitary,
    basis_state,
    channel_projector,
    complement,
    identity_projector,
    inner_product,
    make_state,
    orthogonal,
    project,
    zero_projector,
)

SPACE = StateSpace(("S", "A", "B", "C", "D"))


def test_registry_rejects_duplicate_channels():
    with pytest.raises(StateSpaceError):
        StateSpace(("S", "A", "S"))


def test_make_state_single_basis_vector():
    s = make_state(SPACE, {("S", H): 1})
    assert s.norm() == 1.0


def test_make_state_empty_is_zero():
    assert make_state(SPACE, {}).norm() == 0.0


def test_make_state_superposition_norm():
    a = 1 / np.sqrt(2)
    s = make_state(SPACE, [(("A", H), a), (("D", V), a)])
    # sqrt of sum of squared magnitudes
    assert s.norm() == pytest.approx(np.sqrt(a**2 + a**2), abs=1e-15)
    assert s.amplitude("D", V) == pytest.approx(a)


def test_make_state_errors():
    with pytest.raises(StateSpaceError, match="duplicate"):
        make_state(SPACE, [(("S", H), 1), (("S", H), 0.5)])
    with pytest.raises(StateSpaceError, match="unknown"):
        make_state(SPACE, {("Z", H): 1})


def test_inner_product_basics():
    s = basis_state(SPACE, "S", H)
    a = basis_state(SPACE, "A", H)
    assert inner_product(s, a) == 0
    assert inner_product(s, s) == 1


def test_inner_product_registry_mismatch():
    other = StateSpace(("S", "A"))
    with pytest.raises(StateSpaceError):
        inner_product(basis_state(SPACE, "S", H), basis_state(other, "S", H))


def test_inner_product_is_conjugate_linear_in_first_argument():
    a = make_state(SPACE, {("S", H): 1j})
    b = make_state(SPACE, {("S", H): 1})
    assert inner_product(a, b) == -1j


def test_project_inside_and_disjoint():
    s = basis_state(SPACE, "S", H)
    sh = channel_projector(SPACE, "S", polarization=H)
    assert project(sh, s).isclose(s)
    a = basis_state(SPACE, "A", H)
    assert project(channel_projector(SPACE, "C"), a).norm() == 0


def test_complement_examples():
    assert complement(identity_projector(SPACE)).is_zero
    s = channel_projector(SPACE, "S")
    comp = complement(s)
    assert comp.support == frozenset(bv for bv in SPACE.basis if bv.channel != "S")
    assert complement(comp) == s


def test_projector_sum_requires_orthogonality():
    b, c = channel_projector(SPACE, "B"), channel_projector(SPACE, "C")
    assert (b + c).support == b.support | c.support
    with pytest.raises(StateSpaceError):
        b + (b | c)


def test_unitary_map_rejects_non_unitary():
    m = np.eye(SPACE.dim)
    m[0, 0] = 2
    with pytest.raises(NonUnitaryError):
        UnitaryMap(SPACE, m)


def test_identity_unitary_leaves_state():
    s = make_state(SPACE, {("A", H): 0.6, ("B", V): 0.8j})
    assert apply_unitary(UnitaryMap.identity(SPACE), s).isclose(s, 1e-15)


def test_apply_unitary_dimension_mismatch():
    other = StateSpace(("S",))
    with pytest.raises(StateSpaceError):
        apply_unitary(UnitaryMap.identity(other), basis_state(SPACE, "S", H))


def test_unpolarized_space_uses_sentinel():
    sp = StateSpace.unpolarized("SAB")
    assert sp.dim == 3
    assert basis_state(sp, "A").norm() == 1
    with pytest.raises(StateSpaceError):
        StateSpace(("S",)).basis_vector("S")


# ------------------------------------------------------------ properties

amplitude = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)
states = st.lists(amplitude, min_size=SPACE.dim, max_size=SPACE.dim).map(
    lambda xs: make_state(SPACE, zip(SPACE.basis, xs))
)
projectors = st.sets(st.sampled_from(SPACE.basis)).map(lambda s: Projector(SPACE, frozenset(s)))


@given(projectors, states)
def test_projection_is_idempotent_and_contracts(p, s):
    once = project(p, s)
    assert project(p, once).isclose(once, 1e-15)
    assert once.norm() <= s.norm() + 1e-12


@given(projectors, states)
def test_pythagorean_split(p, s):
    n2 = s.norm() ** 2
    assert n2 == pytest.approx(
        project(p, s).norm() ** 2 + project(complement(p), s).norm() ** 2, abs=1e-10
    )


@given(projectors)
def test_complement_disjoint_and_involutive(p):
    c = complement(p)
    assert orthogonal(p, c)
    assert (p | c).is_identity
    assert complement(c) == p


@given(projectors, projectors)
def test_orthogonal_iff_disjoint(p, q):
    assert orthogonal(p, q) == p.support.isdisjoint(q.support)


@given(states, states)
def test_inner_product_conjugate_symmetry(a, b):
    assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)), abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), states)
def test_random_unitary_preserves_norm(seed, s):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(SPACE.dim, SPACE.dim)) + 1j * rng.normal(size=(SPACE.dim, SPACE.dim))
    q, r = np.linalg.qr(z)
    u = UnitaryMap(SPACE, q * (np.diag(r) / np.abs(np.diag(r))))
    assert apply_unitary(u, s).norm() == pytest.approx(s.norm(), abs=1e-12)


def test_zero_projector_kills_everything():
    s = make_state(SPACE, {("S", H): 1, ("C", V): 1})
    assert project(zero_projector(SPACE), s).norm() == 0
