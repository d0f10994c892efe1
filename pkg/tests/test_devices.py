from math import cos, pi, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfhist.devices import (
    BeamSplitter,
    DeviceError,
    Mirror,
    PolarizationRotator,
    PolarizingBeamSplitter,
    Route,
    StepSpec,
    beam_splitter_unitary,
    build_step,
    pbs_unitary,
    polarization_rotator_unitary,
    route_unitary,
)
from cfhist.protocols import MichelsonConfig, build_michelson_cycle
from cfhist.statespace import H, V, StateSpace, StateSpaceError, apply_unitary, basis_state, unitarity_defect

SPACE = StateSpace(("S", "A", "B", "C", "D", "L1"))
EYE = np.eye(SPACE.dim)


def test_beam_splitter_zero_angle_is_identity():
    assert np.allclose(beam_splitter_unitary(SPACE, 0.0, "A", "D").matrix, EYE)


def test_beam_splitter_half_half():
    out = apply_unitary(beam_splitter_unitary(SPACE, pi / 4, "A", "D"), basis_state(SPACE, "A", H))
    # cos^2(pi/4) = sin^2(pi/4) = 1/2
    assert abs(out.amplitude("A", H)) ** 2 == pytest.approx(0.5, abs=1e-15)
    assert abs(out.amplitude("D", H)) ** 2 == pytest.approx(0.5, abs=1e-15)


def test_two_half_splitters_swap_ports():
    bs = beam_splitter_unitary(SPACE, pi / 4, "A", "D")
    out = apply_unitary(bs, apply_unitary(bs, basis_state(SPACE, "A", V)))
    assert abs(out.amplitude("D", V)) == pytest.approx(1.0, abs=1e-15)


def test_beam_splitter_errors():
    with pytest.raises(DeviceError):
        beam_splitter_unitary(SPACE, 0.3, "A", "A")
    with pytest.raises(StateSpaceError):
        beam_splitter_unitary(SPACE, 0.3, "A", "Q")
    with pytest.raises(DeviceError):
        BeamSplitter(2.0, ("A", "B"))


@given(st.floats(-2 * pi, 2 * pi))
def test_beam_splitter_inverse(theta):
    a = beam_splitter_unitary(SPACE, theta, "B", "C").matrix
    b = beam_splitter_unitary(SPACE, -theta, "B", "C").matrix
    assert np.max(np.abs(a @ b - EYE)) < 1e-12
    # swapped ports realize the same inverse
    swapped = beam_splitter_unitary(SPACE, theta, "C", "B").matrix
    assert np.max(np.abs(swapped - b)) < 1e-15


def test_rotator_zero_is_identity():
    assert np.allclose(polarization_rotator_unitary(SPACE, 0.0, {"D"}).matrix, EYE)


def test_rotator_quarter_turn_on_V():
    out = apply_unitary(polarization_rotator_unitary(SPACE, pi / 4, {"D"}), basis_state(SPACE, "D", V))
    assert abs(out.amplitude("D", H)) == pytest.approx(1 / sqrt(2), abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_rotator_n_steps_turns_V_into_H(n):
    r = polarization_rotator_unitary(SPACE, pi / (2 * n), {"D"})
    s = basis_state(SPACE, "D", V)
    for _ in range(n):
        s = apply_unitary(r, s)
    assert abs(s.amplitude("D", H)) == pytest.approx(1.0, abs=1e-12)


def test_rotator_needs_polarization():
    with pytest.raises(DeviceError):
        polarization_rotator_unitary(StateSpace.unpolarized("AB"), 0.1, {"A"})


def test_pbs_empty_is_identity():
    assert np.array_equal(pbs_unitary(SPACE, {}).matrix, EYE)


def test_pbs_routes_by_polarization():
    u = pbs_unitary(SPACE, {("S", H): "A", ("S", V): "D"})
    out = apply_unitary(u, basis_state(SPACE, "S", V))
    assert out.amplitude("D", V) == 1
    out = apply_unitary(u, basis_state(SPACE, "S", H))
    assert out.amplitude("A", H) == 1


def test_pbs_then_inverse_is_identity():
    u = pbs_unitary(SPACE, {("S", H): "A", ("S", V): "D"})
    assert np.array_equal(u.matrix.T @ u.matrix, EYE)
    assert np.array_equal(u.dagger.matrix @ u.matrix, EYE)


def test_pbs_is_plus_one_permutation():
    u = pbs_unitary(SPACE, {("B", V): "D", ("C", H): "D", ("A", H): "S"}).matrix
    assert set(np.unique(u)) <= {0, 1}
    assert np.all(u.sum(axis=0) == 1) and np.all(u.sum(axis=1) == 1)


def test_non_injective_routing_rejected():
    with pytest.raises(DeviceError):
        pbs_unitary(SPACE, {("S", H): "A", ("B", H): "A"})
    with pytest.raises(DeviceError):
        route_unitary(SPACE, {"S": "A", "B": "A"})


def test_route_keeps_shift_register_order():
    u = route_unitary(SPACE, {"D": "L1"})
    out = apply_unitary(u, basis_state(SPACE, "D", H))
    assert out.amplitude("L1", H) == 1


def test_disjoint_devices_commute():
    a = beam_splitter_unitary(SPACE, 0.4, "A", "B").matrix
    b = polarization_rotator_unitary(SPACE, 0.9, {"D"}).matrix
    assert np.allclose(a @ b, b @ a, atol=1e-15)


def test_build_step_empty_is_identity():
    assert np.array_equal(build_step(StepSpec([], "T"), SPACE).matrix, EYE)


def test_build_step_michelson_first_step():
    spec = StepSpec(
        [PolarizationRotator(pi / 4, frozenset({"S"})),
         PolarizingBeamSplitter({("S", H): "A", ("S", V): "D"})],
        "T_{1,0}",
    )
    out = apply_unitary(build_step(spec, SPACE), basis_state(SPACE, "S", H))
    assert abs(out.amplitude("A", H)) == pytest.approx(1 / sqrt(2), abs=1e-15)
    assert abs(out.amplitude("D", V)) == pytest.approx(1 / sqrt(2), abs=1e-15)
    assert out.norm() == pytest.approx(1, abs=1e-15)


def test_build_step_with_mirror_and_route_is_unitary():
    spec = StepSpec([Mirror(frozenset({"A"})), Route({"B": "C"}), BeamSplitter(0.3, ("A", "D"))])
    assert unitarity_defect(build_step(spec, SPACE).matrix) < 1e-12


def test_composed_michelson_cycle_survival_oracle():
    # oracle: multiply the four step matrices by hand
    model = build_michelson_cycle(MichelsonConfig(2, 2))
    total = np.eye(model.space.dim)
    for u in model.steps:
        total = u.matrix @ total
    col = total[:, model.space.index(("S", H))]
    assert abs(col[model.space.index(("S", H))]) ** 2 == pytest.approx(cos(pi / 4) ** 2, abs=1e-12)
