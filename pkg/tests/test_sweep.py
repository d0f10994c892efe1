import numpy as np
import pytest

from cfhist.protocols import ConfigError, MziConfig, build_family, build_griffiths_mzi
from cfhist.sweep import _local_minima, sweep_consistency


def _mzi(r):
    return build_griffiths_mzi(MziConfig.from_reflectivity(r))


def _sweep(family, **kw):
    return sweep_consistency(_mzi, lambda m: build_family(m, family), **kw)


def test_fc_single_crossing_at_one_third():
    res = _sweep("FC")
    assert len(res.crossings) == 1
    assert res.crossings[0].reflectivity == pytest.approx(1 / 3, abs=1e-9)
    assert res.crossings[0].max_offdiag < 1e-10


def test_grid_points_and_flags():
    res = _sweep("FC", steps=11)
    assert [p.reflectivity for p in res.points] == pytest.approx(list(np.linspace(0.05, 0.95, 11)))
    assert not res.everywhere_consistent
    assert all(p.consistent == (p.max_offdiag < res.tolerance) for p in res.points)


def test_refined_fc_has_no_crossing():
    res = _sweep("FC-refined")
    assert res.crossings == ()
    assert res.min_offdiag > 1e-3


def test_everywhere_consistent_family_reports_no_crossings():
    res = _sweep("FpA", steps=21)
    assert res.everywhere_consistent
    assert res.crossings == ()


def test_crossing_off_grid_is_found_on_coarse_grid():
    res = _sweep("FC", r_range=(0.1, 0.9), steps=6)
    assert [c.reflectivity for c in res.crossings] == pytest.approx([1 / 3], abs=1e-9)


def test_sweep_is_deterministic():
    a, b = _sweep("FC", steps=31), _sweep("FC", steps=31)
    assert a == b


@pytest.mark.parametrize("kw", [{"steps": 1}, {"r_range": (0.5, 0.2)}, {"r_range": (0.0, 0.5)},
                                {"r_range": (0.2, 1.0)}])
def test_bad_sweep_parameters(kw):
    with pytest.raises(ConfigError):
        _sweep("FC", **kw)


def test_local_minima_include_edges():
    assert _local_minima(np.array([0.0, 1.0, 0.5, 2.0, 1.0])) == [0, 2, 4]
