import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simplex_reach import reachability as rc
from simplex_reach.errors import InvalidInputError
from simplex_reach.generator import (
    build_B0,
    build_lindblad_pair,
    build_tensor_B0,
    thermal_generator,
    zero_temperature_generator,
)
from simplex_reach.majorisation import classical_majorises

FIG_D = np.array([9.0, 3.0, 1.0]) / 13
FIG_X0 = np.array([0.9, 0.07, 0.03])


def test_control_sequence_validation():
    with pytest.raises(InvalidInputError):
        rc.ControlSequence((((0, 0, 1), 1.0),))
    with pytest.raises(InvalidInputError):
        rc.ControlSequence((((0, 1), -1.0),))
    with pytest.raises(InvalidInputError):
        rc.ControlSequence((((0, 1), math.inf),))
    c = rc.ControlSequence.random(3, 10, np.random.default_rng(0), rate_scale=4.0)
    assert len(c) == 10
    assert all(1e-2 / 4 <= tau <= 1e2 / 4 for _, tau in c.steps)
    assert json.loads(json.dumps(c.to_json()))[0]["perm"] == list(c.steps[0][0])


def test_simulate_records_every_stage():
    G = thermal_generator(FIG_D)
    c = rc.ControlSequence((((1, 0, 2), 0.5), ((0, 1, 2), 0.0), ((2, 1, 0), 1.0)))
    traj = rc.simulate(FIG_X0, G, c, samples_per_dwell=3)
    assert len(traj.states) == 1 + 3 * (1 + 3)
    assert np.allclose(traj.states[1], FIG_X0[[1, 0, 2]])
    assert traj.times[-1] == pytest.approx(1.5)
    assert np.all(np.diff(traj.times) >= 0)
    for x in traj.states:
        assert x.min() >= 0 and abs(x.sum() - 1) < 1e-12
    with pytest.raises(InvalidInputError):
        rc.simulate(FIG_X0, G, rc.ControlSequence((((0, 1), 1.0),)))


def test_vector_field_vanishes_at_fixed_point():
    G = thermal_generator(FIG_D)
    assert np.abs(rc.vector_field(G, FIG_D)).max() < 1e-15
    assert rc.vector_field(G, FIG_X0).sum() == pytest.approx(0, abs=1e-15)


def test_align_to_chamber_and_geometric():
    assert np.allclose(rc.align_to_chamber([0.1, 0.7, 0.2], [0.2, 0.5, 0.3]), [0.1, 0.7, 0.2])
    assert np.allclose(rc.align_to_chamber([0.7, 0.1, 0.2], [0.2, 0.5, 0.3]), [0.1, 0.7, 0.2])
    assert rc.is_geometric(FIG_D)
    assert not rc.is_geometric([0.5, 0.3, 0.2])
    assert not rc.is_geometric([1.0, 0.0, 0.0])


def test_dissipative_monotonicity():
    rep = rc.check_dissipative_monotonicity(FIG_D, FIG_X0, np.linspace(0, 5, 26))
    assert rep.passed and rep.max_margin <= 1e-12


def test_thm4_trivial_starts():
    G = thermal_generator(FIG_D)
    rng = np.random.default_rng(5)
    for start in (FIG_D, np.full(3, 1 / 3)):
        c = rc.ControlSequence.random(3, 20, rng, G.rate_scale)
        for x in rc.simulate(start, G, c, 2).states:
            assert classical_majorises(FIG_D, x, 1e-10)


def test_thm4_flags_non_geometric_instances_in_instance_record():
    rep = rc.check_thm4(np.array([0.5, 0.3, 0.2]), samples=10, budget=5)
    assert rep.instance["assumption_a"] is False


def test_thm5_6_special_cases():
    rep = rc.check_thm5_6(FIG_D, FIG_D, samples=10, budget=10)
    assert np.allclose(rep.details["z"], FIG_D) and rep.passed
    u = np.full(3, 1 / 3)
    rep = rc.check_thm5_6(u, [0.2, 0.7, 0.1], samples=10, budget=10)
    assert np.allclose(rep.details["z"], [0.7, 0.2, 0.1]) and rep.passed
    with pytest.raises(InvalidInputError):
        rc.check_thm5_6(FIG_D, FIG_X0, samples=1, membership="nope")


def test_permutation_symmetry_of_verdict():
    a = rc.check_thm5_6(FIG_D, FIG_X0, samples=20, budget=15, seed=3)
    b = rc.check_thm5_6(FIG_D, FIG_X0[[2, 0, 1]], samples=20, budget=15, seed=3)
    assert np.allclose(a.details["z"], b.details["z"])
    assert a.passed == b.passed


def test_hull_lp_route_agrees_with_partial_sums():
    rep = rc.check_thm5_6(FIG_D, FIG_X0, samples=20, budget=15, seed=1,
                          membership="both", coverage_resolution=20)
    assert rep.name == "thm5_6" and rep.passed
    assert 0 < rep.details["hull_coverage"] <= 1


def test_inward_check_uniform_and_figure():
    u = np.full(3, 1 / 3)
    G = build_B0(build_lindblad_pair(3, np.pi / 4))
    assert np.allclose(G.fixed_point, u)
    assert rc.inward_check(G, [0.6, 0.3, 0.1]).passed
    G = thermal_generator(FIG_D)
    rep = rc.inward_check(G, [0.9, 0.07 + 0.02 / 3, 0.03 - 0.02 / 3])
    assert rep.passed and len(rep.details["vertices"]) == 6


def test_active_subsets_at_vertex():
    S = list(rc.active_subsets([0.5, 0.3, 0.2]))
    assert len(S) == 2  # one proper subset of each size


def test_greedy_absorbing_vertex_and_bounds():
    G = zero_temperature_generator(3)
    search = rc.GreedySearch(G)
    res = search.run(np.full(3, 1 / 3), [0.0, 0.0, 1.0], eps=0.02, budget=40)
    assert res.residual <= 0.02 and res.steps <= 40
    res = search.run([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], eps=0.02, budget=40)
    assert res.residual < 1e-12 and res.steps == 1  # a single permutation


def test_greedy_residual_monotone_in_budget():
    G = zero_temperature_generator(3)
    search = rc.GreedySearch(G)
    rng = np.random.default_rng(8)
    for g in rng.dirichlet(np.ones(3), size=6):
        res = [search.run(np.full(3, 1 / 3), g, eps=1e-4, budget=b).residual
               for b in (1, 2, 4, 8, 16, 32)]
        assert all(b <= a + 1e-12 for a, b in zip(res, res[1:]))


def test_simulate_reproduces_greedy_endpoint():
    G = zero_temperature_generator(3)
    search = rc.GreedySearch(G)
    x0 = np.full(3, 1 / 3)
    for g in ([0.5, 0.3, 0.2], [0.1, 0.8, 0.1], [0.5, 0.5, 0.0]):
        res = search.run(x0, g, eps=0.02)
        traj = rc.simulate(x0, G, res.controls)
        assert np.allclose(traj.final, res.endpoint, atol=1e-9)
        assert np.abs(traj.final - g).sum() <= 0.02


def test_simplex_grid():
    grid = rc.simplex_grid(3, 20)
    assert len(grid) == 231
    assert np.allclose(grid.sum(axis=1), 1)


def test_coverage_reports_failures_as_data():
    rep = rc.check_thm1_coverage(3, 0.25, 1e-6, budget=2)
    assert not rep.passed and rep.details["coverage"] < 1
    with pytest.raises(InvalidInputError):
        rc.check_thm1_coverage(3, 0.3, 0.02)


def test_tensor_coverage_small():
    rep = rc.check_thm1_coverage(2, 0.25, 0.03, 40, m=2)
    assert rep.name == "thm2" and rep.passed


def test_ordered_map_is_schedule_independent():
    items = list(range(20))
    assert rc._ordered_map(abs, items, 1) == rc._ordered_map(abs, items, 3)


def test_report_json_is_clean():
    rep = rc.Report("x", {"a": np.float64(1.5)}, 1, [], float("nan"), runtime_ms=3.0,
                    details={"v": np.array([1.0, np.inf]), "b": np.bool_(True)})
    out = rep.to_json_dict()
    assert out["max_margin"] is None and out["runtime_ms"] is None
    assert out["details"]["v"] == [1.0, None] and out["details"]["b"] is True
    assert rep.to_json_dict(include_timing=True)["runtime_ms"] == 3.0
    json.dumps(out, allow_nan=False)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_random_trajectories_stay_in_dominating_permutohedron(ratio, seed):
    d = ratio ** np.arange(3)
    d /= d.sum()
    x0 = np.random.default_rng(seed).dirichlet(np.ones(3))
    rep = rc.check_thm5_6(d, x0, samples=3, budget=10, seed=seed)
    assert rep.passed
