import numpy as np
import pytest

from gliderdec.domain import AdcpObservationSet, DiveRecord, InvalidRecordError, build_unchecked, validate_dive
from gliderdec.inversion import invert
from gliderdec.simulator import (
    InfeasibleScenarioError,
    ScenarioSpec,
    coverage_histogram,
    generate,
    plan_geometry,
)


def modal(counts):
    values, freq = np.unique(counts[counts > 0], return_counts=True)
    return int(values[np.argmax(freq)])


def test_default_dive_is_valid(default_dive):
    assert validate_dive(default_dive.dive) == []
    assert default_dive.dive.duration == pytest.approx(3600.0)


@pytest.mark.parametrize("cast", ["D", "A"])
def test_coverage_per_cast(default_dive, cast):
    counts = coverage_histogram(default_dive, dz=2.0, cast=cast)
    assert 5 <= modal(counts) <= 9


def _with_adcp(dive, keep):
    a = dive.adcp
    adcp = build_unchecked(AdcpObservationSet, u_rel=a.u_rel[keep], v_rel=a.v_rel[keep], t=a.t[keep], z=a.z[keep],
                           ping_index=a.ping_index[keep], cast_label=a.cast_label[keep])
    return build_unchecked(
        DiveRecord, adcp=adcp, ttw=dive.ttw, depth=dive.depth, gps_start=dive.gps_start, gps_end=dive.gps_end)


def test_no_samples_gives_zero_coverage(default_dive):
    # a blanking distance beyond the dive depth clips every bin at the surface
    with pytest.raises(InvalidRecordError):
        generate(ScenarioSpec(blanking_distance=1e4))
    empty = _with_adcp(default_dive.dive, np.zeros(len(default_dive.dive.adcp), dtype=bool))
    counts = coverage_histogram(empty, dz=2.0)
    assert counts.sum() == 0 and len(counts) > 0


def test_single_ping_sums_to_bins(default_dive):
    a = default_dive.dive.adcp
    deep = a.ping_index[np.argmax(a.z)]
    one = _with_adcp(default_dive.dive, a.ping_index == deep)
    assert coverage_histogram(one, dz=2.0).sum() == default_dive.spec.bins_per_ping
    # near the surface the ping is clipped
    shallow = a.ping_index[0]
    clipped = _with_adcp(default_dive.dive, a.ping_index == shallow)
    assert coverage_histogram(clipped, dz=2.0).sum() == np.sum(a.ping_index == shallow) < 6


def test_downward_facing_bins_sit_below_glider():
    sim = generate(ScenarioSpec(facing="down"))
    a = sim.dive.adcp
    z_glider = sim.dive.depth.at(a.t)
    assert np.all(a.z > z_glider)


def test_zero_current_observations(zero_current_dive):
    sim = zero_current_dive
    a = sim.dive.adcp
    ttw = sim.dive.ttw.at(a.t)
    np.testing.assert_allclose(a.u_rel, -ttw[:, 0], atol=1e-15)
    np.testing.assert_allclose(a.v_rel, -ttw[:, 1], atol=1e-15)
    t = sim.dive.ttw.t
    u = sim.dive.ttw.u_ttw
    np.testing.assert_allclose(sim.dive.displacement[1], np.trapezoid(sim.dive.ttw.v_ttw, t), rtol=1e-12)
    np.testing.assert_allclose(sim.dive.displacement[0], np.trapezoid(u, t), atol=1e-9)
    np.testing.assert_allclose(sim.drift_displacement, 0.0, atol=1e-15)


def test_deterministic_by_seed():
    spec = ScenarioSpec(noise_adcp=0.03, noise_ttw=0.05, seed=3)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.dive.adcp.u_rel, b.dive.adcp.u_rel)
    np.testing.assert_array_equal(a.dive.ttw.v_ttw, b.dive.ttw.v_ttw)
    c = generate(ScenarioSpec(noise_adcp=0.03, noise_ttw=0.05, seed=4))
    assert not np.array_equal(a.dive.adcp.u_rel, c.dive.adcp.u_rel)


def test_infeasible_scenario():
    with pytest.raises(InfeasibleScenarioError):
        generate(ScenarioSpec(dive_duration=600.0, max_depth=200.0))


def test_geometry_rounds_to_pings():
    g = plan_geometry(ScenarioSpec())
    assert g.t_descent % 15.0 == 0 and g.t_ascent % 15.0 == 0
    assert g.t_descent + g.hold + g.t_ascent == g.total


def test_noise_doubling_doubles_profile_rmse():
    rmse = {}
    for sigma in (0.01, 0.02):
        errs = []
        for seed in range(50):
            sim = generate(ScenarioSpec(noise_adcp=sigma, seed=seed))
            p = invert(sim.dive).profile
            truth = sim.truth_profile_on(p.z_hat)
            cov = p.coverage > 0
            errs.append(np.concatenate([(p.u - truth.u)[cov], (p.v - truth.v)[cov]]))
        rmse[sigma] = np.sqrt(np.mean(np.concatenate(errs) ** 2))
    assert rmse[0.02] / rmse[0.01] == pytest.approx(2.0, rel=0.3)


def test_truth_profile_matches_field(default_dive):
    p = default_dive.truth_profile
    np.testing.assert_allclose(p.u, np.interp(p.z_hat, [0, 200], [0.15, -0.05]), atol=1e-15)


def test_time_varying_truth_is_two_profile():
    sim = generate(ScenarioSpec(current_u_ascent=(0.0, 0.0), current_v_ascent=(0.0, 0.0)))
    assert sim.truth_profile.form == "two_profile"
    assert sim.truth_profile.u_descent[0] == pytest.approx(0.15)


def test_from_mapping_rejects_unknown():
    with pytest.raises(KeyError):
        ScenarioSpec.from_mapping({"max_depht": 100.0})
    assert ScenarioSpec.from_mapping({"max_depth": 100.0}).max_depth == 100.0


@pytest.mark.parametrize("bad", [dict(max_depth=-1.0), dict(noise_adcp=-0.1), dict(facing="sideways"),
                                 dict(current_u_ascent=(0.0, 0.0))])
def test_bad_scenarios(bad):
    with pytest.raises(ValueError):
        ScenarioSpec(**bad)
