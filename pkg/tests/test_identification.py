import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcsdrone.core import Mode, VehicleParams, mode_params
from lcsdrone.dynamics import EventKind, drop_test_scenario, flight_collision_scenario, simulate, wall
from lcsdrone.identification import (
    ContactMetrics,
    IdentificationError,
    ObservedTrajectory,
    ParamBounds,
    contact_metrics,
    fit_contact_params,
    observed_from_trajectory,
    resample,
    validate_params,
)


@pytest.fixture(scope="module")
def drops():
    out = {}
    for mode in Mode:
        sc = drop_test_scenario(0.2, mode, duration=0.6)
        out[mode] = (sc, simulate(sc))
    return out


def _obs(n=20, **kw):
    t = np.linspace(0, 1, n)
    base = dict(t=t, x=np.zeros(n), xdot=np.zeros(n))
    base.update(kw)
    return ObservedTrajectory(**base)


class TestObservedTrajectory:
    def test_too_short(self):
        with pytest.raises(IdentificationError, match="10 samples"):
            _obs(n=5)

    def test_non_monotone_time(self):
        t = np.linspace(0, 1, 20)
        t[5] = t[4]
        with pytest.raises(IdentificationError, match="increasing"):
            _obs(t=t)

    def test_length_mismatch(self):
        with pytest.raises(IdentificationError, match="xdot"):
            _obs(xdot=np.zeros(19))

    def test_nan_rejected(self):
        x = np.zeros(20)
        x[3] = np.nan
        with pytest.raises(IdentificationError, match="non-finite"):
            _obs(x=x)

    def test_lateral_flag(self):
        assert not _obs().has_lateral
        assert _obs(y=np.zeros(20), ydot=np.zeros(20)).has_lateral

    def test_channels_lists_present_only(self):
        assert set(_obs(force=np.zeros(20)).channels()) == {"x", "xdot", "force"}


class TestMetrics:
    def test_no_contact(self):
        traj = simulate(drop_test_scenario(0.5, Mode.RIGID, duration=0.05))
        with pytest.raises(IdentificationError, match="no contact"):
            contact_metrics(traj)
        obs = observed_from_trajectory(traj)
        with pytest.raises(IdentificationError, match="no contact"):
            contact_metrics(obs)

    def test_wrong_type(self):
        with pytest.raises(TypeError):
            contact_metrics(np.zeros(3))

    @pytest.mark.parametrize("mode", list(Mode))
    def test_contact_time_matches_events(self, drops, mode):
        _, traj = drops[mode]
        start = traj.events_of(EventKind.CONTACT_START)[0].t
        end = traj.events_of(EventKind.CONTACT_END)[0].t
        m = contact_metrics(traj)
        assert m.contact_time == pytest.approx(end - start, abs=1.5e-4)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_peak_acceleration_is_force_over_mass(self, drops, mode):
        m = contact_metrics(drops[mode][1])
        assert m.peak_acceleration * VehicleParams().mass == pytest.approx(m.peak_normal_force)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_rebound_positive_and_below_impact(self, drops, mode):
        m = contact_metrics(drops[mode][1])
        impact = math.sqrt(2 * 9.81 * 0.2)
        assert 0 < m.rebound_velocity < impact

    @pytest.mark.parametrize("mode", list(Mode))
    def test_observed_force_channel_agrees(self, drops, mode):
        traj = drops[mode][1]
        obs = observed_from_trajectory(traj, force=True)
        a, b = contact_metrics(traj), contact_metrics(obs)
        assert b.contact_time == pytest.approx(a.contact_time, abs=2e-4)
        assert b.peak_normal_force == pytest.approx(a.peak_normal_force)
        assert b.rebound_velocity == pytest.approx(a.rebound_velocity, rel=1e-6)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_gap_crossings_bracket_force_episode(self, drops, mode):
        # the damper lets go before the gap reopens, so the geometric
        # interval is the longer of the two
        traj = drops[mode][1]
        obs = observed_from_trajectory(traj, stride=10)
        a, b = contact_metrics(traj), contact_metrics(obs)
        assert a.contact_time < b.contact_time < 1.3 * a.contact_time
        assert math.isnan(b.peak_normal_force)

    def test_flexible_contact_longer_and_softer(self, drops):
        r, f = contact_metrics(drops[Mode.RIGID][1]), contact_metrics(drops[Mode.FLEXIBLE][1])
        assert f.contact_time > r.contact_time
        assert f.peak_normal_force < r.peak_normal_force
        assert f.rebound_velocity < r.rebound_velocity


class TestResample:
    def test_identity_on_own_grid(self, drops):
        traj = drops[Mode.RIGID][1]
        out = resample(traj, traj.t, force=True)
        np.testing.assert_allclose(out["x"], traj.in_frame(0)[:, 0])
        np.testing.assert_allclose(out["force"], traj.contact_force[:, 0])

    def test_lateral_channels(self, drops):
        out = resample(drops[Mode.RIGID][1], np.linspace(0, 0.5, 11), lateral=True)
        assert set(out) == {"x", "xdot", "y", "ydot", "z", "zdot"}


class TestBounds:
    @pytest.mark.parametrize("kw", [dict(k=(5, 5)), dict(f=(3, 1)), dict(mu=(0, math.inf))])
    def test_degenerate(self, kw):
        with pytest.raises(IdentificationError, match="degenerate"):
            ParamBounds(**kw)

    @pytest.mark.parametrize("kw", [dict(k=(0, 10)), dict(f=(-1, 10))])
    def test_inadmissible_lower(self, kw):
        with pytest.raises(IdentificationError, match="not admissible"):
            ParamBounds(**kw)

    def test_contains(self):
        b = ParamBounds()
        assert b.contains(mode_params(Mode.RIGID))
        assert not b.contains(mode_params(Mode.RIGID).replace(k=2e4))


class TestFit:
    @pytest.mark.parametrize("mode", list(Mode))
    def test_noiseless_round_trip(self, drops, mode):
        sc, traj = drops[mode]
        fr = fit_contact_params(observed_from_trajectory(traj, stride=10), sc)
        true = mode_params(mode)
        assert fr.params.k == pytest.approx(true.k, rel=0.02)
        assert fr.params.f == pytest.approx(true.f, rel=0.05)
        assert fr.converged
        assert fr.fitted == ("k", "f")
        assert ParamBounds().contains(fr.params)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_noisy_round_trip(self, drops, mode):
        sc, traj = drops[mode]
        obs = observed_from_trajectory(traj, stride=10, velocity_noise=0.01, seed=3)
        fr = fit_contact_params(obs, sc)
        assert fr.params.k == pytest.approx(mode_params(mode).k, rel=0.05)

    def test_history_non_increasing(self, drops):
        sc, traj = drops[Mode.RIGID]
        fr = fit_contact_params(observed_from_trajectory(traj, stride=10, velocity_noise=0.01), sc)
        h = np.array(fr.history)
        assert np.all(np.diff(h) <= 0)
        assert fr.objective <= h[0] + 1e-12

    def test_deterministic(self, drops):
        sc, traj = drops[Mode.FLEXIBLE]
        obs = observed_from_trajectory(traj, stride=10, velocity_noise=0.01)
        a, b = fit_contact_params(obs, sc), fit_contact_params(obs, sc)
        assert a.params == b.params and a.objective == b.objective

    def test_respects_narrow_bounds(self, drops):
        sc, traj = drops[Mode.RIGID]
        bounds = ParamBounds(k=(1000, 2000))
        fr = fit_contact_params(observed_from_trajectory(traj, stride=10), sc, bounds=bounds)
        assert fr.params.k == pytest.approx(2000, rel=1e-3)

    def test_non_overlapping_window(self, drops):
        sc, traj = drops[Mode.RIGID]
        obs = observed_from_trajectory(traj, stride=10)
        shifted = ObservedTrajectory(t=obs.t + 10.0, x=obs.x, xdot=obs.xdot)
        with pytest.raises(IdentificationError, match="scenario covers"):
            fit_contact_params(shifted, sc)

    def test_lateral_fit_recovers_friction(self):
        w = wall((1.65, 0, 0), (-1, 0, 0), "acrylic")
        sc = flight_collision_scenario((w,), (0.65, 0, 1), (-1.0, 0.5), (Mode.RIGID,), duration=1.2)
        obs = observed_from_trajectory(simulate(sc), stride=10, lateral=True)
        fr = fit_contact_params(obs, sc)
        true = w.contact_params(Mode.RIGID)
        assert fr.fitted == ("k", "f", "mu", "nu")
        for name in fr.fitted:
            assert getattr(fr.params, name) == pytest.approx(getattr(true, name), rel=0.02, abs=1e-3)


class TestValidate:
    @pytest.mark.parametrize("mode", list(Mode))
    def test_self_validation_is_exact(self, drops, mode):
        sc, traj = drops[mode]
        rep = validate_params(mode_params(mode), observed_from_trajectory(traj, stride=10), sc)
        for name in ("x", "xdot"):
            assert rep.channels[name].rmse == pytest.approx(0, abs=1e-12)
        for name in ("contact_time", "rebound_velocity"):
            assert rep.accuracy(name) == pytest.approx(1.0)

    @pytest.mark.parametrize("mode", list(Mode))
    def test_wrong_stiffness_degrades_monotonically(self, drops, mode):
        sc, traj = drops[mode]
        held = observed_from_trajectory(traj, stride=10)
        base = mode_params(mode)
        reps = [validate_params(base.replace(k=base.k * s), held, sc) for s in (1.0, 1.5, 2.0, 3.0)]
        for name in ("contact_time", "rebound_velocity"):
            acc = [r.accuracy(name) for r in reps]
            assert all(a > b for a, b in zip(acc, acc[1:]))
        rmse = [r.channels["xdot"].rmse for r in reps]
        assert all(a < b for a, b in zip(rmse, rmse[1:]))

    def test_z_channels_flagged(self):
        w = wall((1.65, 0, 0), (-1, 0, 0), "acrylic")
        sc = flight_collision_scenario((w,), (0.65, 0, 1), (-1.0, 0.5), (Mode.RIGID,), duration=1.2)
        obs = observed_from_trajectory(simulate(sc), stride=10, lateral=True)
        rep = validate_params(w.contact_params(Mode.RIGID), obs, sc)
        assert rep.channels["z"].flagged and rep.channels["zdot"].flagged
        assert not rep.channels["y"].flagged

    def test_metrics_types(self, drops):
        sc, traj = drops[Mode.RIGID]
        rep = validate_params(mode_params(Mode.RIGID), observed_from_trajectory(traj, stride=10), sc)
        assert isinstance(rep.observed_metrics, ContactMetrics)
        assert rep.source == "simulated"


@given(noise=st.floats(0.0, 0.05), seed=st.integers(0, 2**16))
def test_noise_does_not_touch_positions(noise, seed):
    traj = _SHORT
    a = observed_from_trajectory(traj, stride=50)
    b = observed_from_trajectory(traj, stride=50, velocity_noise=noise, seed=seed)
    np.testing.assert_array_equal(a.x, b.x)
    if noise == 0:
        np.testing.assert_array_equal(a.xdot, b.xdot)


_SHORT = simulate(drop_test_scenario(0.05, Mode.RIGID, duration=0.3))
