import math

import numpy as np
import pytest

from cccharts.errors import FlowError
from cccharts.fields import Box, VectorField
from cccharts.flows import (FlowOptions, check_condition_C, exp_multi, flow, flow_trajectory, probe_delta0,
                            probe_eta, sphere_directions)
from cccharts.systems import get_system


def test_quadratic_flow_closed_form(quadratic_line):
    S = quadratic_line.system
    x = flow(S.fields[0], [1.0, 0.0], 0.5, FlowOptions(domain=S.domain))
    assert x[0] == pytest.approx(2.0, abs=1e-6)
    assert x[1] == 0.0


def test_quadratic_flow_near_blow_up_is_large_but_finite(quadratic_line):
    x = flow(quadratic_line.system.fields[0], [1.0, 0.0], 0.999)
    assert math.isfinite(x[0])
    assert x[0] > 100.0


def test_quadratic_flow_past_blow_up_fails(quadratic_line):
    S = quadratic_line.system
    with pytest.raises(FlowError) as info:
        flow(S.fields[0], [1.0, 0.0], 1.1, FlowOptions(domain=S.domain))
    assert info.value.reason in ("exit", "blowup")
    assert info.value.time <= 1.0


def test_flow_rejects_start_outside_domain(quadratic_line):
    S = quadratic_line.system
    with pytest.raises(ValueError):
        flow(S.fields[0], [500.0, 0.0], 0.1, FlowOptions(domain=S.domain))


def test_linear_flow_is_exponential():
    X = VectorField.from_strings(["x1"], 1)
    assert flow(X, [1.0], 1.0)[0] == pytest.approx(math.e, rel=1e-9)


def test_flow_reverses(heisenberg):
    S = heisenberg.system
    opts = FlowOptions(domain=S.domain)
    x0 = np.array([0.3, -0.2, 0.1])
    back = flow(S.fields[1], flow(S.fields[1], x0, 0.7, opts), -0.7, opts)
    np.testing.assert_allclose(back, x0, atol=1e-7)


def test_trajectory_starts_at_x0_and_ends_at_flow(quadratic_line):
    S = quadratic_line.system
    opts = FlowOptions(domain=S.domain)
    times, states = flow_trajectory(S.fields[0], [1.0, 0.0], 0.5, opts)
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(0.5)
    np.testing.assert_allclose(states[0], [1.0, 0.0])
    np.testing.assert_allclose(states[-1], flow(S.fields[0], [1.0, 0.0], 0.5, opts))


def test_trajectory_truncates_at_failure(quadratic_line):
    S = quadratic_line.system
    times, states = flow_trajectory(S.fields[0], [1.0, 0.0], 1.1, FlowOptions(domain=S.domain))
    assert times[-1] < 1.0
    assert S.domain.contains(states).all()


def test_exp_multi_heisenberg_from_origin(heisenberg):
    x = exp_multi(heisenberg.system, [0.4, -0.3, 0.0], np.zeros(3))
    np.testing.assert_allclose(x, [0.4, -0.3, 0.0], atol=1e-12)


def test_exp_multi_checks_coefficients(heisenberg):
    with pytest.raises(ValueError):
        exp_multi(heisenberg.system, [1.0, 0.0], np.zeros(3))


def test_sphere_directions_are_unit():
    dirs = sphere_directions(3, 20)
    assert dirs.shape == (26, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_condition_C_threshold(quadratic_line):
    S = quadratic_line.system.restrict((1,))
    assert check_condition_C(S, [1.0, 0.0], 0.9).holds
    report = check_condition_C(S, [1.0, 0.0], 1.1)
    assert not report.holds
    assert report.witnesses


def test_condition_C_euclidean(euclidean2):
    assert check_condition_C(euclidean2.system, np.zeros(2), 1.0).holds


def test_probe_eta_finds_blow_up_time(quadratic_line):
    S = quadratic_line.system.restrict((1,))
    probe = probe_eta(S, [1.0, 0.0], 2.0)
    assert 0.9 <= probe.eta <= 1.01
    assert probe.failed_eta is not None


def test_rotation_return_radius():
    G = get_system("rotation")
    report = probe_delta0(G.system, Box.around([1.0, 0.0], 0.1), np.linspace(0.05, 1.0, 20))
    assert 0.31 <= report.delta0 <= 0.66
    assert report.violation is not None


def test_straight_lines_never_return(euclidean2):
    report = probe_delta0(euclidean2.system, Box.around([0.0, 0.0], 0.2), [0.25, 0.5, 1.0])
    assert report.delta0 == 1.0
    assert report.violation is None


def test_flow_options_validation():
    with pytest.raises(ValueError):
        FlowOptions(steps_per_unit=0)
