import math

import numpy as np
import pytest

from cccharts.ccmetric import (CCGraph, CCParams, ball_bounding_box, ball_membership, ball_volume, cc_distance,
                               containment_check, doubling_estimate, graded_instance, sample_ball_points)


def test_euclidean_distance(euclidean2):
    est = cc_distance(euclidean2.system, [0.0, 0.0], [0.3, 0.4])
    assert not est.unreachable
    assert 0.49 <= est.value <= 0.52


def test_distance_to_self_is_zero(heisenberg):
    assert cc_distance(heisenberg.system, [0.1, 0.2, 0.3], [0.1, 0.2, 0.3]).value == 0.0


def test_distance_rejects_points_outside_domain(euclidean2):
    with pytest.raises(ValueError):
        cc_distance(euclidean2.system, [0.0, 0.0], [10.0, 0.0])


def test_ball_membership(euclidean2):
    S = euclidean2.system
    assert ball_membership(S, [0.0, 0.0], 0.5, [0.3, 0.0])
    assert not ball_membership(S, [0.0, 0.0], 0.2, [0.3, 0.0])


def test_membership_floor_follows_tested_radius(euclidean2):
    S = euclidean2.system
    coarse = CCParams(floor=0.9)
    assert cc_distance(S, [0.0, 0.0], [0.3, 0.0], coarse).value > 0.25
    assert not ball_membership(S, [0.0, 0.0], 0.1, [0.3, 0.0], coarse)
    assert ball_membership(S, [0.0, 0.0], 0.5, [0.3, 0.0], coarse)


def test_bounding_box_of_euclidean_ball(euclidean2):
    bb = ball_bounding_box(euclidean2.system, [0.0, 0.0], 0.5)
    np.testing.assert_allclose(bb.half_widths, [0.525, 0.525])


def test_graph_distances_are_euclidean(euclidean2):
    graph = CCGraph(euclidean2.system, [0.0, 0.0], 1.0)
    pts = np.array([[0.5, 0.0], [0.0, -0.3], [0.2, 0.2]])
    np.testing.assert_allclose(graph.distances(pts), np.linalg.norm(pts, axis=1), atol=1e-2)


def test_graded_instance(heisenberg):
    scaled, radius = graded_instance(heisenberg.system, 0.5, heisenberg.degrees)
    assert radius == 1.0
    np.testing.assert_allclose(np.diag(scaled.matrix(np.zeros(3))), [0.5, 0.5, 0.25])
    with pytest.raises(ValueError):
        graded_instance(heisenberg.system, 0.5, (1.0, 1.0))


def test_ball_volume_arguments(euclidean2):
    with pytest.raises(ValueError):
        ball_volume(euclidean2.system, [0.0, 0.0], 1.0, 0)
    with pytest.raises(ValueError):
        ball_volume(euclidean2.system, [0.0, 0.0], -1.0, 100)


@pytest.mark.slow
def test_euclidean_ball_volume_is_pi(euclidean2):
    est = ball_volume(euclidean2.system, [0.0, 0.0], 1.0, 20000, seed=0)
    assert abs(est.volume - math.pi) <= 3 * est.stderr + 0.01
    assert est.unreachable == 0


def test_ball_volume_is_deterministic_across_threads(euclidean2):
    S = euclidean2.system
    one = ball_volume(S, [0.0, 0.0], 1.0, 3000, seed=5, params=CCParams(chunk=500, threads=1))
    many = ball_volume(S, [0.0, 0.0], 1.0, 3000, seed=5, params=CCParams(chunk=500, threads=4))
    again = ball_volume(S, [0.0, 0.0], 1.0, 3000, seed=5, params=CCParams(chunk=500, threads=1))
    assert one.volume == many.volume == again.volume
    assert one.hits == many.hits


@pytest.mark.slow
def test_euclidean_doubling(euclidean2):
    est = doubling_estimate(euclidean2.system, [0.0, 0.0], 0.25, 4000, seed=0)
    assert est.ratio == pytest.approx(4.0, rel=0.1)


@pytest.mark.slow
@pytest.mark.parametrize("delta", [0.1, 0.2, 0.4])
def test_heisenberg_doubling(heisenberg, delta):
    est = doubling_estimate(heisenberg.system, [0.0, 0.0, 0.0], delta, 4000, seed=0,
                            degrees=heisenberg.degrees)
    assert 8.0 <= est.ratio <= 32.0


def test_sampled_points_are_members(euclidean2, rng):
    pts = sample_ball_points(euclidean2.system, [0.0, 0.0], 0.5, 200, rng)
    assert pts.shape[1] == 2
    assert np.all(np.linalg.norm(pts, axis=1) < 0.5)


@pytest.mark.slow
def test_euclidean_containment(euclidean2):
    report = containment_check(euclidean2.system, [0.0, 0.0], [0.25, 0.5, 1.0], samples=60, seed=0)
    assert report.holds
    assert report.pairs > 0
    assert report.empirical_constant <= 3.0
