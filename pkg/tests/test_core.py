import math

import numpy as np
import pytest

from aimsim.core import (
    AgentAttributes,
    AgentKind,
    AgentState,
    InvalidInputError,
    Scene,
    ego_to_world,
    normalize_angle,
    oriented_box_corners,
    box_corners_array,
    rotation_matrix,
    world_to_ego,
)


def naive_normalize(phi: float) -> float:
    # independent oracle: repeated add/subtract of 2*pi
    while phi > math.pi:
        phi -= 2.0 * math.pi
    while phi <= -math.pi:
        phi += 2.0 * math.pi
    return phi


class TestNormalizeAngle:
    def test_zero(self):
        assert normalize_angle(0.0) == 0.0

    def test_odd_multiple_of_pi_maps_to_pi(self):
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == pytest.approx(math.pi)

    def test_matches_naive_loop_oracle(self):
        expected = naive_normalize(-7.5 * math.pi)
        assert normalize_angle(-7.5 * math.pi) == pytest.approx(expected, abs=1e-12)
        rng = np.random.default_rng(0)
        for phi in rng.uniform(-50, 50, size=200):
            got = normalize_angle(phi)
            assert got == pytest.approx(naive_normalize(phi), abs=1e-9)
            assert -math.pi < got <= math.pi

    def test_congruent_mod_two_pi(self):
        rng = np.random.default_rng(1)
        for phi in rng.uniform(-40, 40, size=100):
            diff = normalize_angle(phi) - phi
            assert diff / (2 * math.pi) == pytest.approx(round(diff / (2 * math.pi)), abs=1e-9)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInputError):
            normalize_angle(float("nan"))


class TestOrientedBoxCorners:
    def test_axis_aligned(self):
        corners = oriented_box_corners(AgentState(0, 0, 0, 0), AgentAttributes(4, 2))
        np.testing.assert_allclose(corners, [(2, 1), (-2, 1), (-2, -1), (2, -1)])

    def test_rotated_quarter_turn_matches_rotation_oracle(self):
        base = np.array([(2, 1), (-2, 1), (-2, -1), (2, -1)], dtype=float)
        expected = base @ rotation_matrix(math.pi / 2).T  # hand-applied rotation
        corners = oriented_box_corners(AgentState(0, 0, math.pi / 2, 0), AgentAttributes(4, 2))
        np.testing.assert_allclose(corners, expected, atol=1e-12)
        np.testing.assert_allclose(corners, [(-1, 2), (-1, -2), (1, -2), (1, 2)], atol=1e-12)

    def test_translation_equivariance(self):
        corners = oriented_box_corners(AgentState(5, 3, 0, 7), AgentAttributes(4, 2))
        np.testing.assert_allclose(
            corners, np.array([(2, 1), (-2, 1), (-2, -1), (2, -1)]) + [5, 3]
        )

    def test_rigid_equivariance_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            x, y, phi = rng.uniform(-10, 10, 2).tolist() + [rng.uniform(-math.pi, math.pi)]
            attrs = AgentAttributes(rng.uniform(0.5, 6), rng.uniform(0.5, 3))
            theta = rng.uniform(-math.pi, math.pi)
            t = rng.uniform(-20, 20, 2)
            base = oriented_box_corners(AgentState(x, y, phi, 0), attrs)
            moved = oriented_box_corners(
                AgentState(*(rotation_matrix(theta) @ [x, y] + t), phi + theta, 0), attrs
            )
            np.testing.assert_allclose(base @ rotation_matrix(theta).T + t, moved, atol=1e-9)

    def test_area_equals_length_times_width(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            attrs = AgentAttributes(rng.uniform(0.5, 8), rng.uniform(0.3, 3))
            c = oriented_box_corners(
                AgentState(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3), 0), attrs
            )
            x, y = c[:, 0], c[:, 1]
            area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
            assert area == pytest.approx(attrs.length * attrs.width, abs=1e-9)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(9)
        xs, ys = rng.uniform(-5, 5, 6), rng.uniform(-5, 5, 6)
        phis = rng.uniform(-3, 3, 6)
        ls, ws = rng.uniform(1, 5, 6), rng.uniform(0.5, 2, 6)
        batch = box_corners_array(xs, ys, phis, ls, ws)
        for i in range(6):
            single = oriented_box_corners(
                AgentState(xs[i], ys[i], phis[i], 0), AgentAttributes(ls[i], ws[i])
            )
            np.testing.assert_allclose(batch[i], single, atol=1e-12)

    def test_nonfinite_state_rejected(self):
        with pytest.raises(InvalidInputError):
            AgentState(float("inf"), 0, 0, 0)

    def test_bad_extents_rejected(self):
        with pytest.raises(InvalidInputError):
            AgentAttributes(0.0, 1.0)


class TestEgoFrame:
    def test_ego_position_maps_to_origin(self):
        ego = AgentState(3.0, -2.0, 0.7, 5.0)
        np.testing.assert_allclose(world_to_ego([3.0, -2.0], ego), [0, 0], atol=1e-12)

    def test_heading_maps_to_plus_y(self):
        # oracle: rotate by (pi/2 - phi) after translating; for ego at origin
        # facing +x, the point one meter ahead must land one meter "up"
        ego = AgentState(0, 0, 0, 0)
        np.testing.assert_allclose(world_to_ego([1.0, 0.0], ego), [0, 1], atol=1e-12)
        rng = np.random.default_rng(3)
        for _ in range(20):
            ego = AgentState(*rng.uniform(-10, 10, 2), rng.uniform(-3, 3), 0)
            ahead = [ego.x + 2 * math.cos(ego.phi), ego.y + 2 * math.sin(ego.phi)]
            expected = rotation_matrix(math.pi / 2 - ego.phi) @ (
                np.array(ahead) - [ego.x, ego.y]
            )
            np.testing.assert_allclose(world_to_ego(ahead, ego), [0, 2], atol=1e-9)
            np.testing.assert_allclose(world_to_ego(ahead, ego), expected, atol=1e-12)

    def test_round_trip_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            ego = AgentState(*rng.uniform(-50, 50, 2), rng.uniform(-math.pi, math.pi), 1.0)
            pts = rng.uniform(-100, 100, (7, 2))
            np.testing.assert_allclose(
                ego_to_world(world_to_ego(pts, ego), ego), pts, atol=1e-12
            )


class TestScene:
    def test_requires_an_agent(self):
        with pytest.raises(InvalidInputError):
            Scene(timestep=0, agents=())

    def test_holds_agents_in_order(self):
        pairs = tuple(
            (AgentState(i, 0, 0, 0), AgentAttributes(4, 2, AgentKind.VEHICLE))
            for i in range(3)
        )
        scene = Scene(timestep=5, agents=pairs)
        assert scene.num_agents == 3
        assert [a.x for a, _ in scene.agents] == [0, 1, 2]
