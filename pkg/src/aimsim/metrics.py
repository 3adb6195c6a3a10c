"""Evaluation metrics for multi-agent trajectory samples: displacement
errors (min over samples), sample diversity, off-road rate against a
drivable mesh, and IOU-based collision rate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import AgentAttributes, AgentKind, ContractError, InvalidInputError, box_corners_array

BOUNDARY_EPS = 1e-9  # meters; boundary contact counts as inside / as no overlap


@dataclass(frozen=True)
class TrajectorySamples:
    """K joint trajectory samples against ground truth.

    samples: (K, N, T, 4) states (x, y, phi, v); ground_truth: (N, T, 4);
    attrs: per-agent AgentAttributes, length N.
    """

    samples: np.ndarray
    ground_truth: np.ndarray
    attrs: tuple

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        gt = np.asarray(self.ground_truth, dtype=float)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "ground_truth", gt)
        object.__setattr__(self, "attrs", tuple(self.attrs))
        if samples.ndim != 4 or samples.shape[-1] != 4:
            raise ContractError(f"samples must be (K, N, T, 4), got {samples.shape}")
        if gt.shape != samples.shape[1:]:
            raise ContractError("ground_truth shape must match samples per-sample shape")
        if len(self.attrs) != samples.shape[1]:
            raise ContractError("attrs length must equal the agent count")
        if samples.shape[2] < 1:
            raise ContractError("need at least one timestep")

    @property
    def k(self) -> int:
        return self.samples.shape[0]

    @property
    def num_agents(self) -> int:
        return self.samples.shape[1]

    @property
    def horizon(self) -> int:
        return self.samples.shape[2]


@dataclass(frozen=True)
class DrivableMesh:
    """Union of world-frame triangles covering the drivable surface."""

    triangles: np.ndarray  # (M, 3, 2)

    def __post_init__(self):
        tris = np.asarray(self.triangles, dtype=float)
        object.__setattr__(self, "triangles", tris)
        if tris.ndim != 3 or tris.shape[1:] != (3, 2):
            raise InvalidInputError(f"triangles must be (M, 3, 2), got {tris.shape}")
        if tris.shape[0] == 0:
            raise InvalidInputError("drivable mesh is empty")
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        areas = 0.5 * np.abs(np.cross(b - a, c - a))
        if np.any(areas <= 0):
            raise InvalidInputError("drivable mesh contains degenerate triangles")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Inside-or-on-boundary test for (..., 2) points against the union."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        a, b, c = self.triangles[:, 0], self.triangles[:, 1], self.triangles[:, 2]
        orient = np.sign(np.cross(b - a, c - a))  # (M,)
        inside = np.ones((flat.shape[0], self.triangles.shape[0]), dtype=bool)
        for p0, p1 in ((a, b), (b, c), (c, a)):
            edge = p1 - p0  # (M, 2)
            elen = np.linalg.norm(edge, axis=1)
            rel = flat[:, None, :] - p0[None, :, :]  # (P, M, 2)
            cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
            # signed distance from the edge line, positive on the interior side
            inside &= orient[None, :] * cross / elen[None, :] >= -BOUNDARY_EPS
        return inside.any(axis=1).reshape(pts.shape[:-1])


def _positions(ts: TrajectorySamples):
    return ts.samples[..., :2], ts.ground_truth[..., :2]


def min_ade(ts: TrajectorySamples, joint_min: bool = False) -> float:
    """Minimum-over-samples average displacement error, averaged over agents.

    The minimum is taken per agent by default; joint_min=True instead picks
    the single joint sample with the lowest scene-average error.
    """
    pred, gt = _positions(ts)
    err = np.linalg.norm(pred - gt[None], axis=-1)  # (K, N, T)
    per_sample = err.mean(axis=2)  # (K, N)
    if joint_min:
        return float(per_sample.mean(axis=1).min())
    return float(per_sample.min(axis=0).mean())


def min_fde(ts: TrajectorySamples, joint_min: bool = False) -> float:
    """As min_ade, but only the final-timestep displacement."""
    pred, gt = _positions(ts)
    err = np.linalg.norm(pred[:, :, -1] - gt[None, :, -1], axis=-1)  # (K, N)
    if joint_min:
        return float(err.mean(axis=1).min())
    return float(err.min(axis=0).mean())


def mfd(ts: TrajectorySamples) -> float:
    """Maximum final distance between any two samples, averaged over agents.
    A diversity measure; zero when K == 1."""
    pred, _ = _positions(ts)
    if ts.k < 2:
        return 0.0
    finals = pred[:, :, -1]  # (K, N, 2)
    diffs = np.linalg.norm(finals[:, None] - finals[None, :], axis=-1)  # (K, K, N)
    return float(diffs.max(axis=(0, 1)).mean())


def offroad_rate(ts: TrajectorySamples, mesh: DrivableMesh) -> float:
    """Fraction of (sample, vehicle, timestep) cells where any bounding-box
    corner leaves the drivable mesh. Pedestrians are not scored; returns 0
    when the container has no vehicles."""
    vehicle_ix = [i for i, a in enumerate(ts.attrs) if a.kind == AgentKind.VEHICLE]
    if not vehicle_ix:
        return 0.0
    sub = ts.samples[:, vehicle_ix]  # (K, Nv, T, 4)
    lengths = np.array([ts.attrs[i].length for i in vehicle_ix])
    widths = np.array([ts.attrs[i].width for i in vehicle_ix])
    corners = box_corners_array(
        sub[..., 0], sub[..., 1], sub[..., 2],
        np.broadcast_to(lengths[None, :, None], sub.shape[:3]),
        np.broadcast_to(widths[None, :, None], sub.shape[:3]),
    )  # (K, Nv, T, 4, 2)
    inside = mesh.contains(corners)  # (K, Nv, T, 4)
    offroad = ~inside.all(axis=-1)
    return float(offroad.mean())


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon by a convex clip polygon."""
    area2 = float(np.cross(clip[1] - clip[0], clip[2] - clip[0]))
    orient = 1.0 if area2 >= 0 else -1.0
    output = [tuple(p) for p in subject]
    m = len(clip)
    for i in range(m):
        if not output:
            break
        p0, p1 = clip[i], clip[(i + 1) % m]
        edge = p1 - p0
        inp = output
        output = []
        prev = inp[-1]
        prev_d = orient * (edge[0] * (prev[1] - p0[1]) - edge[1] * (prev[0] - p0[0]))
        for cur in inp:
            cur_d = orient * (edge[0] * (cur[1] - p0[1]) - edge[1] * (cur[0] - p0[0]))
            if cur_d >= 0:
                if prev_d < 0:
                    t = prev_d / (prev_d - cur_d)
                    output.append(
                        (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
                    )
                output.append(cur)
            elif prev_d >= 0:
                t = prev_d / (prev_d - cur_d)
                output.append(
                    (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
                )
            prev, prev_d = cur, cur_d
    return np.array(output) if output else np.zeros((0, 2))


def oriented_iou(box_a: np.ndarray, box_b: np.ndarray) -> float:
    """Intersection over union of two convex quads given as (4, 2) corner
    arrays in winding order."""
    box_a = np.asarray(box_a, dtype=float)
    box_b = np.asarray(box_b, dtype=float)
    if box_a.shape != (4, 2) or box_b.shape != (4, 2):
        raise ContractError("boxes must be (4, 2) corner arrays")
    area_a, area_b = _polygon_area(box_a), _polygon_area(box_b)
    if area_a < 1e-12 or area_b < 1e-12:
        raise ContractError("degenerate zero-area box")
    inter_poly = _clip_polygon(box_a, box_b)
    inter = _polygon_area(inter_poly) if len(inter_poly) >= 3 else 0.0
    union = area_a + area_b - inter
    return inter / union


def collision_rate(ts: TrajectorySamples, iou_threshold: float = 0.0) -> float:
    """Fraction of (sample, agent, timestep) cells whose box overlaps any
    other agent's box in the same joint sample (IOU strictly above the
    threshold)."""
    if iou_threshold < 0:
        raise ContractError("iou_threshold must be nonnegative")
    K, N, T = ts.k, ts.num_agents, ts.horizon
    if N == 1:
        return 0.0
    lengths = np.array([a.length for a in ts.attrs])
    widths = np.array([a.width for a in ts.attrs])
    corners = box_corners_array(
        ts.samples[..., 0], ts.samples[..., 1], ts.samples[..., 2],
        np.broadcast_to(lengths[None, :, None], (K, N, T)),
        np.broadcast_to(widths[None, :, None], (K, N, T)),
    )  # (K, N, T, 4, 2)
    radii = 0.5 * np.hypot(lengths, widths)
    centers = ts.samples[..., :2]
    hit = np.zeros((K, N, T), dtype=bool)
    for k in range(K):
        for t in range(T):
            for i in range(N):
                for j in range(i + 1, N):
                    if hit[k, i, t] and hit[k, j, t]:
                        continue
                    gap = np.linalg.norm(centers[k, i, t] - centers[k, j, t])
                    if gap > radii[i] + radii[j]:
                        continue
                    if oriented_iou(corners[k, i, t], corners[k, j, t]) > iou_threshold:
                        hit[k, i, t] = True
                        hit[k, j, t] = True
    return float(hit.mean())


def stop_line_violation_rate(positions: np.ndarray, line_p1, line_p2,
                             travel_dir, red_mask) -> float:
    """Fraction of (sample, agent, red-timestep) cells where the agent center
    has crossed the stop line against a red light.

    positions: (K, N, T, 2); travel_dir: approach direction of the governed
    lane; red_mask: (T,) booleans. Assumes the lane crosses the line, so
    progress past the line midpoint along travel_dir means a crossing.
    """
    positions = np.asarray(positions, dtype=float)
    red_mask = np.asarray(red_mask, dtype=bool)
    if positions.ndim != 4 or positions.shape[-1] != 2:
        raise ContractError("positions must be (K, N, T, 2)")
    if red_mask.shape != (positions.shape[2],):
        raise ContractError("red_mask length must equal the horizon")
    if not red_mask.any():
        return 0.0
    d = np.asarray(travel_dir, dtype=float)
    d = d / np.linalg.norm(d)
    mid = (np.asarray(line_p1, dtype=float) + np.asarray(line_p2, dtype=float)) / 2.0
    progress = (positions - mid) @ d  # (K, N, T)
    crossed = progress[:, :, red_mask] > BOUNDARY_EPS
    return float(crossed.mean())


def applicable_metrics(kind: AgentKind) -> Sequence[str]:
    """Metric names reported for a given controlled-agent kind."""
    base = ["min_ade", "min_fde", "mfd", "collision_rate"]
    if kind == AgentKind.VEHICLE:
        base.insert(3, "offroad_rate")
    return base
