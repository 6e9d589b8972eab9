"""Measurement planning: probe-point ordering and DMIS program emission.

The probing order is a traveling-salesman heuristic over an open path (the
probe does not return to its first point): greedy nearest neighbor from the
first point, optionally improved by deterministic 2-opt segment reversals.
Plans serialize to a minimal DMIS program with one PTMEAS per point.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .decomposition import DeviationField
from .errors import InvalidParameterError
from .geometry import SPHERICAL_CAP, Geometry, SampleSet
from .validation import check_choice, check_points, check_scalar, check_seed, readonly

logger = logging.getLogger(__name__)

AS_GIVEN = "as_given"
NEAREST_NEIGHBOR = "nearest_neighbor"
NN_PLUS_2OPT = "nn_plus_2opt"
METHODS = (AS_GIVEN, NEAREST_NEIGHBOR, NN_PLUS_2OPT)

FEATURE_SPHERE = "SPHERE"
FEATURE_CURVE = "GCURVE"

#: 2-opt gives up after this many full passes and logs a diagnostic.
DEFAULT_MAX_PASSES = 50

_IMPROVEMENT_EPS = 1e-12


@dataclass(frozen=True)
class MeasurementPlan:
    """Ordered probe points with approach vectors and the path length."""

    positions: np.ndarray
    approach: np.ndarray
    method: str
    tour_length: float = -1.0
    geometry_ref: str = ""
    feature_type: str = FEATURE_CURVE
    node_indices: np.ndarray | None = None

    def __post_init__(self):
        positions = check_points(self.positions, "positions")
        approach = check_points(self.approach, "approach")
        if approach.shape != positions.shape:
            raise InvalidParameterError("approach vectors must match positions in shape")
        object.__setattr__(self, "positions", readonly(positions))
        object.__setattr__(self, "approach", readonly(approach))
        check_choice(self.method, "method", METHODS)
        check_choice(self.feature_type, "feature_type", (FEATURE_SPHERE, FEATURE_CURVE))
        if self.node_indices is not None:
            idx = np.asarray(self.node_indices, dtype=np.intp)
            if idx.shape != (positions.shape[0],):
                raise InvalidParameterError("node_indices must have one entry per point")
            object.__setattr__(self, "node_indices", readonly(idx))
        length = float(np.linalg.norm(np.diff(positions, axis=0), axis=1).sum())
        if self.tour_length < 0:
            object.__setattr__(self, "tour_length", length)
        elif abs(self.tour_length - length) > 1e-9 * max(length, 1.0):
            raise InvalidParameterError(
                f"tour_length {self.tour_length} does not match path length {length}"
            )

    @property
    def point_count(self) -> int:
        return self.positions.shape[0]

    def to_json(self) -> str:
        payload = {
            "geometry_ref": self.geometry_ref,
            "method": self.method,
            "feature_type": self.feature_type,
            "tour_length": self.tour_length,
            "positions": self.positions.tolist(),
            "approach": self.approach.tolist(),
            "node_indices": None
            if self.node_indices is None
            else self.node_indices.tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "MeasurementPlan":
        payload = json.loads(text)
        indices = payload.get("node_indices")
        return cls(
            positions=np.asarray(payload["positions"], dtype=float),
            approach=np.asarray(payload["approach"], dtype=float),
            method=payload["method"],
            tour_length=float(payload["tour_length"]),
            geometry_ref=payload.get("geometry_ref", ""),
            feature_type=payload.get("feature_type", FEATURE_CURVE),
            node_indices=None if indices is None else np.asarray(indices, dtype=np.intp),
        )


def order_tour(
    points,
    method: str = NN_PLUS_2OPT,
    *,
    approach=None,
    node_indices=None,
    geometry_ref: str = "",
    feature_type: str = FEATURE_CURVE,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> MeasurementPlan:
    """Order probe points into a short open path.

    ``nearest_neighbor`` builds a greedy path from the first point;
    ``nn_plus_2opt`` then reverses segments until no improving reversal
    remains (a 2-opt local optimum). Ties always resolve to the lowest point
    index, so the result is deterministic.
    """
    positions = check_points(points, "points")
    m = positions.shape[0]
    if m < 1:
        raise InvalidParameterError("need at least one point")
    check_choice(method, "method", METHODS)
    if approach is None:
        approach = np.tile([0.0, 0.0, -1.0], (m, 1))
    approach = check_points(approach, "approach")

    order = np.arange(m)
    if method in (NEAREST_NEIGHBOR, NN_PLUS_2OPT) and m > 2:
        distance = _distance_matrix(positions)
        order = _nearest_neighbor_order(distance)
        if method == NN_PLUS_2OPT:
            order = _two_opt(order, distance, max_passes)

    return MeasurementPlan(
        positions=positions[order],
        approach=approach[order],
        method=method,
        geometry_ref=geometry_ref,
        feature_type=feature_type,
        node_indices=None if node_indices is None else np.asarray(node_indices)[order],
    )


def plan_probe_path(
    geometry: Geometry,
    sample: SampleSet | None = None,
    method: str = NN_PLUS_2OPT,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> MeasurementPlan:
    """Build a measurement plan over geometry nodes.

    The probe approaches each node against its outward normal (the inner
    side of a cap is probed outward-to-inward along the radius).
    """
    if sample is None:
        sample = SampleSet.of_geometry(geometry)
    if sample.geometry_ref != geometry.ref:
        raise InvalidParameterError("sample does not belong to this geometry")
    idx = sample.indices
    feature = FEATURE_SPHERE if geometry.kind == SPHERICAL_CAP else FEATURE_CURVE
    return order_tour(
        geometry.nodes[idx],
        method,
        approach=-geometry.normals[idx],
        node_indices=idx,
        geometry_ref=geometry.ref,
        feature_type=feature,
        max_passes=max_passes,
    )


def _distance_matrix(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.linalg.norm(diff, axis=2)


def _nearest_neighbor_order(distance: np.ndarray) -> np.ndarray:
    m = distance.shape[0]
    visited = np.zeros(m, dtype=bool)
    order = np.empty(m, dtype=np.intp)
    current = 0
    visited[0] = True
    order[0] = 0
    for step in range(1, m):
        row = np.where(visited, np.inf, distance[current])
        current = int(np.argmin(row))
        visited[current] = True
        order[step] = current
    return order


def _two_opt(order: np.ndarray, distance: np.ndarray, max_passes: int) -> np.ndarray:
    """First-improvement 2-opt for an open path; deterministic scan order."""
    order = order.copy()
    m = len(order)
    for _ in range(max_passes):
        improved = False
        for i in range(m - 1):
            while True:
                delta = _reversal_gains(order, distance, i)
                candidates = np.nonzero(delta < -_IMPROVEMENT_EPS)[0]
                if candidates.size == 0:
                    break
                j = i + 1 + int(candidates[0])
                order[i : j + 1] = order[i : j + 1][::-1]
                improved = True
        if not improved:
            return order
    logger.warning("2-opt reached the %d-pass bound before a local optimum", max_passes)
    return order


def _reversal_gains(order: np.ndarray, distance: np.ndarray, i: int) -> np.ndarray:
    """Length change from reversing order[i..j] for every j > i."""
    m = len(order)
    js = np.arange(i + 1, m)
    delta = np.zeros(js.shape[0])
    if i > 0:
        delta += distance[order[i - 1], order[js]] - distance[order[i - 1], order[i]]
    inner = js < m - 1
    after = order[js[inner] + 1]
    delta[inner] += distance[order[i], after] - distance[order[js[inner]], after]
    return delta


def emit_dmis(plan: MeasurementPlan, feature_name: str) -> str:
    """Render a minimal DMIS measurement program for the plan.

    One ``PTMEAS/CART`` line per ordered point with fixed-point coordinates
    (6 decimals) and the approach vector as i, j, k. Output is a pure
    function of the plan: identical plans give byte-identical programs.
    """
    if not isinstance(feature_name, str) or not feature_name.strip():
        raise InvalidParameterError("feature_name must be a non-empty string")
    if plan.point_count < 1:
        raise InvalidParameterError("plan has no points")
    name = feature_name.strip()
    lines = [
        f"DMISMN/'MEASUREMENT PROGRAM {name}'",
        f"FILNAM/'{name}'",
        f"F({name})=FEAT/{plan.feature_type}",
        f"MEAS/{plan.feature_type},F({name}),{plan.point_count}",
    ]
    for position, vector in zip(plan.positions, plan.approach):
        coords = [f"{value + 0.0:.6f}" for value in (*position, *vector)]
        lines.append("PTMEAS/CART, " + ", ".join(coords))
    lines.append("ENDMES")
    lines.append("ENDFIL")
    return "\n".join(lines) + "\n"


def simulate_probing(
    plan: MeasurementPlan,
    true_field: DeviationField,
    noise_sigma: float,
    seed: int,
) -> DeviationField:
    """Virtual CMM: restrict a true deviation field to the planned points.

    Adds i.i.d. Gaussian probing noise of the given sigma (mm); deterministic
    for a fixed seed.
    """
    noise_sigma = check_scalar(noise_sigma, "noise_sigma", minimum=0.0)
    seed = check_seed(seed)
    if plan.node_indices is None:
        raise InvalidParameterError(
            "plan does not map points to geometry nodes; build it from a geometry"
        )
    if plan.geometry_ref != true_field.geometry_ref:
        raise InvalidParameterError(
            f"plan is over geometry {plan.geometry_ref!r}, "
            f"field over {true_field.geometry_ref!r}"
        )
    if not true_field.sample.is_full:
        raise InvalidParameterError("true_field must cover every geometry node")

    indices = np.sort(plan.node_indices)
    sample = SampleSet(true_field.geometry_ref, true_field.sample.node_count, indices)
    values = true_field.values[indices].copy()
    if noise_sigma > 0.0:
        values += np.random.default_rng(seed).normal(0.0, noise_sigma, indices.shape[0])
    return DeviationField(sample=sample, values=values)
