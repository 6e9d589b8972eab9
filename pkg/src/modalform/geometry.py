"""Nominal geometries, their node sets, and uniform measurement sampling.

Two geometry kinds are supported: a straight 1-D profile treated as a planar
height map (normals all +z) and a spherical cap meshed with a Fibonacci-spiral
lattice. Deviations are scalar fields along the node normals, one degree of
freedom per node.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .errors import InvalidParameterError
from .validation import check_int, check_scalar, check_seed, readonly

PROFILE_1D = "profile1d"
SPHERICAL_CAP = "spherical_cap"

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class Geometry:
    """An immutable nominal geometry.

    Attributes
    ----------
    kind : str
        ``"profile1d"`` or ``"spherical_cap"``.
    nodes : ndarray, shape (p, 3)
        Node coordinates in mm.
    normals : ndarray, shape (p, 3)
        Outward unit normals, one per node.
    elements : ndarray, shape (m, 2) or (m, 3)
        Segment or triangle connectivity (node indices).
    params : dict
        Kind-specific construction parameters.
    """

    kind: str
    nodes: np.ndarray
    normals: np.ndarray
    elements: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", readonly(np.asarray(self.nodes, dtype=float)))
        object.__setattr__(self, "normals", readonly(np.asarray(self.normals, dtype=float)))
        object.__setattr__(self, "elements", readonly(np.asarray(self.elements, dtype=np.intp)))
        _validate_geometry(self)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def ref(self) -> str:
        """Content-derived identity shared by equal constructions."""
        digest = hashlib.sha1()
        digest.update(self.nodes.tobytes())
        digest.update(self.elements.tobytes())
        return f"{self.kind}:p{self.node_count}:{digest.hexdigest()[:12]}"

    def local_spacing(self) -> np.ndarray:
        """Per-node distance to the nearest other node."""
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(self.nodes).query(self.nodes, k=2)
        return dist[:, 1]

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "params": self.params,
            "nodes": self.nodes.tolist(),
            "normals": self.normals.tolist(),
            "elements": self.elements.tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Geometry":
        payload = json.loads(text)
        try:
            return cls(
                kind=payload["kind"],
                nodes=np.asarray(payload["nodes"], dtype=float),
                normals=np.asarray(payload["normals"], dtype=float),
                elements=np.asarray(payload["elements"], dtype=np.intp),
                params=dict(payload.get("params", {})),
            )
        except KeyError as exc:
            raise InvalidParameterError(f"geometry JSON missing field {exc}") from exc


def _validate_geometry(geom: Geometry) -> None:
    if geom.kind not in (PROFILE_1D, SPHERICAL_CAP):
        raise InvalidParameterError(f"unknown geometry kind {geom.kind!r}")
    p = geom.nodes.shape[0]
    min_nodes = 2 if geom.kind == PROFILE_1D else 4
    if geom.nodes.ndim != 2 or geom.nodes.shape[1] != 3 or p < min_nodes:
        raise InvalidParameterError(
            f"{geom.kind} needs at least {min_nodes} nodes of 3 coordinates, "
            f"got shape {geom.nodes.shape}"
        )
    if geom.normals.shape != geom.nodes.shape:
        raise InvalidParameterError("normals must match nodes in shape")
    lengths = np.linalg.norm(geom.normals, axis=1)
    if np.any(np.abs(lengths - 1.0) > 1e-12):
        raise InvalidParameterError("normals must be unit vectors within 1e-12")
    width = 2 if geom.kind == PROFILE_1D else 3
    if geom.elements.ndim != 2 or geom.elements.shape[1] != width:
        raise InvalidParameterError(
            f"{geom.kind} elements must have {width} node indices per row"
        )
    if geom.elements.min(initial=0) < 0 or geom.elements.max(initial=0) >= p:
        raise InvalidParameterError("element connectivity references invalid node indices")
    if geom.kind == SPHERICAL_CAP:
        radius = float(geom.params.get("radius", np.linalg.norm(geom.nodes[0])))
        dist = np.linalg.norm(geom.nodes, axis=1)
        if np.any(np.abs(dist - radius) > 1e-9 * radius):
            raise InvalidParameterError("cap nodes must lie on the sphere within 1e-9*R")
    _check_element_measures(geom)


def _check_element_measures(geom: Geometry) -> None:
    if geom.kind == PROFILE_1D:
        vec = geom.nodes[geom.elements[:, 1]] - geom.nodes[geom.elements[:, 0]]
        measure = np.linalg.norm(vec, axis=1)
    else:
        a = geom.nodes[geom.elements[:, 1]] - geom.nodes[geom.elements[:, 0]]
        b = geom.nodes[geom.elements[:, 2]] - geom.nodes[geom.elements[:, 0]]
        measure = 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
    bad = np.nonzero(measure <= 1e-14)[0]
    if bad.size:
        raise InvalidParameterError(f"degenerate element(s) at indices {bad.tolist()}")


@dataclass(frozen=True)
class SampleSet:
    """A sorted subset of geometry node indices selected for measurement."""

    geometry_ref: str
    node_count: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidParameterError("sample indices must be a non-empty 1-D sequence")
        if np.any(np.diff(idx) <= 0):
            raise InvalidParameterError("sample indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.node_count:
            raise InvalidParameterError(
                f"sample indices must lie in [0, {self.node_count}), got "
                f"[{idx[0]}, {idx[-1]}]"
            )
        object.__setattr__(self, "indices", readonly(idx))

    @property
    def count(self) -> int:
        return self.indices.shape[0]

    @property
    def is_full(self) -> bool:
        return self.count == self.node_count

    @classmethod
    def full(cls, geometry_ref: str, node_count: int) -> "SampleSet":
        return cls(geometry_ref, node_count, np.arange(node_count))

    @classmethod
    def of_geometry(cls, geometry: Geometry, indices=None) -> "SampleSet":
        if indices is None:
            return cls.full(geometry.ref, geometry.node_count)
        return cls(geometry.ref, geometry.node_count, np.asarray(indices, dtype=np.intp))


def build_profile(length: float, node_count: int) -> Geometry:
    """Build a straight profile of equally spaced nodes on the x-axis.

    Parameters
    ----------
    length : float
        Profile length in mm, > 0.
    node_count : int
        Number of nodes, >= 2.
    """
    length = check_scalar(length, "length", positive=True)
    node_count = check_int(node_count, "node_count", minimum=2)
    x = np.linspace(0.0, length, node_count)
    nodes = np.zeros((node_count, 3))
    nodes[:, 0] = x
    normals = np.zeros((node_count, 3))
    normals[:, 2] = 1.0
    segments = np.stack([np.arange(node_count - 1), np.arange(1, node_count)], axis=1)
    return Geometry(
        kind=PROFILE_1D,
        nodes=nodes,
        normals=normals,
        elements=segments,
        params={"length": length, "node_count": node_count},
    )


def build_spherical_cap(radius: float, half_angle: float, node_count: int) -> Geometry:
    """Build a spherical cap meshed with a Fibonacci-spiral lattice.

    Nodes are placed at equal-area latitudes with golden-angle azimuth steps,
    which gives near-uniform density without iterative relaxation. The cap is
    centered on the origin with its axis along +z; normals point radially
    outward. Connectivity comes from a Delaunay triangulation of the
    azimuthal-equidistant projection.

    Parameters
    ----------
    radius : float
        Sphere radius in mm, > 0.
    half_angle : float
        Polar half-angle of the cap in radians, in (0, pi/2].
    node_count : int
        Number of nodes, >= 4.
    """
    radius = check_scalar(radius, "radius", positive=True)
    half_angle = check_scalar(half_angle, "half_angle")
    if not 0.0 < half_angle <= np.pi / 2 + 1e-12:
        raise InvalidParameterError(
            f"half_angle must be in (0, pi/2], got {half_angle}"
        )
    node_count = check_int(node_count, "node_count", minimum=4)

    i = np.arange(node_count)
    z = 1.0 - (1.0 - np.cos(half_angle)) * (i + 0.5) / node_count
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = i * _GOLDEN_ANGLE
    sin_theta = np.sin(theta)
    normals = np.stack(
        [sin_theta * np.cos(phi), sin_theta * np.sin(phi), z], axis=1
    )
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    nodes = radius * normals

    # Azimuthal-equidistant projection keeps the triangulation deterministic
    # and free of pole artifacts.
    uv = np.stack([theta * np.cos(phi), theta * np.sin(phi)], axis=1)
    simplices = Delaunay(uv).simplices
    simplices = _drop_degenerate_triangles(nodes, simplices)

    return Geometry(
        kind=SPHERICAL_CAP,
        nodes=nodes,
        normals=normals,
        elements=simplices,
        params={"radius": radius, "half_angle": half_angle, "node_count": node_count},
    )


def _drop_degenerate_triangles(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = nodes[tris[:, 1]] - nodes[tris[:, 0]]
    b = nodes[tris[:, 2]] - nodes[tris[:, 0]]
    areas = 0.5 * np.linalg.norm(np.cross(a, b), axis=1)
    edge = np.linalg.norm(a, axis=1)
    keep = areas > 1e-12 * np.maximum(edge, 1.0) ** 2
    return tris[keep]


def uniform_subsample(geometry: Geometry, q: int, seed: int) -> SampleSet:
    """Select ``q`` node indices maximizing spatial uniformity.

    Farthest-point sampling started from a seed-selected node: each step adds
    the node farthest from the already selected set (ties resolved to the
    lowest index). Deterministic for fixed (geometry, q, seed).
    """
    p = geometry.node_count
    q = check_int(q, "q", minimum=1, maximum=p)
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    start = int(rng.integers(p))

    nodes = geometry.nodes
    selected = np.zeros(p, dtype=bool)
    selected[start] = True
    dist = np.linalg.norm(nodes - nodes[start], axis=1)
    dist[start] = -1.0
    for _ in range(q - 1):
        nxt = int(np.argmax(dist))
        selected[nxt] = True
        dist = np.minimum(dist, np.linalg.norm(nodes - nodes[nxt], axis=1))
        dist[nxt] = -1.0
    return SampleSet.of_geometry(geometry, np.nonzero(selected)[0])
