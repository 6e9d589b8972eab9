"""Structural operator assembly over scalar normal-deviation fields.

Profiles get a bending stiffness condensed from cubic Hermite beam elements;
caps get the cotangent surface Laplacian. Both pair with a lumped diagonal
mass so the generalized eigenproblem orders mode shapes from long to short
wavelengths. Unit material constants throughout: only the ordering and the
shapes matter downstream, not the eigenvalue magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, InvalidParameterError
from .geometry import PROFILE_1D, SPHERICAL_CAP, Geometry
from .validation import readonly


@dataclass(frozen=True)
class OperatorPair:
    """Symmetric stiffness/mass pair over the p scalar degrees of freedom.

    ``stiffness`` is positive semidefinite, ``mass`` positive definite; both
    are assembled symmetrically so K == K.T and M == M.T hold exactly.
    """

    geometry_ref: str
    stiffness: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "stiffness", readonly(np.asarray(self.stiffness, dtype=float)))
        object.__setattr__(self, "mass", readonly(np.asarray(self.mass, dtype=float)))
        k, m = self.stiffness, self.mass
        if k.shape != m.shape or k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise InvalidParameterError("stiffness and mass must be square with equal shape")
        if not (np.array_equal(k, k.T) and np.array_equal(m, m.T)):
            raise InvalidParameterError("operators must be exactly symmetric")

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]


def assemble_operators(geometry: Geometry) -> OperatorPair:
    """Assemble the stiffness/mass pair for a geometry.

    Raises
    ------
    AssemblyError
        If the connectivity contains a degenerate element; the message names
        the offending element index.
    """
    if geometry.kind == PROFILE_1D:
        stiffness, mass = _profile_bending_operators(geometry)
    elif geometry.kind == SPHERICAL_CAP:
        stiffness, mass = _cap_laplacian_operators(geometry)
    else:  # pragma: no cover - geometry constructor forbids other kinds
        raise InvalidParameterError(f"unsupported geometry kind {geometry.kind!r}")
    return OperatorPair(geometry_ref=geometry.ref, stiffness=stiffness, mass=mass)


def _profile_bending_operators(geometry: Geometry):
    """Hermite beam bending condensed to nodal deflections.

    The rotational degrees of freedom carry no mass in the lumped model, so
    static condensation of the rotations is exact for the eigenproblem: the
    condensed pencil has the same finite eigenvalues as the full one.
    """
    nodes = geometry.nodes
    p = geometry.node_count
    k_ww = np.zeros((p, p))
    k_wt = np.zeros((p, p))
    k_tt = np.zeros((p, p))
    mass_diag = np.zeros(p)

    for e, (i, j) in enumerate(geometry.elements):
        h = float(np.linalg.norm(nodes[j] - nodes[i]))
        if h <= 1e-14:
            raise AssemblyError(f"degenerate segment element {e} (zero length)")
        ke = _hermite_bending(h)
        w_idx = (i, j)
        for a in range(2):
            for b in range(2):
                k_ww[w_idx[a], w_idx[b]] += ke[2 * a, 2 * b]
                k_wt[w_idx[a], w_idx[b]] += ke[2 * a, 2 * b + 1]
                k_tt[w_idx[a], w_idx[b]] += ke[2 * a + 1, 2 * b + 1]
        mass_diag[i] += 0.5 * h
        mass_diag[j] += 0.5 * h

    coupling = np.linalg.solve(k_tt, k_wt.T)
    stiffness = k_ww - k_wt @ coupling
    stiffness = 0.5 * (stiffness + stiffness.T)
    return stiffness, np.diag(mass_diag)


def _hermite_bending(h: float) -> np.ndarray:
    """4x4 cubic Hermite bending stiffness, dof order (w1, t1, w2, t2)."""
    return (1.0 / h**3) * np.array(
        [
            [12.0, 6.0 * h, -12.0, 6.0 * h],
            [6.0 * h, 4.0 * h * h, -6.0 * h, 2.0 * h * h],
            [-12.0, -6.0 * h, 12.0, -6.0 * h],
            [6.0 * h, 2.0 * h * h, -6.0 * h, 4.0 * h * h],
        ]
    )


def _cap_laplacian_operators(geometry: Geometry):
    """Cotangent Laplacian with mixed Voronoi-area lumped mass."""
    nodes = geometry.nodes
    tris = geometry.elements
    p = geometry.node_count

    corner = nodes[tris]                      # (m, 3, 3)
    edges = np.roll(corner, -2, axis=1) - np.roll(corner, -1, axis=1)
    doubled = np.linalg.norm(np.cross(edges[:, 1], edges[:, 2]), axis=1)
    bad = np.nonzero(doubled <= 1e-14)[0]
    if bad.size:
        raise AssemblyError(f"degenerate triangle element {bad[0]} (zero area)")
    areas = 0.5 * doubled

    # cot at corner v = (e_{v+1} . e_{v+2}) / (2A), edges pointing away from v
    dots = np.empty((len(tris), 3))
    for v in range(3):
        dots[:, v] = np.einsum(
            "ij,ij->i", -edges[:, (v + 1) % 3], edges[:, (v + 2) % 3]
        )
    cots = dots / doubled[:, None]

    stiffness = np.zeros((p, p))
    for v in range(3):
        a = tris[:, (v + 1) % 3]
        b = tris[:, (v + 2) % 3]
        w = 0.5 * cots[:, v]
        np.add.at(stiffness, (a, b), -w)
        np.add.at(stiffness, (b, a), -w)
        np.add.at(stiffness, (a, a), w)
        np.add.at(stiffness, (b, b), w)
    stiffness = 0.5 * (stiffness + stiffness.T)

    mass_diag = _mixed_voronoi_areas(tris, edges, areas, cots, p)
    return stiffness, np.diag(mass_diag)


def _mixed_voronoi_areas(tris, edges, areas, cots, p) -> np.ndarray:
    """Per-node mixed Voronoi areas (circumcentric cells, clamped when obtuse).

    Obtuse triangles contribute area/2 to the obtuse corner and area/4 to the
    others; this keeps every lumped mass positive while the areas still sum to
    the exact total mesh area.
    """
    sq = np.einsum("mvj,mvj->mv", edges, edges)   # squared length opposite corner v
    obtuse = cots < 0.0
    any_obtuse = obtuse.any(axis=1)

    contrib = np.empty((len(tris), 3))
    for v in range(3):
        contrib[:, v] = (
            sq[:, (v + 1) % 3] * cots[:, (v + 1) % 3]
            + sq[:, (v + 2) % 3] * cots[:, (v + 2) % 3]
        ) / 8.0
    clamped = np.where(obtuse, 0.5, 0.25) * areas[:, None]
    contrib = np.where(any_obtuse[:, None], clamped, contrib)

    mass = np.zeros(p)
    np.add.at(mass, tris, contrib)
    return mass
