"""Modal bases: generalized eigen solve, enrichment, and normalization.

A modal basis is an ordered matrix of mode-shape columns over the geometry
nodes, sorted by ascending eigenvalue so complexity (number of wavinesses)
grows with the mode number. The natural basis can be enriched with rigid-body
fields (translations/rotations projected on the normals) and a size field
(uniform radial dilation), which are prepended and subtracted from the
natural modes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EigenSolverError, InvalidBasisError, InvalidParameterError
from .geometry import PROFILE_1D, SPHERICAL_CAP, Geometry
from .operators import OperatorPair
from .validation import check_choice, check_int, readonly

logger = logging.getLogger(__name__)

RIGID = "rigid"
SIZE = "size"
NATURAL = "natural"

EUCLIDEAN = "euclidean"
INFINITY = "infinity"

#: Relative threshold below which an orthogonalized mode is considered a
#: duplicate of an injected field and dropped.
DUPLICATE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class ModalBasis:
    """Ordered mode-shape matrix with eigenvalues and per-mode class tags.

    Attributes
    ----------
    geometry_ref : str
        Identity of the geometry the basis was computed on.
    modes : ndarray, shape (p, n)
        Mode-shape columns.
    eigenvalues : ndarray, shape (n,)
        Generalized eigenvalues (rad^2/s^2), ascending; injected rigid and
        size fields carry 0.
    mode_class : tuple of str
        Per-mode tag: ``"rigid"``, ``"size"`` or ``"natural"``.
    norm_kind : str
        ``"euclidean"`` or ``"infinity"``: which column norm equals 1.
    inf_norms : ndarray, shape (n,)
        Cumulative scale divided out of each column since construction; for an
        infinity-normed basis this is the column's original infinity norm, so
        coefficients keep their metric (mm) meaning.
    """

    geometry_ref: str
    modes: np.ndarray
    eigenvalues: np.ndarray
    mode_class: tuple
    norm_kind: str
    inf_norms: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", readonly(np.asarray(self.modes, dtype=float)))
        object.__setattr__(self, "eigenvalues", readonly(np.asarray(self.eigenvalues, dtype=float)))
        object.__setattr__(self, "inf_norms", readonly(np.asarray(self.inf_norms, dtype=float)))
        object.__setattr__(self, "mode_class", tuple(self.mode_class))
        p, n = self.modes.shape
        if n > p:
            raise InvalidBasisError(f"basis has more modes ({n}) than nodes ({p})")
        if self.eigenvalues.shape != (n,) or self.inf_norms.shape != (n,):
            raise InvalidBasisError("eigenvalues/inf_norms must have one entry per mode")
        if len(self.mode_class) != n:
            raise InvalidBasisError("mode_class must have one tag per mode")
        if any(tag not in (RIGID, SIZE, NATURAL) for tag in self.mode_class):
            raise InvalidBasisError(f"unknown mode class in {self.mode_class}")
        if np.any(np.diff(self.eigenvalues) < 0):
            raise InvalidBasisError("eigenvalues must be sorted ascending")
        check_choice(self.norm_kind, "norm_kind", (EUCLIDEAN, INFINITY))
        if self.norm_kind == INFINITY:
            peaks = np.abs(self.modes).max(axis=0)
            if np.any(np.abs(peaks - 1.0) > 1e-12):
                raise InvalidBasisError("infinity-normed basis has a column with peak != 1")

    @property
    def node_count(self) -> int:
        return self.modes.shape[0]

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    @property
    def ref(self) -> str:
        digest = hashlib.sha1()
        digest.update(self.modes.tobytes())
        digest.update(self.norm_kind.encode())
        return f"basis:{self.geometry_ref}:n{self.n_modes}:{digest.hexdigest()[:12]}"

    def class_mode_numbers(self, tag: str) -> list:
        """1-based mode numbers carrying the given class tag."""
        return [i + 1 for i, cls in enumerate(self.mode_class) if cls == tag]

    def truncated(self, n_modes: int) -> "ModalBasis":
        """Keep the first (least complex) ``n_modes`` columns."""
        n_modes = check_int(n_modes, "n_modes", minimum=1, maximum=self.n_modes)
        if n_modes == self.n_modes:
            return self
        return ModalBasis(
            geometry_ref=self.geometry_ref,
            modes=self.modes[:, :n_modes],
            eigenvalues=self.eigenvalues[:n_modes],
            mode_class=self.mode_class[:n_modes],
            norm_kind=self.norm_kind,
            inf_norms=self.inf_norms[:n_modes],
        )

    def validate(self) -> None:
        """Full invariant check, including column independence."""
        sv = np.linalg.svd(self.modes, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise InvalidBasisError(
                f"basis columns are numerically dependent "
                f"(sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})"
            )

    def to_json(self) -> str:
        payload = {
            "geometry_ref": self.geometry_ref,
            "norm_kind": self.norm_kind,
            "eigenvalues": self.eigenvalues.tolist(),
            "mode_class": list(self.mode_class),
            "inf_norms": self.inf_norms.tolist(),
            "modes": self.modes.tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ModalBasis":
        payload = json.loads(text)
        try:
            basis = cls(
                geometry_ref=payload["geometry_ref"],
                modes=np.asarray(payload["modes"], dtype=float),
                eigenvalues=np.asarray(payload["eigenvalues"], dtype=float),
                mode_class=tuple(payload["mode_class"]),
                norm_kind=payload["norm_kind"],
                inf_norms=np.asarray(payload["inf_norms"], dtype=float),
            )
        except KeyError as exc:
            raise InvalidBasisError(f"basis JSON missing field {exc}") from exc
        basis.validate()
        return basis


@dataclass(frozen=True)
class TaggedField:
    """A candidate basis field with its class tag."""

    values: np.ndarray
    tag: str
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", readonly(np.asarray(self.values, dtype=float)))


def solve_modes(ops: OperatorPair, n: int) -> ModalBasis:
    """Solve the generalized symmetric eigenproblem for the first n modes.

    Returns a euclidean-normed basis sorted by ascending eigenvalue, with a
    deterministic sign convention (largest-magnitude entry of each column is
    positive). Eigenvalues within rounding of zero are snapped to zero, and
    modes below the rigid tolerance are tagged ``"rigid"``.

    Raises
    ------
    EigenSolverError
        If the LAPACK solve fails; the message carries conditioning
        diagnostics for the mass matrix.
    """
    p = ops.size
    n = check_int(n, "n", minimum=1, maximum=p)
    try:
        if n < p:
            values, vectors = scipy.linalg.eigh(
                ops.stiffness, ops.mass, subset_by_index=(0, n - 1)
            )
        else:
            values, vectors = scipy.linalg.eigh(ops.stiffness, ops.mass)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(_eigen_diagnostics(ops, exc)) from exc

    top = float(values[-1]) if values[-1] > 0 else 1.0
    values = np.where((values < 0.0) & (values > -1e-8 * top), 0.0, values)

    vectors = vectors / np.linalg.norm(vectors, axis=0)
    vectors = _fix_signs(vectors)

    tol = rigid_tolerance(values)
    tags = tuple(RIGID if lam <= tol else NATURAL for lam in values)
    return ModalBasis(
        geometry_ref=ops.geometry_ref,
        modes=vectors,
        eigenvalues=values,
        mode_class=tags,
        norm_kind=EUCLIDEAN,
        inf_norms=np.ones(n),
    )


def rigid_tolerance(eigenvalues: np.ndarray) -> float:
    """Zero-energy threshold from the largest relative gap in the low spectrum.

    Looks at the first eight eigenvalues, finds the largest ratio between
    consecutive ones, and places the threshold at 1e-8 times the eigenvalue
    just above that gap. Degenerate if fewer than two eigenvalues.
    """
    head = np.asarray(eigenvalues[: min(8, len(eigenvalues))], dtype=float)
    if head.size < 2:
        return 0.0
    top = abs(head[-1]) if head[-1] != 0 else 1.0
    floor = np.maximum(np.abs(head), 1e-300)
    ratios = head[1:] / floor[:-1]
    k = int(np.argmax(ratios))
    return 1e-8 * head[k + 1]


def _eigen_diagnostics(ops: OperatorPair, exc) -> str:
    mass = ops.mass
    diag = np.diag(mass)
    try:
        cond = float(np.linalg.cond(mass))
    except np.linalg.LinAlgError:
        cond = float("inf")
    return (
        f"generalized eigen solve failed: {exc}; "
        f"mass diag range [{diag.min():.3e}, {diag.max():.3e}], cond(M)={cond:.3e}"
    )


def _fix_signs(columns: np.ndarray) -> np.ndarray:
    out = columns.copy()
    idx = np.argmax(np.abs(out), axis=0)
    flip = out[idx, np.arange(out.shape[1])] < 0
    out[:, flip] *= -1.0
    return out


def rigid_and_size_fields(geometry: Geometry) -> list:
    """Candidate rigid-body and size fields projected on the node normals.

    Translations and rotations (about the geometry's reference point) become
    scalar fields via the dot product with each node normal; a uniform radial
    dilation provides the size field for spherical caps. Fields whose
    Euclidean norm is below 1e-9 * sqrt(p) are dropped: they carry no
    measurable content on this geometry (e.g. rotations of a sphere about its
    center).
    """
    nodes = geometry.nodes
    normals = geometry.normals
    p = geometry.node_count
    if geometry.kind == SPHERICAL_CAP:
        ref_point = np.zeros(3)
    else:
        ref_point = nodes.mean(axis=0)
    r = nodes - ref_point

    candidates = []
    axes = np.eye(3)
    names = ("x", "y", "z")
    for axis, name in zip(axes, names):
        candidates.append(TaggedField(normals @ axis, RIGID, f"translation_{name}"))
    for axis, name in zip(axes, names):
        field_values = np.einsum("ij,ij->i", np.cross(axis, r), normals)
        candidates.append(TaggedField(field_values, RIGID, f"rotation_{name}"))
    if geometry.kind == SPHERICAL_CAP:
        candidates.append(TaggedField(np.ones(p), SIZE, "size"))

    threshold = 1e-9 * np.sqrt(p)
    kept = [f for f in candidates if np.linalg.norm(f.values) >= threshold]
    logger.debug(
        "rigid/size candidates: %d kept of %d (%s)",
        len(kept), len(candidates), ", ".join(f.name for f in kept),
    )
    return kept


def enrich_basis(natural: ModalBasis, extra_fields: list) -> ModalBasis:
    """Prepend technological fields and subtract them from the natural modes.

    The injected fields (rigid first, then size) keep their raw shape; every
    natural mode has its component in their span removed. A natural mode
    whose residual drops below 1e-8 of its original norm duplicated an
    injected field and is dropped. With no extra fields this is a no-op up to
    column rescaling and the sign convention.

    Raises
    ------
    InvalidParameterError
        If the extra fields are linearly dependent among themselves.
    """
    if not extra_fields:
        return renormalize(natural, EUCLIDEAN)

    p = natural.node_count
    rigid = [f for f in extra_fields if f.tag == RIGID]
    size = [f for f in extra_fields if f.tag == SIZE]
    other = [f for f in extra_fields if f.tag not in (RIGID, SIZE)]
    if other:
        raise InvalidParameterError(
            f"extra fields must be tagged rigid or size, got {[f.tag for f in other]}"
        )
    ordered = rigid + size
    injected = np.stack([f.values for f in ordered], axis=1)
    if injected.shape[0] != p:
        raise InvalidParameterError(
            f"extra fields have {injected.shape[0]} entries, geometry has {p} nodes"
        )

    ortho, upper = np.linalg.qr(injected)
    if np.abs(np.diag(upper)).min() <= 1e-10 * np.abs(np.diag(upper)).max():
        raise InvalidParameterError("extra fields are linearly dependent")

    kept_columns = []
    kept_idx = []
    for j in range(natural.n_modes):
        column = natural.modes[:, j]
        residual = column - ortho @ (ortho.T @ column)
        residual -= ortho @ (ortho.T @ residual)
        if np.linalg.norm(residual) < DUPLICATE_TOLERANCE * np.linalg.norm(column):
            logger.debug("dropping natural mode %d: duplicates an injected field", j + 1)
            continue
        kept_columns.append(residual)
        kept_idx.append(j)

    columns = np.concatenate(
        [injected] + ([np.stack(kept_columns, axis=1)] if kept_columns else []), axis=1
    )
    columns = columns / np.linalg.norm(columns, axis=0)
    columns = _fix_signs(columns)

    eigenvalues = np.concatenate(
        [np.zeros(len(ordered)), natural.eigenvalues[kept_idx]]
    )
    tags = tuple(f.tag for f in ordered) + tuple(natural.mode_class[j] for j in kept_idx)
    basis = ModalBasis(
        geometry_ref=natural.geometry_ref,
        modes=columns,
        eigenvalues=eigenvalues,
        mode_class=tags,
        norm_kind=EUCLIDEAN,
        inf_norms=np.ones(columns.shape[1]),
    )
    basis.validate()
    logger.debug(
        "enriched basis: %d injected + %d kept natural = %d columns",
        len(ordered), len(kept_idx), basis.n_modes,
    )
    return basis


def renormalize(basis: ModalBasis, norm_kind: str) -> ModalBasis:
    """Rescale every column so the requested norm equals 1.

    The division factors accumulate into ``inf_norms`` so coefficients on the
    rescaled basis can always be mapped back to metric values.
    """
    check_choice(norm_kind, "norm_kind", (EUCLIDEAN, INFINITY))
    if norm_kind == INFINITY:
        scales = np.abs(basis.modes).max(axis=0)
    else:
        scales = np.linalg.norm(basis.modes, axis=0)
    if np.any(scales <= 0.0):
        zero = int(np.argmin(scales)) + 1
        raise InvalidBasisError(f"mode {zero} is a zero column, cannot normalize")
    return ModalBasis(
        geometry_ref=basis.geometry_ref,
        modes=basis.modes / scales,
        eigenvalues=basis.eigenvalues,
        mode_class=basis.mode_class,
        norm_kind=norm_kind,
        inf_norms=basis.inf_norms * scales,
    )


def compute_modal_basis(
    geometry: Geometry,
    n_modes: int,
    *,
    enrich: bool = True,
    norm_kind: str = INFINITY,
) -> ModalBasis:
    """Build the full basis pipeline for a geometry.

    Solves ``n_modes`` natural modes, optionally enriches with the rigid and
    size fields of the geometry, truncates back to ``n_modes`` columns
    (complexity-ordered), and applies the requested normalization.
    """
    from .operators import assemble_operators

    ops = assemble_operators(geometry)
    basis = solve_modes(ops, n_modes)
    if enrich:
        basis = enrich_basis(basis, rigid_and_size_fields(geometry))
        if basis.n_modes > n_modes:
            basis = basis.truncated(n_modes)
    return renormalize(basis, norm_kind)
