"""Full-field form-defect recovery from sparse (degraded) measurements.

A degraded measurement lives on a subset of the geometry nodes. Restricting
the infinity-normed basis to the sampled rows and least-squares fitting the
least complex modes gives interpolated coefficients, which reconstruct the
defect over all nodes. The number of fitted modes never exceeds the number of
measured points. Because the euclidean- and infinity-normed bases differ only
by a per-column scale (recorded in ``inf_norms``) and the degraded basis is a
plain row restriction, this single restricted fit covers every change of
basis involved; no explicit passage matrices are needed while the restricted
matrix has full column rank.

The sweep harness replays the density-versus-complexity trade-off: synthetic
defects of increasing complexity, sampled finer to coarser, each interpolated
and scored against the dense reference.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .basis import INFINITY, ModalBasis
from .decomposition import DeviationField, ModalSignature
from .errors import InterpolationFailureError, InvalidParameterError
from .geometry import Geometry, SampleSet, uniform_subsample
from .validation import check_int, check_scalar, check_seed, readonly

logger = logging.getLogger(__name__)

#: Condition number at which a restricted fit is declared rank deficient.
MAX_CONDITION = 1e10


@dataclass(frozen=True)
class DegradedProjection:
    """Row restriction of a basis to a sample, truncated to the simplest modes."""

    basis: ModalBasis
    sample: SampleSet
    restricted_modes: np.ndarray
    kept_mode_numbers: tuple
    condition_number: float

    def __post_init__(self):
        object.__setattr__(
            self, "restricted_modes", readonly(np.asarray(self.restricted_modes, dtype=float))
        )
        object.__setattr__(self, "kept_mode_numbers", tuple(self.kept_mode_numbers))

    @property
    def basis_ref(self) -> str:
        return self.basis.ref

    @property
    def n_kept(self) -> int:
        return len(self.kept_mode_numbers)


def build_degraded_projection(
    basis: ModalBasis, sample: SampleSet, max_modes: int | None = None
) -> DegradedProjection:
    """Restrict an infinity-normed basis to the sampled node rows.

    Keeps the first ``min(max_modes, q, n)`` columns: the basis is
    complexity-ordered, so truncation discards the most complex modes first,
    and at least as many points as fitted modes are always retained.
    """
    if basis.norm_kind != INFINITY:
        raise InvalidParameterError(
            "degraded projection requires an infinity-normed basis "
            f"(got {basis.norm_kind!r}); renormalize first"
        )
    if sample.geometry_ref != basis.geometry_ref:
        raise InvalidParameterError(
            f"sample is over geometry {sample.geometry_ref!r}, "
            f"basis over {basis.geometry_ref!r}"
        )
    if sample.node_count != basis.node_count:
        raise InvalidParameterError(
            f"sample indexes {sample.node_count} nodes, basis has {basis.node_count}"
        )
    n = basis.n_modes
    if max_modes is None:
        max_modes = n
    max_modes = check_int(max_modes, "max_modes", minimum=1)
    n_kept = min(max_modes, sample.count, n)

    restricted = basis.modes[sample.indices][:, :n_kept]
    singular = np.linalg.svd(restricted, compute_uv=False)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")
    return DegradedProjection(
        basis=basis,
        sample=sample,
        restricted_modes=restricted,
        kept_mode_numbers=tuple(range(1, n_kept + 1)),
        condition_number=condition,
    )


def interpolate(
    degraded: DeviationField, projection: DegradedProjection
) -> tuple[ModalSignature, DeviationField]:
    """Fit the kept modes to a degraded measurement and lift to the full field.

    Returns the interpolated signature (zero-padded to the full mode count)
    and the reconstruction over every geometry node.

    Raises
    ------
    InterpolationFailureError
        If the restricted matrix condition number exceeds 1e10; the message
        names the offending mode count.
    """
    sample = projection.sample
    if degraded.geometry_ref != sample.geometry_ref or not np.array_equal(
        degraded.sample.indices, sample.indices
    ):
        raise InvalidParameterError(
            "degraded field and projection must share the same sample"
        )
    if projection.condition_number > MAX_CONDITION:
        raise InterpolationFailureError(
            f"restricted basis is rank deficient fitting "
            f"{projection.n_kept} modes to {sample.count} points "
            f"(condition {projection.condition_number:.3e} > {MAX_CONDITION:.0e})"
        )
    basis = projection.basis
    fitted, _, _, _ = np.linalg.lstsq(
        projection.restricted_modes, degraded.values, rcond=None
    )
    coefficients = np.zeros(basis.n_modes)
    coefficients[: projection.n_kept] = fitted
    signature = ModalSignature(
        basis=basis,
        coefficients=coefficients,
        condition_number=projection.condition_number,
    )
    full = DeviationField(
        sample=SampleSet.full(basis.geometry_ref, basis.node_count),
        values=basis.modes @ coefficients,
    )
    return signature, full


def synthesize_defect(
    basis: ModalBasis,
    complexity: int,
    rng: np.random.Generator,
    field_range: float | None = None,
) -> tuple[np.ndarray, DeviationField]:
    """Random defect on the first ``complexity`` modes, unit-order amplitudes.

    Coefficients are drawn uniform in [-1, 1]; when ``field_range`` is given
    the field is rescaled so its peak-to-valley range matches it.
    """
    n = basis.n_modes
    complexity = check_int(complexity, "complexity", minimum=1, maximum=n)
    coefficients = np.zeros(n)
    coefficients[:complexity] = rng.uniform(-1.0, 1.0, complexity)
    values = basis.modes @ coefficients
    if field_range is not None:
        field_range = check_scalar(field_range, "field_range", positive=True)
        spread = float(values.max() - values.min())
        if spread > 0.0:
            scale = field_range / spread
            coefficients = coefficients * scale
            values = values * scale
    field = DeviationField(
        sample=SampleSet.full(basis.geometry_ref, basis.node_count), values=values
    )
    return coefficients, field


@dataclass(frozen=True)
class SweepResult:
    """Mean RMS interpolation discrepancy per (complexity, sample count) cell."""

    complexities: tuple
    sample_counts: tuple
    rms_grid: np.ndarray
    se_grid: np.ndarray
    trials_per_cell: int
    rng_seed: int
    noise_sigma: float

    def __post_init__(self):
        object.__setattr__(self, "complexities", tuple(int(c) for c in self.complexities))
        object.__setattr__(self, "sample_counts", tuple(int(q) for q in self.sample_counts))
        object.__setattr__(self, "rms_grid", readonly(np.asarray(self.rms_grid, dtype=float)))
        object.__setattr__(self, "se_grid", readonly(np.asarray(self.se_grid, dtype=float)))
        shape = (len(self.complexities), len(self.sample_counts))
        if self.rms_grid.shape != shape or self.se_grid.shape != shape:
            raise InvalidParameterError(
                f"grid shape {self.rms_grid.shape} does not match axes {shape}"
            )

    def to_csv(self, path) -> None:
        lines = ["complexity,sample_count,rms_mm,trials"]
        for i, c in enumerate(self.complexities):
            for j, q in enumerate(self.sample_counts):
                rms = self.rms_grid[i, j]
                cell = "" if np.isnan(rms) else repr(float(rms))
                lines.append(f"{c},{q},{cell},{self.trials_per_cell}")
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("\n".join(lines) + "\n")

    def to_json(self) -> str:
        def _grid(grid):
            return [[None if np.isnan(v) else float(v) for v in row] for row in grid]

        return json.dumps(
            {
                "complexities": list(self.complexities),
                "sample_counts": list(self.sample_counts),
                "rms_grid": _grid(self.rms_grid),
                "se_grid": _grid(self.se_grid),
                "trials_per_cell": self.trials_per_cell,
                "rng_seed": self.rng_seed,
                "noise_sigma": self.noise_sigma,
            }
        )


def run_sweep(
    geometry: Geometry,
    basis: ModalBasis,
    complexities,
    sample_counts,
    trials: int,
    noise_sigma: float,
    seed: int,
    field_range: float | None = None,
    mode_margin: float = 1.25,
) -> SweepResult:
    """Simulate defects across a complexity x sampling-density grid.

    Every (complexity, sample count, trial) cell draws its own random stream
    from (seed, c, q, trial), so results do not depend on execution order.
    Each trial synthesizes a dense defect, degrades it to q farthest-point
    samples (plus optional Gaussian probing noise), interpolates, and records
    the RMS discrepancy against the dense field. Failed interpolations leave
    a missing (NaN) cell rather than aborting the sweep.

    ``mode_margin`` keeps some redundancy in each fit: at most q/mode_margin
    modes are fitted to q points. Square fits (margin 1.0) sit exactly at the
    minimum-point rule and go rank deficient once the mode count reaches what
    the sample can resolve; the default 25% margin stays clear of that edge
    without changing which defects are recoverable.
    """
    if geometry.ref != basis.geometry_ref:
        raise InvalidParameterError("sweep geometry and basis geometry differ")
    complexities = [check_int(c, "complexity", minimum=1, maximum=basis.n_modes) for c in complexities]
    sample_counts = [
        check_int(q, "sample_count", minimum=1, maximum=geometry.node_count)
        for q in sample_counts
    ]
    if not complexities or not sample_counts:
        raise InvalidParameterError("sweep axes must be non-empty")
    if any(np.diff(sample_counts) <= 0):
        raise InvalidParameterError("sample_counts must be strictly ascending")
    trials = check_int(trials, "trials", minimum=1)
    noise_sigma = check_scalar(noise_sigma, "noise_sigma", minimum=0.0)
    seed = check_seed(seed)
    mode_margin = check_scalar(mode_margin, "mode_margin", minimum=1.0)

    p = geometry.node_count
    rms_grid = np.full((len(complexities), len(sample_counts)), np.nan)
    se_grid = np.full_like(rms_grid, np.nan)
    failures = 0
    for i, c in enumerate(complexities):
        for j, q in enumerate(sample_counts):
            fit_cap = max(1, int(q / mode_margin))
            scores = []
            for t in range(trials):
                rng = np.random.default_rng([seed, c, q, t])
                _, dense = synthesize_defect(basis, c, rng, field_range)
                sample = uniform_subsample(geometry, q, seed=int(rng.integers(2**31)))
                measured = dense.values[sample.indices]
                if noise_sigma > 0.0:
                    measured = measured + rng.normal(0.0, noise_sigma, q)
                degraded = DeviationField(sample=sample, values=measured)
                try:
                    projection = build_degraded_projection(basis, sample, fit_cap)
                    _, full = interpolate(degraded, projection)
                except InterpolationFailureError as exc:
                    failures += 1
                    logger.warning("sweep cell (c=%d, q=%d, trial=%d) failed: %s", c, q, t, exc)
                    continue
                scores.append(float(np.linalg.norm(full.values - dense.values) / np.sqrt(p)))
            if scores:
                rms_grid[i, j] = np.mean(scores)
                se_grid[i, j] = (
                    np.std(scores, ddof=1) / np.sqrt(len(scores)) if len(scores) > 1 else 0.0
                )
    if failures:
        logger.warning("sweep finished with %d failed trial(s) marked missing", failures)
    return SweepResult(
        complexities=tuple(complexities),
        sample_counts=tuple(sample_counts),
        rms_grid=rms_grid,
        se_grid=se_grid,
        trials_per_cell=trials,
        rng_seed=seed,
        noise_sigma=noise_sigma,
    )


def write_case_csv(
    path,
    geometry: Geometry,
    interpolated: DeviationField,
    degraded: DeviationField,
    dense: DeviationField | None = None,
) -> None:
    """Per-case export: dense reference, degraded points, interpolated field.

    One row per geometry node; ``sampled`` marks the degraded measurement
    points, whose measured values appear in ``measured_mm``.
    """
    p = geometry.node_count
    sampled = np.zeros(p, dtype=bool)
    measured = np.full(p, np.nan)
    sampled[degraded.sample.indices] = True
    measured[degraded.sample.indices] = degraded.values

    lines = ["node_index,x_mm,y_mm,z_mm,sampled,measured_mm,interpolated_mm,dense_mm"]
    for i in range(p):
        x, y, z = geometry.nodes[i]
        cells = [
            str(i),
            repr(float(x)),
            repr(float(y)),
            repr(float(z)),
            "1" if sampled[i] else "0",
            repr(float(measured[i])) if sampled[i] else "",
            repr(float(interpolated.values[i])),
            repr(float(dense.values[i])) if dense is not None else "",
        ]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
