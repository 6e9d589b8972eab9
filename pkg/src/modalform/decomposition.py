"""Projection of measured deviation fields onto a modal basis.

Coefficients are obtained as the least-squares solution of ``Q lam = V`` via
an orthogonal factorization, never by forming the normal equations: the
result is identical for independent columns and the conditioning is that of
``Q`` itself. Mode numbers in the public API are 1-based, matching how modes
are counted on histograms and in reports.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .basis import NATURAL, RIGID, SIZE, ModalBasis
from .errors import InvalidParameterError, UndefinedCorrelationError, IllConditionedWarning
from .geometry import SampleSet
from .validation import check_choice, check_int, check_vector, readonly

#: Condition number above which decomposition attaches an ill-conditioning
#: warning (the result is still returned, with diagnostics).
CONDITION_WARN_THRESHOLD = 1e8

BANDS = ("position_orientation", "size", "form", "waviness")

#: Default 1-based cutoff (counted among natural modes) separating the form
#: band from the waviness band.
DEFAULT_FORM_CUTOFF = 15


@dataclass(frozen=True)
class DeviationField:
    """Scalar deviations along node normals over a (possibly partial) sample."""

    sample: SampleSet
    values: np.ndarray

    def __post_init__(self):
        values = check_vector(self.values, "values", length=self.sample.count)
        object.__setattr__(self, "values", readonly(values))

    @property
    def geometry_ref(self) -> str:
        return self.sample.geometry_ref


@dataclass(frozen=True)
class ModalSignature:
    """Coefficient vector of a deviation field in a modal basis."""

    basis: ModalBasis
    coefficients: np.ndarray
    condition_number: float

    def __post_init__(self):
        coeff = check_vector(self.coefficients, "coefficients", length=self.basis.n_modes)
        object.__setattr__(self, "coefficients", readonly(coeff))

    @property
    def basis_ref(self) -> str:
        return self.basis.ref

    @property
    def n_modes(self) -> int:
        return self.coefficients.shape[0]

    def to_json(self, e_curve: np.ndarray | None = None) -> str:
        payload = {
            "basis_ref": self.basis_ref,
            "condition_number": self.condition_number,
            "coefficients": self.coefficients.tolist(),
        }
        if e_curve is not None:
            payload["e_curve"] = np.asarray(e_curve, dtype=float).tolist()
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str, basis: ModalBasis) -> "ModalSignature":
        payload = json.loads(text)
        if payload.get("basis_ref") != basis.ref:
            raise InvalidParameterError(
                f"signature was computed on basis {payload.get('basis_ref')!r}, "
                f"not on {basis.ref!r}"
            )
        return cls(
            basis=basis,
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            condition_number=float(payload.get("condition_number", 0.0)),
        )


@dataclass(frozen=True)
class ResidualReport:
    """Residual field and the RMS-vs-reconstruction-rank curve."""

    residual_field: DeviationField
    e_curve: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "e_curve", readonly(np.asarray(self.e_curve, dtype=float)))


def _require_full_sample(field: DeviationField, basis: ModalBasis, op: str) -> None:
    if field.geometry_ref != basis.geometry_ref:
        raise InvalidParameterError(
            f"{op}: field is over geometry {field.geometry_ref!r}, "
            f"basis over {basis.geometry_ref!r}"
        )
    if not field.sample.is_full:
        raise InvalidParameterError(
            f"{op}: needs a full-sample field, got {field.sample.count} of "
            f"{field.sample.node_count} nodes"
        )
    if field.sample.node_count != basis.node_count:
        raise InvalidParameterError(
            f"{op}: field has {field.sample.node_count} nodes, basis has {basis.node_count}"
        )


def decompose(field: DeviationField, basis: ModalBasis) -> ModalSignature:
    """Least-squares coefficients of a full-sample field in the basis.

    The coefficients are unique because the basis columns are independent.
    A condition number above 1e8 attaches an :class:`IllConditionedWarning`;
    the signature is still returned with the condition number recorded.
    """
    _require_full_sample(field, basis, "decompose")
    coeff, _, _, singular = np.linalg.lstsq(basis.modes, field.values, rcond=None)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")
    if condition > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"projection system condition number {condition:.3e} exceeds "
            f"{CONDITION_WARN_THRESHOLD:.0e}; coefficients may be unreliable",
            IllConditionedWarning,
            stacklevel=2,
        )
    return ModalSignature(basis=basis, coefficients=coeff, condition_number=condition)


def _mode_indices(signature: ModalSignature, mode_numbers) -> np.ndarray:
    if mode_numbers is None:
        return np.arange(signature.n_modes)
    idx = np.asarray(sorted(set(int(m) for m in mode_numbers)), dtype=np.intp)
    if idx.size and (idx[0] < 1 or idx[-1] > signature.n_modes):
        raise InvalidParameterError(
            f"mode numbers must lie in [1, {signature.n_modes}], got "
            f"[{idx[0]}, {idx[-1]}]"
        )
    return idx - 1


def reconstruct(signature: ModalSignature, mode_numbers=None) -> DeviationField:
    """Sum the selected modes weighted by their coefficients.

    ``mode_numbers`` is a set of 1-based mode numbers; ``None`` selects all
    modes and an empty selection returns the zero field.
    """
    basis = signature.basis
    idx = _mode_indices(signature, mode_numbers)
    if idx.size:
        values = basis.modes[:, idx] @ signature.coefficients[idx]
    else:
        values = np.zeros(basis.node_count)
    sample = SampleSet.full(basis.geometry_ref, basis.node_count)
    return DeviationField(sample=sample, values=values)


def residual_report(field: DeviationField, signature: ModalSignature) -> ResidualReport:
    """Residual field for the given signature and the prefix-refit RMS curve.

    ``e_curve[m-1]`` is the RMS residual (deviation 2-norm over sqrt of the
    node count) after least-squares fitting the first m columns only. Each
    prefix is refitted, so the curve is non-increasing even though the basis
    is not orthogonal.
    """
    basis = signature.basis
    _require_full_sample(field, basis, "residual_report")
    residual = field.values - reconstruct(signature).values

    ortho, _ = np.linalg.qr(basis.modes)
    projections = ortho.T @ field.values
    captured = np.cumsum(projections**2)
    total = float(field.values @ field.values)
    p = basis.node_count
    e_curve = np.sqrt(np.maximum(total - captured, 0.0) / p)

    residual_field = DeviationField(
        sample=SampleSet.full(basis.geometry_ref, p), values=residual
    )
    return ResidualReport(residual_field=residual_field, e_curve=e_curve)


def pearson_correlation(sig_a: ModalSignature, sig_b: ModalSignature) -> float:
    """Pearson correlation between two signatures' coefficient vectors."""
    a = sig_a.coefficients
    b = sig_b.coefficients
    if a.shape != b.shape:
        raise InvalidParameterError(
            f"signatures have different lengths ({a.shape[0]} vs {b.shape[0]})"
        )
    a = a - a.mean()
    b = b - b.mean()
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant signature")
    return float(np.clip((a @ b) / norm, -1.0, 1.0))


def band_filter(signature: ModalSignature, band: str, form_cutoff: int = DEFAULT_FORM_CUTOFF) -> list:
    """1-based mode numbers belonging to a deviation band.

    ``position_orientation`` selects the rigid-tagged modes, ``size`` the
    size-tagged ones; the natural modes split into ``form`` (the first
    ``form_cutoff`` of them) and ``waviness`` (the rest). The four bands
    partition the basis.
    """
    check_choice(band, "band", BANDS)
    check_int(form_cutoff, "form_cutoff", minimum=0)
    classes = signature.basis.mode_class
    if band == "position_orientation":
        return [i + 1 for i, cls in enumerate(classes) if cls == RIGID]
    if band == "size":
        return [i + 1 for i, cls in enumerate(classes) if cls == SIZE]
    naturals = [i + 1 for i, cls in enumerate(classes) if cls == NATURAL]
    if band == "form":
        return naturals[:form_cutoff]
    return naturals[form_cutoff:]


def significant_modes(signature: ModalSignature, k: int) -> list:
    """The k largest-magnitude coefficients' mode numbers, descending.

    Ties resolve to the lower mode number.
    """
    k = check_int(k, "k", minimum=0, maximum=signature.n_modes)
    magnitudes = np.abs(signature.coefficients)
    order = sorted(range(signature.n_modes), key=lambda i: (-magnitudes[i], i))
    return [i + 1 for i in order[:k]]


def write_signature_csv(signature: ModalSignature, path) -> None:
    """CSV export (one row per mode): the data behind coefficient histograms."""
    basis = signature.basis
    lines = ["mode_index,class,eigenvalue,lambda_mm"]
    for i in range(signature.n_modes):
        lines.append(
            f"{i + 1},{basis.mode_class[i]},{float(basis.eigenvalues[i])!r},"
            f"{float(signature.coefficients[i])!r}"
        )
    _write_lines(path, lines)


def write_e_curve_csv(report: ResidualReport, path) -> None:
    """CSV export of the residual-vs-rank curve."""
    lines = ["mode_count,e_mm"]
    for m, value in enumerate(report.e_curve, start=1):
        lines.append(f"{m},{float(value)!r}")
    _write_lines(path, lines)


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
