"""Scikit-learn style estimators wrapping the decomposition machinery.

Deviation fields are plain feature vectors of length p (one deviation per
geometry node), so the modal projection is a linear transformer and sparse
interpolation is a regressor from node indices to deviations. Both follow
the sklearn contract (``get_params``/``set_params``, fitted attributes with
trailing underscores) and compose with pipelines and model selection.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .basis import EUCLIDEAN, INFINITY, ModalBasis, compute_modal_basis
from .decomposition import (
    DEFAULT_FORM_CUTOFF,
    DeviationField,
    ModalSignature,
    band_filter,
    decompose,
)
from .errors import InvalidParameterError
from .geometry import Geometry, SampleSet
from .interpolation import build_degraded_projection, interpolate
from .validation import check_choice, check_int


def _check_fitted(estimator, attribute: str):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first"
        )


class ModalDecomposer(TransformerMixin, BaseEstimator):
    """Transformer from deviation fields to modal coefficients.

    Fitting computes a modal basis on the nominal geometry: the first
    ``n_modes`` eigenmodes of its structural operators, optionally enriched
    with the rigid-body and size fields and re-normalized so every mode peaks
    at 1 (coefficients then read directly in mm).

    Parameters
    ----------
    n_modes : int
        Number of basis columns to keep (complexity-ordered).
    enrich : bool
        Prepend rigid/size fields and subtract them from the natural modes.
    norm_kind : str
        ``"infinity"`` (metric coefficients) or ``"euclidean"``.
    form_cutoff : int
        Natural-mode count of the form band, used by :meth:`mode_band`.
    """

    def __init__(
        self,
        n_modes: int = 50,
        enrich: bool = True,
        norm_kind: str = INFINITY,
        form_cutoff: int = DEFAULT_FORM_CUTOFF,
    ):
        self.n_modes = n_modes
        self.enrich = enrich
        self.norm_kind = norm_kind
        self.form_cutoff = form_cutoff

    def fit(self, geometry: Geometry, y=None):
        """Compute the modal basis of a nominal geometry."""
        if not isinstance(geometry, Geometry):
            raise InvalidParameterError(
                f"fit expects a Geometry, got {type(geometry).__name__}"
            )
        check_int(self.n_modes, "n_modes", minimum=1, maximum=geometry.node_count)
        check_choice(self.norm_kind, "norm_kind", (EUCLIDEAN, INFINITY))
        self.basis_ = compute_modal_basis(
            geometry, self.n_modes, enrich=bool(self.enrich), norm_kind=self.norm_kind
        )
        self.geometry_ = geometry
        self.n_modes_ = self.basis_.n_modes
        self.eigenvalues_ = self.basis_.eigenvalues
        self.mode_class_ = list(self.basis_.mode_class)
        return self

    def transform(self, X) -> np.ndarray:
        """Rows of deviations (n_fields, p) to coefficients (n_fields, n)."""
        _check_fitted(self, "basis_")
        fields = np.atleast_2d(np.asarray(X, dtype=float))
        if fields.shape[1] != self.basis_.node_count:
            raise InvalidParameterError(
                f"fields have {fields.shape[1]} values, geometry has "
                f"{self.basis_.node_count} nodes"
            )
        coefficients, _, _, _ = np.linalg.lstsq(self.basis_.modes, fields.T, rcond=None)
        return coefficients.T

    def inverse_transform(self, X, mode_numbers=None) -> np.ndarray:
        """Coefficients back to full deviation fields, optionally band-limited."""
        _check_fitted(self, "basis_")
        coefficients = np.atleast_2d(np.asarray(X, dtype=float))
        if coefficients.shape[1] != self.n_modes_:
            raise InvalidParameterError(
                f"expected {self.n_modes_} coefficients per row, got {coefficients.shape[1]}"
            )
        if mode_numbers is not None:
            keep = np.zeros(self.n_modes_, dtype=bool)
            for number in mode_numbers:
                idx = check_int(number, "mode number", minimum=1, maximum=self.n_modes_)
                keep[idx - 1] = True
            coefficients = np.where(keep, coefficients, 0.0)
        return coefficients @ self.basis_.modes.T

    def decompose(self, values) -> ModalSignature:
        """Domain-level projection of a single full-sample field."""
        _check_fitted(self, "basis_")
        sample = SampleSet.full(self.basis_.geometry_ref, self.basis_.node_count)
        return decompose(DeviationField(sample=sample, values=values), self.basis_)

    def mode_band(self, band: str) -> list:
        """1-based mode numbers of a deviation band for the fitted basis."""
        _check_fitted(self, "basis_")
        zero = ModalSignature(
            basis=self.basis_,
            coefficients=np.zeros(self.n_modes_),
            condition_number=1.0,
        )
        return band_filter(zero, band, form_cutoff=self.form_cutoff)


class SparseFieldInterpolator(RegressorMixin, BaseEstimator):
    """Regressor predicting full-field deviations from sparse probed nodes.

    Fits the least complex basis modes to the measured points (never more
    modes than points) and predicts the reconstruction at any node index.

    Parameters
    ----------
    basis : ModalBasis
        Infinity-normed basis over the measured geometry.
    max_modes : int or None
        Cap on the fitted mode count; defaults to the basis size.
    """

    def __init__(self, basis: ModalBasis | None = None, max_modes: int | None = None):
        self.basis = basis
        self.max_modes = max_modes

    def fit(self, X, y):
        """Fit to measured deviations ``y`` at node indices ``X``."""
        if self.basis is None:
            raise InvalidParameterError("SparseFieldInterpolator needs a basis")
        indices = np.asarray(X, dtype=np.intp).reshape(-1)
        values = np.asarray(y, dtype=float).reshape(-1)
        if indices.shape != values.shape:
            raise InvalidParameterError(
                f"X and y must have equal length, got {indices.shape[0]} and {values.shape[0]}"
            )
        order = np.argsort(indices)
        sample = SampleSet(self.basis.geometry_ref, self.basis.node_count, indices[order])
        degraded = DeviationField(sample=sample, values=values[order])
        projection = build_degraded_projection(self.basis, sample, self.max_modes)
        signature, full = interpolate(degraded, projection)
        self.signature_ = signature
        self.coef_ = signature.coefficients
        self.field_ = full
        self.condition_number_ = projection.condition_number
        self.n_modes_fitted_ = projection.n_kept
        return self

    def predict(self, X=None) -> np.ndarray:
        """Interpolated deviations at node indices ``X`` (default: all nodes)."""
        _check_fitted(self, "field_")
        if X is None:
            return self.field_.values.copy()
        indices = np.asarray(X, dtype=np.intp).reshape(-1)
        if indices.size and (indices.min() < 0 or indices.max() >= self.field_.values.shape[0]):
            raise InvalidParameterError("node indices out of range")
        return self.field_.values[indices]
