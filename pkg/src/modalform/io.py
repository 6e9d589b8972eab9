"""Measurement file formats: deviation-field CSV and point-cloud ingestion."""

from __future__ import annotations

import csv
import warnings

import numpy as np
from scipy.spatial import cKDTree

from .decomposition import DeviationField
from .errors import IngestionError, InvalidParameterError
from .geometry import Geometry, SampleSet


def write_field_csv(field: DeviationField, path) -> None:
    """One row per sampled node: ``node_index,deviation_mm``."""
    lines = ["node_index,deviation_mm"]
    for idx, value in zip(field.sample.indices, field.values):
        lines.append(f"{int(idx)},{float(value)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def ingest_point_cloud(path, geometry: Geometry) -> DeviationField:
    """Read a measurement CSV and express it as deviations at geometry nodes.

    Two row formats are accepted (detected from the column count):

    * ``node_index, deviation_mm`` - taken verbatim;
    * ``x, y, z`` - matched to the nearest geometry node and converted to the
      signed normal deviation ``(measured - nominal) . normal``; points
      farther than half the local node spacing from every node are rejected.

    Duplicate rows for one node keep the last value and raise a warning with
    the duplicate count.

    Raises
    ------
    IngestionError
        On unmatched or malformed rows; the message lists the row numbers.
    InvalidParameterError
        If the file holds no data rows.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for line_no, record in enumerate(csv.reader(handle), start=1):
            cells = [cell.strip() for cell in record if cell.strip() != ""]
            if not cells:
                continue
            rows.append((line_no, cells))
    if rows and not _all_numeric(rows[0][1]):
        rows = rows[1:]  # header row
    if not rows:
        raise InvalidParameterError(f"{path}: no data rows")

    width = len(rows[0][1])
    if width not in (2, 3):
        raise IngestionError(
            f"{path}: row {rows[0][0]} has {width} columns, expected 2 or 3"
        )
    malformed = [line for line, cells in rows if len(cells) != width or not _all_numeric(cells)]
    if malformed:
        raise IngestionError(f"{path}: malformed rows {malformed}")

    data = np.array([[float(cell) for cell in cells] for _, cells in rows])
    lines = np.array([line for line, _ in rows])
    if width == 2:
        return _from_indexed(data, lines, geometry, path)
    return _from_xyz(data, lines, geometry, path)


def _all_numeric(cells) -> bool:
    try:
        [float(cell) for cell in cells]
    except ValueError:
        return False
    return True


def _from_indexed(data, lines, geometry, path) -> DeviationField:
    indices = data[:, 0]
    rounded = np.rint(indices).astype(np.intp)
    bad = np.nonzero(
        (np.abs(indices - rounded) > 0) | (rounded < 0) | (rounded >= geometry.node_count)
    )[0]
    if bad.size:
        raise IngestionError(f"{path}: invalid node indices on rows {lines[bad].tolist()}")
    return _collapse(rounded, data[:, 1], geometry, path)


def _from_xyz(data, lines, geometry, path) -> DeviationField:
    spacing = geometry.local_spacing()
    dist, nearest = cKDTree(geometry.nodes).query(data)
    unmatched = np.nonzero(dist > 0.5 * spacing[nearest])[0]
    if unmatched.size:
        raise IngestionError(
            f"{path}: {unmatched.size} point(s) match no geometry node "
            f"(rows {lines[unmatched].tolist()})"
        )
    offsets = data - geometry.nodes[nearest]
    deviations = np.einsum("ij,ij->i", offsets, geometry.normals[nearest])
    return _collapse(nearest.astype(np.intp), deviations, geometry, path)


def _collapse(node_indices, values, geometry, path) -> DeviationField:
    """Sort by node, keep the last value per node, warn about duplicates."""
    duplicates = node_indices.shape[0] - np.unique(node_indices).shape[0]
    if duplicates:
        warnings.warn(
            f"{path}: {duplicates} duplicate node row(s), keeping the last value",
            UserWarning,
            stacklevel=3,
        )
    # stable sort keeps file order within a node; the last entry wins
    order = np.argsort(node_indices, kind="stable")
    sorted_idx = node_indices[order]
    sorted_val = values[order]
    last = np.nonzero(np.r_[sorted_idx[1:] != sorted_idx[:-1], True])[0]
    sample = SampleSet.of_geometry(geometry, sorted_idx[last])
    return DeviationField(sample=sample, values=sorted_val[last])
