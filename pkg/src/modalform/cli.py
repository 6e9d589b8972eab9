"""Command-line pipeline: plan, simulate, basis, decompose, reconstruct,
interpolate, sweep.

Every subcommand reads one :class:`PipelineConfig` (JSON file via ``--config``
plus per-flag overrides), writes its artifact files into ``--out-dir`` and
exits 0. Exit codes: 2 malformed configuration or input data, 3 numerical
failure, 4 I/O failure. All randomness is seeded from the configuration, so
reruns produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import io as mfio
from .basis import INFINITY, ModalBasis, compute_modal_basis
from .decomposition import (
    DEFAULT_FORM_CUTOFF,
    ModalSignature,
    band_filter,
    decompose,
    reconstruct,
    residual_report,
    write_e_curve_csv,
    write_signature_csv,
)
from .errors import (
    AssemblyError,
    ConfigError,
    EigenSolverError,
    IngestionError,
    InterpolationFailureError,
    InvalidBasisError,
    InvalidParameterError,
    ModalFormError,
    UndefinedCorrelationError,
)
from .geometry import (
    PROFILE_1D,
    SPHERICAL_CAP,
    Geometry,
    build_profile,
    build_spherical_cap,
    uniform_subsample,
)
from .interpolation import (
    build_degraded_projection,
    interpolate,
    run_sweep,
    synthesize_defect,
    write_case_csv,
)
from .planning import MeasurementPlan, emit_dmis, plan_probe_path, simulate_probing

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "plan",
    "basis",
    "simulate",
    "decompose",
    "reconstruct",
    "interpolate",
    "sweep",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_CONFIG_ERRORS = (
    ConfigError,
    InvalidParameterError,
    IngestionError,
    InvalidBasisError,
    AssemblyError,
)
_NUMERICAL_ERRORS = (
    EigenSolverError,
    InterpolationFailureError,
    UndefinedCorrelationError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


@dataclass
class GeometryConfig:
    kind: str = SPHERICAL_CAP
    radius: float = 1.0
    half_angle: float = float(np.pi / 2)
    length: float = 10.0
    node_count: int = 321


@dataclass
class BasisConfig:
    n_modes: int = 50
    enrich: bool = True
    norm_kind: str = INFINITY
    form_cutoff: int = DEFAULT_FORM_CUTOFF


@dataclass
class SamplingConfig:
    q: int | None = None
    seed: int = 0
    method: str = "nn_plus_2opt"


@dataclass
class SimulateConfig:
    noise_sigma: float = 0.0
    seed: int = 0
    complexity: int = 10
    field_range: float | None = None
    truth: str | None = None


@dataclass
class InterpolateConfig:
    max_modes: int | None = None
    truth: str | None = None


@dataclass
class SweepConfig:
    complexities: list = field(default_factory=lambda: list(range(3, 61, 3)))
    sample_counts: list = field(default_factory=lambda: list(range(10, 251, 10)))
    trials: int = 2
    noise_sigma: float = 0.0
    seed: int = 0
    field_range: float | None = None
    mode_margin: float = 1.25


@dataclass
class IOConfig:
    out_dir: str = "."
    measurement: str | None = None
    plan_file: str | None = None
    basis_file: str | None = None
    signature: str | None = None
    feature_name: str = "FEATURE1"
    band: str | None = None
    modes: list | None = None


@dataclass
class PipelineConfig:
    """Aggregated configuration for every subcommand."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    interpolate: InterpolateConfig = field(default_factory=InterpolateConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    io: IOConfig = field(default_factory=IOConfig)

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        if not isinstance(payload, dict):
            raise ConfigError(f"config root must be an object, got {type(payload).__name__}")
        config = cls()
        sections = {f.name: f for f in dataclasses.fields(cls)}
        for section_name, section_payload in payload.items():
            if section_name not in sections:
                raise ConfigError(f"unknown config section {section_name!r}")
            section = getattr(config, section_name)
            known = {f.name for f in dataclasses.fields(section)}
            if not isinstance(section_payload, dict):
                raise ConfigError(f"config section {section_name!r} must be an object")
            for key, value in section_payload.items():
                if key not in known:
                    raise ConfigError(f"unknown config key {section_name}.{key}")
                setattr(section, key, value)
        return config

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return PipelineConfig.from_dict(payload)


def build_geometry(config: GeometryConfig) -> Geometry:
    if config.kind == PROFILE_1D:
        return build_profile(config.length, config.node_count)
    if config.kind == SPHERICAL_CAP:
        return build_spherical_cap(config.radius, config.half_angle, config.node_count)
    raise ConfigError(f"geometry.kind must be {PROFILE_1D!r} or {SPHERICAL_CAP!r}, got {config.kind!r}")


def _out_path(config: PipelineConfig, name: str) -> str:
    os.makedirs(config.io.out_dir, exist_ok=True)
    return os.path.join(config.io.out_dir, name)


def _check_distinct(paths: list) -> None:
    normalized = [os.path.abspath(p) for p in paths if p]
    if len(set(normalized)) != len(normalized):
        raise ConfigError(f"configured paths must be distinct, got {sorted(normalized)}")


def _load_basis(config: PipelineConfig, geometry: Geometry) -> ModalBasis:
    if config.io.basis_file:
        with open(config.io.basis_file, "r", encoding="utf-8") as handle:
            basis = ModalBasis.from_json(handle.read())
        if basis.geometry_ref != geometry.ref:
            raise InvalidParameterError(
                f"basis file {config.io.basis_file} was computed on geometry "
                f"{basis.geometry_ref!r}, configured geometry is {geometry.ref!r}"
            )
        return basis
    return compute_modal_basis(
        geometry,
        config.basis.n_modes,
        enrich=bool(config.basis.enrich),
        norm_kind=config.basis.norm_kind,
    )


def _sample_for(config: PipelineConfig, geometry: Geometry):
    if config.sampling.q is None:
        return None
    return uniform_subsample(geometry, config.sampling.q, config.sampling.seed)


def _read_measurement(config: PipelineConfig, geometry: Geometry, default: str):
    path = config.io.measurement or os.path.join(config.io.out_dir, default)
    return mfio.ingest_point_cloud(path, geometry), path


def cmd_plan(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    plan = plan_probe_path(geometry, _sample_for(config, geometry), config.sampling.method)
    dmis_path = _out_path(config, f"{config.io.feature_name}.dms")
    plan_path = _out_path(config, "plan.json")
    _check_distinct([dmis_path, plan_path])
    with open(dmis_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(emit_dmis(plan, config.io.feature_name))
    with open(plan_path, "w", encoding="utf-8") as handle:
        handle.write(plan.to_json())
    logger.info(
        "planned %d points, tour length %.3f mm -> %s", plan.point_count, plan.tour_length, dmis_path
    )
    return EXIT_OK


def cmd_basis(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    basis = compute_modal_basis(
        geometry,
        config.basis.n_modes,
        enrich=bool(config.basis.enrich),
        norm_kind=config.basis.norm_kind,
    )
    path = _out_path(config, "basis.json")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(basis.to_json())
    logger.info("basis with %d modes -> %s", basis.n_modes, path)
    return EXIT_OK


def cmd_simulate(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    plan_path = config.io.plan_file or os.path.join(config.io.out_dir, "plan.json")
    with open(plan_path, "r", encoding="utf-8") as handle:
        plan = MeasurementPlan.from_json(handle.read())
    if config.simulate.truth:
        truth = mfio.ingest_point_cloud(config.simulate.truth, geometry)
    else:
        basis = _load_basis(config, geometry)
        rng = np.random.default_rng([config.simulate.seed, 1])
        _, truth = synthesize_defect(
            basis, config.simulate.complexity, rng, config.simulate.field_range
        )
    measured = simulate_probing(
        plan, truth, config.simulate.noise_sigma, config.simulate.seed
    )
    truth_path = _out_path(config, "truth.csv")
    measurement_path = _out_path(config, "measurement.csv")
    _check_distinct([truth_path, measurement_path, plan_path, config.simulate.truth])
    mfio.write_field_csv(truth, truth_path)
    mfio.write_field_csv(measured, measurement_path)
    logger.info("simulated %d probed points -> %s", measured.sample.count, measurement_path)
    return EXIT_OK


def cmd_decompose(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    basis = _load_basis(config, geometry)
    field_, measurement_path = _read_measurement(config, geometry, "measurement.csv")
    signature = decompose(field_, basis)
    report = residual_report(field_, signature)
    signature_csv = _out_path(config, "signature.csv")
    e_curve_csv = _out_path(config, "e_curve.csv")
    signature_json = _out_path(config, "signature.json")
    _check_distinct([signature_csv, e_curve_csv, signature_json, measurement_path])
    write_signature_csv(signature, signature_csv)
    write_e_curve_csv(report, e_curve_csv)
    with open(signature_json, "w", encoding="utf-8") as handle:
        handle.write(signature.to_json(e_curve=report.e_curve))
    logger.info(
        "decomposed %d-node field into %d coefficients (condition %.3e)",
        field_.sample.count, signature.n_modes, signature.condition_number,
    )
    return EXIT_OK


def cmd_reconstruct(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    basis = _load_basis(config, geometry)
    signature_path = config.io.signature or os.path.join(config.io.out_dir, "signature.json")
    with open(signature_path, "r", encoding="utf-8") as handle:
        signature = ModalSignature.from_json(handle.read(), basis)
    mode_numbers = None
    if config.io.band is not None and config.io.modes is not None:
        raise ConfigError("set io.band or io.modes, not both")
    if config.io.band is not None:
        mode_numbers = band_filter(signature, config.io.band, config.basis.form_cutoff)
    elif config.io.modes is not None:
        mode_numbers = [int(m) for m in config.io.modes]
    field_ = reconstruct(signature, mode_numbers)
    path = _out_path(config, "reconstruction.csv")
    _check_distinct([path, signature_path])
    mfio.write_field_csv(field_, path)
    logger.info("reconstructed %s -> %s", config.io.band or "all modes", path)
    return EXIT_OK


def cmd_interpolate(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    basis = _load_basis(config, geometry)
    degraded, measurement_path = _read_measurement(config, geometry, "measurement.csv")
    projection = build_degraded_projection(basis, degraded.sample, config.interpolate.max_modes)
    signature, full = interpolate(degraded, projection)
    dense = None
    if config.interpolate.truth:
        dense = mfio.ingest_point_cloud(config.interpolate.truth, geometry)
        if not dense.sample.is_full:
            raise InvalidParameterError("interpolate.truth must cover every node")
    case_csv = _out_path(config, "interpolation.csv")
    signature_json = _out_path(config, "interp_signature.json")
    _check_distinct([case_csv, signature_json, measurement_path, config.interpolate.truth])
    write_case_csv(case_csv, geometry, full, degraded, dense)
    with open(signature_json, "w", encoding="utf-8") as handle:
        handle.write(signature.to_json())
    logger.info(
        "interpolated %d modes from %d points (condition %.3e) -> %s",
        projection.n_kept, degraded.sample.count, projection.condition_number, case_csv,
    )
    return EXIT_OK


def cmd_sweep(config: PipelineConfig) -> int:
    geometry = build_geometry(config.geometry)
    basis = _load_basis(config, geometry)
    result = run_sweep(
        geometry,
        basis,
        config.sweep.complexities,
        config.sweep.sample_counts,
        config.sweep.trials,
        config.sweep.noise_sigma,
        config.sweep.seed,
        config.sweep.field_range,
        config.sweep.mode_margin,
    )
    csv_path = _out_path(config, "sweep.csv")
    json_path = _out_path(config, "sweep.json")
    _check_distinct([csv_path, json_path])
    result.to_csv(csv_path)
    with open(json_path, "w", encoding="utf-8") as handle:
        handle.write(result.to_json())
    logger.info(
        "swept %d x %d grid, %d trials/cell -> %s",
        len(result.complexities), len(result.sample_counts), result.trials_per_cell, csv_path,
    )
    return EXIT_OK


_COMMANDS = {
    "plan": cmd_plan,
    "basis": cmd_basis,
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "reconstruct": cmd_reconstruct,
    "interpolate": cmd_interpolate,
    "sweep": cmd_sweep,
}


def run_subcommand(name: str, config: PipelineConfig) -> int:
    """Run one pipeline stage; returns the process exit status."""
    if name not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {name!r}; choose from {SUBCOMMANDS}")
    return _COMMANDS[name](config)


def _parse_int_list(text: str) -> list:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline configuration file")
    common.add_argument("--out-dir", dest="out_dir", help="artifact output directory")
    geo = common.add_argument_group("geometry")
    geo.add_argument("--kind", choices=[PROFILE_1D, SPHERICAL_CAP])
    geo.add_argument("--radius", type=float)
    geo.add_argument("--half-angle", dest="half_angle", type=float)
    geo.add_argument("--length", type=float)
    geo.add_argument("--node-count", dest="node_count", type=int)
    bas = common.add_argument_group("basis")
    bas.add_argument("--n-modes", dest="n_modes", type=int)
    bas.add_argument("--enrich", dest="enrich", action=argparse.BooleanOptionalAction, default=None)
    bas.add_argument("--norm", dest="norm_kind", choices=["euclidean", "infinity"])
    bas.add_argument("--form-cutoff", dest="form_cutoff", type=int)
    bas.add_argument("--basis-file", dest="basis_file")

    parser = argparse.ArgumentParser(
        prog="modalform",
        description="Modal characterization of measured surface deviations.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    plan = sub.add_parser("plan", parents=[common], help="probe tour + DMIS program")
    plan.add_argument("--q", type=int, help="subsample to q probe points (default: all nodes)")
    plan.add_argument("--sample-seed", dest="sample_seed", type=int)
    plan.add_argument("--method", choices=["as_given", "nearest_neighbor", "nn_plus_2opt"])
    plan.add_argument("--feature-name", dest="feature_name")

    sub.add_parser("basis", parents=[common], help="modal basis JSON")

    sim = sub.add_parser("simulate", parents=[common], help="virtual probing of a plan")
    sim.add_argument("--plan-file", dest="plan_file")
    sim.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    sim.add_argument("--sim-seed", dest="sim_seed", type=int)
    sim.add_argument("--complexity", type=int)
    sim.add_argument("--field-range", dest="field_range", type=float)
    sim.add_argument("--truth", help="dense truth CSV instead of a synthetic defect")

    dec = sub.add_parser("decompose", parents=[common], help="signature of a measurement")
    dec.add_argument("--measurement")

    rec = sub.add_parser("reconstruct", parents=[common], help="field from a signature")
    rec.add_argument("--signature")
    rec.add_argument(
        "--band", choices=["position_orientation", "size", "form", "waviness"]
    )
    rec.add_argument("--modes", type=_parse_int_list, help="explicit 1-based mode numbers")

    itp = sub.add_parser("interpolate", parents=[common], help="full field from sparse points")
    itp.add_argument("--measurement")
    itp.add_argument("--max-modes", dest="max_modes", type=int)
    itp.add_argument("--truth", help="dense reference CSV for the case export")

    swp = sub.add_parser("sweep", parents=[common], help="density x complexity simulation grid")
    swp.add_argument("--complexities", type=_parse_int_list)
    swp.add_argument("--sample-counts", dest="sample_counts", type=_parse_int_list)
    swp.add_argument("--trials", type=int)
    swp.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    swp.add_argument("--sweep-seed", dest="sweep_seed", type=int)
    swp.add_argument("--field-range", dest="field_range", type=float)
    swp.add_argument("--mode-margin", dest="mode_margin", type=float)

    return parser


_OVERRIDE_MAP = {
    "out_dir": ("io", "out_dir"),
    "kind": ("geometry", "kind"),
    "radius": ("geometry", "radius"),
    "half_angle": ("geometry", "half_angle"),
    "length": ("geometry", "length"),
    "node_count": ("geometry", "node_count"),
    "n_modes": ("basis", "n_modes"),
    "enrich": ("basis", "enrich"),
    "norm_kind": ("basis", "norm_kind"),
    "form_cutoff": ("basis", "form_cutoff"),
    "basis_file": ("io", "basis_file"),
    "q": ("sampling", "q"),
    "sample_seed": ("sampling", "seed"),
    "method": ("sampling", "method"),
    "feature_name": ("io", "feature_name"),
    "plan_file": ("io", "plan_file"),
    "noise_sigma": (None, "noise_sigma"),  # resolved per subcommand
    "sim_seed": ("simulate", "seed"),
    "complexity": ("simulate", "complexity"),
    "field_range": (None, "field_range"),  # resolved per subcommand
    "truth": (None, "truth"),  # resolved per subcommand
    "measurement": ("io", "measurement"),
    "signature": ("io", "signature"),
    "band": ("io", "band"),
    "modes": ("io", "modes"),
    "max_modes": ("interpolate", "max_modes"),
    "complexities": ("sweep", "complexities"),
    "sample_counts": ("sweep", "sample_counts"),
    "trials": ("sweep", "trials"),
    "sweep_seed": ("sweep", "seed"),
    "mode_margin": ("sweep", "mode_margin"),
}

_PER_SUBCOMMAND_SECTION = {
    "simulate": "simulate",
    "sweep": "sweep",
    "interpolate": "interpolate",
}


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace, subcommand: str) -> None:
    for key, value in vars(args).items():
        if key in ("config", "subcommand") or value is None:
            continue
        if key not in _OVERRIDE_MAP:
            continue
        section_name, field_name = _OVERRIDE_MAP[key]
        if section_name is None:
            section_name = _PER_SUBCOMMAND_SECTION.get(subcommand)
            if section_name is None:
                continue
        setattr(getattr(config, section_name), field_name, value)


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("MODALFORM_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        _apply_overrides(config, args, args.subcommand)
        return run_subcommand(args.subcommand, config)
    except _CONFIG_ERRORS as exc:
        print(f"modalform {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"modalform {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"modalform {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModalFormError as exc:  # anything else from this package
        print(f"modalform {args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
