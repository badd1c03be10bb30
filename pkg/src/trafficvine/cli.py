"""Command-line front end: extract, tau, fit, sample, density, rosenblatt."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import traffic
from .bicop import DomainError, Family
from .dependence import (
    DataMatrix,
    Scale,
    ZeroVarianceError,
    combined_table,
    correlation_matrix,
)
from .svgplot import scatter_matrix_svg
from .traffic import ExtractConfig, GeometryError, RoundaboutGeometry
from .vine import (
    ModelFormatError,
    NonFiniteDensityError,
    fit_vine,
    load_model,
    log_density,
    log_density_u,
    rosenblatt,
    sample,
    save_model,
)

log = logging.getLogger("trafficvine")

#: parameter columns in the variable order used for vine node numbering
PARAM_COLUMNS = ("TrafficCar", "VelCar", "WaitTime", "DistCar")
KEY_COLUMNS = ("recordingId", "trackId", "frame")


class CliError(Exception):
    """Fatal usage or input error; message goes to stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _load_params(path, columns=None) -> DataMatrix:
    import pandas as pd

    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise CliError(f"parameter file not found: {path}") from None
    except Exception as exc:
        raise CliError(f"{path}: parse error: {exc}") from None
    if columns:
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise CliError(f"{path}: missing column(s) {', '.join(missing)}")
        frame = frame[list(columns)]
    elif all(c in frame.columns for c in PARAM_COLUMNS):
        frame = frame[list(PARAM_COLUMNS)]
    else:
        frame = frame.drop(columns=[c for c in KEY_COLUMNS if c in frame.columns])
    if frame.shape[1] < 2:
        raise CliError(f"{path}: need at least 2 data columns")
    return DataMatrix(frame.to_numpy(dtype=float), Scale.DATA, list(frame.columns))


def _parse_families(spec: str):
    if not spec:
        return None
    out = []
    for name in spec.split(","):
        name = name.strip().lower()
        try:
            family = Family(name)
        except ValueError:
            raise CliError(
                f"unknown family '{name}' (choose from "
                f"{', '.join(f.value for f in Family)})"
            ) from None
        if family in (Family.CLAYTON, Family.GUMBEL, Family.JOE, Family.BB1, Family.BB7):
            out.extend((family, rot) for rot in (0, 90, 180, 270))
        else:
            out.append((family, 0))
    return tuple(out)


def _input_paths(spec: list[str]) -> list[Path]:
    paths: list[Path] = []
    for item in spec:
        p = Path(item)
        if p.is_dir():
            found = sorted(p.glob("*_tracks.csv")) or sorted(p.glob("*.csv"))
            found = [f for f in found if not f.name.endswith("_tracksMeta.csv")]
            if not found:
                raise CliError(f"no recording CSVs found in directory {p}")
            paths.extend(found)
        else:
            paths.append(p)
    return paths


def cmd_extract(args) -> int:
    if not args.config:
        raise CliError("--config is required (roundabout geometry JSON)")
    try:
        geometry = RoundaboutGeometry.from_json(args.config)
    except GeometryError as exc:
        raise CliError(str(exc)) from None
    config = ExtractConfig(
        geometry=geometry,
        radius=args.radius,
        standstill_speed=args.standstill_speed,
        standstill_min_frames=args.standstill_frames,
        vehicle_classes=tuple(args.vehicle_classes.split(",")),
        waittime_mode=args.waittime_mode,
    )
    result = traffic.extract(_input_paths(args.input), config)
    result.to_csv(args.out)
    if not args.quiet:
        log.info("wrote %d rows to %s", result.n, args.out)
    if result.errors:
        for path, msg in result.errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        print(
            f"warning: {len(result.errors)} recording(s) failed, "
            f"{result.n} rows extracted from the rest",
            file=sys.stderr,
        )
        return 2
    return 0


def cmd_tau(args) -> int:
    data = _load_params(args.params, args.columns.split(",") if args.columns else None)
    try:
        tau = correlation_matrix(data, "kendall")
        rho = correlation_matrix(data, "spearman")
    except ZeroVarianceError as exc:
        raise CliError(str(exc)) from None
    print(combined_table(tau, rho))
    if args.out_tau:
        tau.to_csv(args.out_tau)
    if args.out_rho:
        rho.to_csv(args.out_rho)
    return 0


def cmd_fit(args) -> int:
    data = _load_params(args.params, args.columns.split(",") if args.columns else None)
    fitted = fit_vine(
        data,
        candidates=_parse_families(args.families),
        criterion=args.criterion,
        weights="tau" if args.signed_weights else "abs_tau",
        threads=args.threads,
        trunc_level=args.trunc,
        jitter_discrete=args.jitter_discrete,
        seed=args.seed,
    )
    save_model(fitted, args.out)
    if not args.quiet:
        log.info("fitted %d-dim vine (criterion %s), wrote %s",
                 fitted.dim, args.criterion, args.out)
        for t, tree in enumerate(fitted.structure.trees, start=1):
            for e in tree:
                log.info("  T%d %s: %s", t, e.label(), fitted.copulas[e])
    return 0


def cmd_sample(args) -> int:
    model = load_model(args.model)
    out = sample(model, args.n, args.seed)
    out.to_csv(args.out)
    if not args.quiet:
        log.info("wrote %d samples to %s", args.n, args.out)
    if args.svg:
        overlay = None
        if args.overlay:
            overlay = _load_params(args.overlay, model.column_names).values
        svg = scatter_matrix_svg(out.values, out.columns, overlay)
        Path(args.svg).write_text(svg, encoding="utf-8")
        if not args.quiet:
            log.info("wrote scatter matrix to %s", args.svg)
    return 0


def cmd_density(args) -> int:
    model = load_model(args.model)
    if (args.point is None) == (args.input is None):
        raise CliError("density needs exactly one of --point or --input")
    if args.point is not None:
        pts = np.array([[float(v) for v in args.point.split(",")]])
    else:
        import pandas as pd

        pts = pd.read_csv(args.input).to_numpy(dtype=float)
    try:
        if args.scale == "data":
            vals = log_density(model, pts)
        else:
            vals = log_density_u(model, pts)
    except NonFiniteDensityError as exc:
        raise CliError(f"density underflow: {exc}") from None
    vals = np.atleast_1d(vals)
    lines = [repr(float(v)) for v in vals]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        print("\n".join(lines))
    return 0


def cmd_rosenblatt(args) -> int:
    import pandas as pd

    model = load_model(args.model)
    frame = pd.read_csv(args.input)
    pts = frame.to_numpy(dtype=float)
    z = rosenblatt(model, pts)
    DataMatrix(np.atleast_2d(z), Scale.DATA, list(frame.columns)).to_csv(args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="trafficvine",
        description="Extract dependent traffic parameters, fit a vine copula, resimulate.",
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed (sampling, jitter)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-tree edge fitting")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="derive per-car-per-frame parameters from recordings")
    p.add_argument("--input", nargs="+", required=True,
                   help="tracks CSV file(s) or directories containing *_tracks.csv")
    p.add_argument("--config", help="roundabout geometry JSON {center:[x,y], entryRadius:r}")
    p.add_argument("--out", required=True, help="output parameter CSV")
    p.add_argument("--radius", type=float, default=10.0,
                   help="neighbor radius in meters, inclusive (default 10)")
    p.add_argument("--standstill-speed", type=float, default=0.1,
                   help="standstill speed threshold in m/s (default 0.1)")
    p.add_argument("--standstill-frames", type=int, default=3,
                   help="minimum consecutive frames below threshold (default 3)")
    p.add_argument("--waittime-mode", choices=("running", "track-total"), default="running",
                   help="running cumulative wait or per-track total on every frame")
    p.add_argument("--vehicle-classes", default=",".join(traffic.DEFAULT_VEHICLE_CLASSES),
                   help="comma list of classes counted as vehicles")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("tau", help="print Kendall tau / Spearman rho matrices")
    p.add_argument("--params", required=True, help="parameter CSV (from extract)")
    p.add_argument("--columns", help="comma list of columns (default: the four parameters)")
    p.add_argument("--out-tau", help="write the Kendall matrix as CSV")
    p.add_argument("--out-rho", help="write the Spearman matrix as CSV")
    p.set_defaults(func=cmd_tau)

    p = sub.add_parser("fit", help="select a vine structure and fit pair copulas")
    p.add_argument("--params", required=True, help="parameter CSV (from extract)")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--criterion", choices=("aic", "bic", "loglik"), default="aic",
                   help="family selection criterion (default aic)")
    p.add_argument("--families", help="comma list restricting the candidate family set")
    p.add_argument("--columns", help="comma list of columns (default: the four parameters)")
    p.add_argument("--trunc", type=int, default=None,
                   help="truncation level: independence above this tree")
    p.add_argument("--jitter-discrete", action="store_true",
                   help="jitter integer-valued columns before ranking (seeded)")
    p.add_argument("--signed-weights", action="store_true",
                   help="use signed tau instead of |tau| as spanning-tree weights")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw samples from a fitted model")
    p.add_argument("--model", required=True, help="model JSON (from fit)")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--svg", help="write a scatter-matrix SVG")
    p.add_argument("--overlay", help="parameter CSV drawn in grey behind the samples")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("density", help="evaluate the model log-density")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--point", help="comma-separated coordinates of one point")
    p.add_argument("--input", help="CSV of points (header row)")
    p.add_argument("--scale", choices=("data", "copula"), default="data",
                   help="interpret points on the data or the copula scale")
    p.add_argument("--out", help="write values to a file instead of stdout")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("rosenblatt", help="forward Rosenblatt transform of copula-scale points")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--input", required=True, help="CSV of copula-scale points")
    p.add_argument("--out", required=True, help="output CSV of transformed uniforms")
    p.set_defaults(func=cmd_rosenblatt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, ModelFormatError, ZeroVarianceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
