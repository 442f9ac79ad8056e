"""Command-line front-end.

    sipo run <config>                          full pipeline
    sipo phantom <spec-config> -o <path>       generate a target file
    sipo metrics <dose> <target> <config>      re-evaluate a dose field
    sipo --help                                every config key with defaults
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import RunConfig, help_text
from .domain import BAND_FREE, partition_object_domain
from .errors import SipoError
from .fieldio import export_field, ingest_field, ingest_target
from .material import response_to_dose
from .metrics import compute_metrics
from .phantoms import PhantomSpec, generate_phantom
from .pipeline import (EXIT_CONFIG, EXIT_OK, material_from_config,
                       run_pipeline, target_from_config)


def _cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config)
    result = run_pipeline(cfg)
    return result.exit_code


def _cmd_phantom(args) -> int:
    cfg = RunConfig.from_file(args.config)
    p = material_from_config(cfg)
    field = target_from_config(cfg, p)
    export_field(field, args.output, units="response")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    cfg = RunConfig.from_file(args.config)
    p = material_from_config(cfg)
    dose = ingest_field(args.dose).astype(float)
    m_target = ingest_target(args.target, p)
    band_width = BAND_FREE if cfg["domain.band_free"] else cfg["domain.band_width"]
    part = partition_object_domain((m_target > p.alpha).astype(float), band_width)
    f_target = response_to_dose(m_target, part.gel, p)
    critical = float(np.ravel(f_target)[part.gel].min())
    report = compute_metrics(dose, f_target, m_target, critical,
                             part.gel, part.band, p)
    row = report.to_csv_row()
    print(",".join(row))
    print(",".join(row.values()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sipo",
        description="scale-invariant projection optimization for tomographic "
                    "volumetric printing",
        epilog=help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full pipeline from a config file")
    run_p.add_argument("config", help="flat key-value config file")
    run_p.set_defaults(func=_cmd_run)

    ph_p = sub.add_parser("phantom", help="generate a target field file")
    ph_p.add_argument("config", help="config with a phantom section")
    ph_p.add_argument("-o", "--output", required=True,
                      help="output path (.f32 raw or .pgm)")
    ph_p.set_defaults(func=_cmd_phantom)

    me_p = sub.add_parser("metrics", help="evaluate a dose field against a target")
    me_p.add_argument("dose", help="dose field (raw f32 with sidecar)")
    me_p.add_argument("target", help="target response (PGM or raw f32)")
    me_p.add_argument("config", help="config with domain/material sections")
    me_p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SipoError as exc:
        key = getattr(exc, "key", None)
        suffix = f" (config key: {key})" if key else ""
        print(f"error: {exc}{suffix}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
