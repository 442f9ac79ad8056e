"""Flat key-value run configuration.

Grammar (one setting per line)::

    # comment
    section.key = value        # trailing comments allowed

Keys are dotted lowercase names from the registry below; unknown keys are
rejected.  Values are parsed according to the registered type: int, float,
bool (true/false), str, or a comma-separated float list.  A run manifest
is the same format with every resolved key written out, so defaults are
always on record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import ConfigError


@dataclass(frozen=True)
class _Key:
    default: Any
    kind: str          # int | float | bool | str | floats
    help: str


REGISTRY: dict[str, _Key] = {
    "io.target_path": _Key("", "str", "target file (PGM or raw f32); empty = use the phantom section"),
    "io.out_dir": _Key("out", "str", "directory receiving all result files"),

    "geometry.n_angles": _Key(360, "int", "number of angular views"),
    "geometry.angle_span": _Key(360.0, "float", "angular span in degrees (views are uniform over [start, start+span))"),
    "geometry.angle_start": _Key(0.0, "float", "first view angle in degrees"),
    "geometry.n_beams": _Key(0, "int", "beamlets per view; 0 = cover the grid diagonal"),

    "domain.band_width": _Key(10, "int", "band dilation radius in voxels (Chebyshev)"),
    "domain.band_free": _Key(False, "bool", "treat every non-target voxel as band"),
    "domain.support_tol": _Key(0.0, "float", "relative support threshold for active beamlets"),

    "psf.kind": _Key("identity", "str", "identity | gaussian | file"),
    "psf.extent": _Key(21, "int", "gaussian kernel extent per axis"),
    "psf.populated": _Key(5, "int", "populated center box per axis"),
    "psf.sigma": _Key(1.0, "float", "gaussian standard deviation in voxels"),
    "psf.path": _Key("", "str", "kernel file for psf.kind = file"),

    "material.alpha": _Key(0.0, "float", "lower response asymptote"),
    "material.k": _Key(1.0, "float", "upper response asymptote"),
    "material.beta": _Key(4.0, "float", "response growth rate per unit dose"),
    "material.gamma": _Key(1.0, "float", "response shape exponent"),
    "material.f0": _Key(1.0, "float", "dose at the response transition"),

    "problem.kind": _Key("general", "str", "general | case1 | case2"),
    "problem.w1": _Key(1.0, "float", "band spill weight (general form)"),
    "problem.w2": _Key(1.0, "float", "gel overshoot weight (general form)"),
    "problem.eps_l": _Key(0.10, "float", "relative lower response tolerance (case1)"),
    "problem.eps_u": _Key(0.10, "float", "relative upper response tolerance (case1)"),
    "problem.m_crit": _Key(0.23, "float", "inhibition response threshold (case2)"),

    "solver.max_iters": _Key(200_000, "int", "iteration budget"),
    "solver.tol_kkt": _Key(1e-6, "float", "normalized KKT residual tolerance"),
    "solver.theta": _Key(1.0, "float", "overrelaxation parameter in [0, 1]"),
    "solver.check_every": _Key(100, "int", "iterations between residual checks"),
    "solver.seed": _Key(0, "int", "seed for the operator-norm power iteration"),
    "solver.tau": _Key(0.0, "float", "primal step; 0 = 0.99/operator norm"),
    "solver.sigma": _Key(0.0, "float", "dual step; 0 = 0.99/operator norm"),
    "solver.restart_period": _Key(4000, "int", "iterate-averaging restart cap (0 disables restarts)"),
    "solver.trace_path": _Key("", "str", "CSV convergence trace (empty = off)"),
    "solver.skip_phase1": _Key(False, "bool", "skip the phase-1 feasibility test"),

    "postscale.domain": _Key("default", "str", "dose | response | anchored | default (per-formulation rule)"),
    "postscale.weights": _Key("uniform", "str", "uniform | proportional-to-target"),

    "phantom.kind": _Key("", "str", "disk | annulus | blocks | sphere3d; empty = use io.target_path"),
    "phantom.nx": _Key(64, "int", "phantom grid size, first axis"),
    "phantom.ny": _Key(64, "int", "phantom grid size, second axis"),
    "phantom.nz": _Key(1, "int", "phantom grid size, third axis (1 = 2D)"),
    "phantom.radius": _Key(20.0, "float", "outer radius (disk/annulus/sphere3d)"),
    "phantom.inner_radius": _Key(0.0, "float", "hole/cavity radius"),
    "phantom.n_blocks": _Key(3, "int", "block count (blocks phantom)"),
    "phantom.block_gap": _Key(4, "int", "gap between blocks in voxels"),
    "phantom.levels": _Key((0.5,), "floats", "response levels, comma separated"),

    "metrics.bins": _Key(64, "int", "histogram bin count"),
}


def _parse_value(key: str, raw: str):
    spec = REGISTRY[key]
    raw = raw.strip()
    try:
        if spec.kind == "int":
            return int(raw)
        if spec.kind == "float":
            return float(raw)
        if spec.kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if spec.kind == "floats":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"key {key!r}: cannot parse {raw!r} as {spec.kind}", key=key) from exc


class RunConfig:
    """Resolved configuration: registry defaults overlaid with file values."""

    def __init__(self, overrides: dict[str, Any] | None = None):
        self._values = {k: spec.default for k, spec in REGISTRY.items()}
        for key, val in (overrides or {}).items():
            if key not in REGISTRY:
                raise ConfigError(f"unknown config key {key!r}", key=key)
            self._values[key] = val

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key {key!r}", key=key) from None

    def items(self):
        return sorted(self._values.items())

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        overrides: dict[str, Any] = {}
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                body = line.split("#", 1)[0].strip()
                if not body:
                    continue
                if "=" not in body:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key = value', got {body!r}")
                key, raw = body.split("=", 1)
                key = key.strip()
                if key not in REGISTRY:
                    raise ConfigError(
                        f"{path}:{lineno}: unknown config key {key!r}", key=key)
                overrides[key] = _parse_value(key, raw)
        return cls(overrides)

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# resolved run configuration\n")
            for key, val in self.items():
                if REGISTRY[key].kind == "floats":
                    val = ",".join(format(v, ".17g") for v in val)
                elif isinstance(val, bool):
                    val = "true" if val else "false"
                elif isinstance(val, float):
                    val = format(val, ".17g")
                fh.write(f"{key} = {val}\n")


def help_text() -> str:
    lines = ["configuration keys (key = default):"]
    for key, spec in sorted(REGISTRY.items()):
        default = spec.default
        if spec.kind == "floats":
            default = ",".join(str(v) for v in default)
        elif isinstance(default, bool):
            default = "true" if default else "false"
        lines.append(f"  {key} = {default}")
        lines.append(f"      {spec.help}")
    return "\n".join(lines)
