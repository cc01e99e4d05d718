"""Run configuration: strict YAML schema with fail-loud unknown keys."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


# schema: key -> (type or nested dict, required)
_ANGLE_SCHEMA = {"type": (str, True), "value": (float, False), "amplitude": (float, False)}

_SCHEMA: dict[str, Any] = {
    "catalog": (
        {
            "name": (str, True),
            "params": (dict, False),
            "angle": (_ANGLE_SCHEMA, False),
            "base": (str, False),
            "base_params": (dict, False),
        },
        True,
    ),
    "quadrature": ({"sphere_order": (int, False), "radial_order": (int, False)}, False),
    "radii": (list, False),
    "grid": ({"n_minus": (int, False), "n_plus": (int, False), "r_max": (float, False)}, False),
    "tolerances": (
        {
            "dec_crease": (float, False),
            "identity_rel": (float, False),
            "crease_identity_rel": (float, False),
            "gap_rel": (float, False),
            "lorentz": (float, False),
            "killing": (float, False),
            "flatness": (float, False),
            "drift": (float, False),
            "flux_rel": (float, False),
        },
        False,
    ),
    "ensembles": ({"n_spinors": (int, False)}, False),
    "solver": ({"method": (str, False)}, False),
    "flux_check": (bool, False),
    "seed": (int, False),
    "out_dir": (str, False),
}


def _check_section(data: dict, schema: dict, path: str) -> None:
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown configuration key {path}{key!r}")
    for key, (spec, required) in schema.items():
        if key not in data:
            if required:
                raise ConfigError(f"missing required configuration key {path}{key!r}")
            continue
        val = data[key]
        if isinstance(spec, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path}{key} must be a mapping")
            _check_section(val, spec, f"{path}{key}.")
        elif spec is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{path}{key} must be a number")
        elif spec is int:
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{path}{key} must be an integer")
        elif spec is list:
            if not isinstance(val, list):
                raise ConfigError(f"{path}{key} must be a list")
        elif not isinstance(val, spec):
            raise ConfigError(f"{path}{key} must be of type {spec.__name__}")


_DEFAULT_TOLERANCES = {
    "dec_crease": 1e-9,
    "identity_rel": 1e-6,
    "crease_identity_rel": 1e-8,
    "gap_rel": 1e-4,
    "lorentz": 1e-10,
    "killing": 1e-9,
    "flatness": 1e-6,
    "drift": 1e-8,
    "flux_rel": 0.02,
}


@dataclass
class RunConfig:
    catalog_name: str
    catalog_params: dict = field(default_factory=dict)
    angle: dict | None = None
    base: str | None = None
    base_params: dict = field(default_factory=dict)
    sphere_order: int = 16
    radial_order: int = 32
    radii: tuple = (50.0, 100.0, 200.0)
    n_minus: int = 256
    n_plus: int = 1024
    r_max: float = 400.0
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    n_spinors: int = 4
    solver_method: str = "direct"
    flux_check: bool = False
    seed: int = 0
    out_dir: str = "."
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Deterministic copy of the configuration as parsed (for reports)."""
        return self.raw

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])


def parse_config(text: str) -> RunConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    _check_section(data, _SCHEMA, "")
    cat = data["catalog"]
    quad = data.get("quadrature", {})
    grid = data.get("grid", {})
    tols = dict(_DEFAULT_TOLERANCES)
    tols.update(data.get("tolerances", {}))
    radii = data.get("radii", [50.0, 100.0, 200.0])
    if len(radii) < 1 or any(not isinstance(r, (int, float)) for r in radii):
        raise ConfigError("radii must be a nonempty list of numbers")
    for name, val in (("sphere_order", quad.get("sphere_order", 16)),
                      ("radial_order", quad.get("radial_order", 32))):
        if not 4 <= val <= 256:
            raise ConfigError(f"{name} must be within 4..256")
    method = data.get("solver", {}).get("method", "direct")
    if method not in ("direct", "cg"):
        raise ConfigError(f"solver.method must be direct or cg, got {method!r}")
    return RunConfig(
        catalog_name=cat["name"],
        catalog_params=dict(cat.get("params", {})),
        angle=cat.get("angle"),
        base=cat.get("base"),
        base_params=dict(cat.get("base_params", {})),
        sphere_order=int(quad.get("sphere_order", 16)),
        radial_order=int(quad.get("radial_order", 32)),
        radii=tuple(float(r) for r in radii),
        n_minus=int(grid.get("n_minus", 256)),
        n_plus=int(grid.get("n_plus", 1024)),
        r_max=float(grid.get("r_max", 400.0)),
        tolerances=tols,
        n_spinors=int(data.get("ensembles", {}).get("n_spinors", 4)),
        solver_method=method,
        flux_check=bool(data.get("flux_check", False)),
        seed=int(data.get("seed", 0)),
        out_dir=str(data.get("out_dir", ".")),
        raw=data,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_catalog_entry(config: RunConfig):
    """Instantiate the configured catalog model (data or creased data)."""
    from .catalog import catalog

    params = dict(config.catalog_params)
    if config.catalog_name == "rotated_crease":
        if config.base is None or config.angle is None:
            raise ConfigError("rotated_crease needs catalog.base and catalog.angle")
        return catalog(
            "rotated_crease",
            base=config.base,
            base_params=config.base_params,
            f=config.angle,
        )
    return catalog(config.catalog_name, **params)
