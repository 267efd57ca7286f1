"""Run configuration: JSON parsing with located diagnostics and the shipped examples."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, ModelError
from .estimates.pipeline import PipelineConfig
from .geometry import ModelSpec
from .solitons import QUAD_TOL, SOLITONS
from .solver import RANK_TOL, TOL_LIMIT, TOL_LIN

MODEL_STAGES = ("ends", "growth", "moser", "alpha", "dimension")
STAGES = MODEL_STAGES + ("soliton",)
TOLERANCE_KEYS = {"tol_lin": TOL_LIN, "tol_limit": TOL_LIMIT, "rank_tol": RANK_TOL, "fit_tol": 0.25, "quad_tol": QUAD_TOL}
SETTING_KEYS = ("q", "nu", "theta", "tail_fraction", "r0", "separation_tol")
TOP_KEYS = {"description", "model", "soliton", "pipeline", "tolerances", "settings", "output_dir", "seed"}


@dataclass(frozen=True)
class RunConfig:
    name: str
    description: str
    model: ModelSpec | None
    soliton: dict | None
    pipeline: tuple[str, ...]
    tolerances: dict
    settings: dict
    output_dir: str
    seed: int
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    def pipeline_config(self, jobs: int = 1) -> PipelineConfig:
        t = self.tolerances
        return PipelineConfig(
            tol_lin=t["tol_lin"],
            tol_limit=t["tol_limit"],
            rank_tol=t["rank_tol"],
            fit_tol=t["fit_tol"],
            jobs=jobs,
            **self.settings,
        )


def _located(err: json.JSONDecodeError, source: str) -> ConfigError:
    return ConfigError(f"{source}:{err.lineno}:{err.colno}: {err.msg}")


def parse_config(text: str, source: str = "<config>", name: str = "") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise _located(err, source) from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    if ("model" in raw) == ("soliton" in raw):
        raise ConfigError(f"{source}: give exactly one of 'model' or 'soliton'")

    model = soliton = None
    if "model" in raw:
        try:
            model = ModelSpec.from_dict(raw["model"])
        except (ModelError, KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"{source}: model: {err}") from None
        default_stages = MODEL_STAGES
    else:
        soliton = raw["soliton"]
        if not isinstance(soliton, dict) or soliton.get("name") not in SOLITONS:
            raise ConfigError(f"{source}: soliton.name must be one of {sorted(SOLITONS)}")
        default_stages = ("soliton",)

    stages = tuple(raw.get("pipeline", default_stages))
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ConfigError(f"{source}: unknown pipeline stages {bad}; choose from {list(STAGES)}")
    if soliton is not None and set(stages) - {"soliton"}:
        raise ConfigError(f"{source}: soliton configs only support the 'soliton' stage")
    if model is not None and "soliton" in stages:
        raise ConfigError(f"{source}: the 'soliton' stage needs a soliton config")

    tol = dict(TOLERANCE_KEYS)
    for k, v in raw.get("tolerances", {}).items():
        if k not in tol:
            raise ConfigError(f"{source}: unknown tolerance {k!r}")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise ConfigError(f"{source}: tolerance {k} must be a positive number")
        tol[k] = float(v)
    settings = raw.get("settings", {})
    bad = set(settings) - set(SETTING_KEYS)
    if bad:
        raise ConfigError(f"{source}: unknown settings {sorted(bad)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"{source}: seed must be a nonnegative integer")
    return RunConfig(
        name=name or Path(source).stem,
        description=str(raw.get("description", "")),
        model=model,
        soliton=soliton,
        pipeline=stages,
        tolerances=tol,
        settings=dict(settings),
        output_dir=str(raw.get("output_dir", "out")),
        seed=seed,
        source=source,
        raw=raw,
    )


def shipped_configs() -> dict[str, str]:
    """Name to JSON text for every example bundled with the package."""
    root = resources.files("endslab") / "configs"
    return {p.name[:-5]: p.read_text() for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def load_config(ref: str) -> RunConfig:
    """Load a config from a path, or by the name of a shipped example."""
    path = Path(ref)
    if path.is_file():
        return parse_config(path.read_text(), str(path))
    shipped = shipped_configs()
    # bare names and examples/<name>.json both resolve to the bundled copies
    key = path.stem if path.suffix == ".json" else path.name
    if key in shipped and str(path.parent) in (".", "examples"):
        return parse_config(shipped[key], f"{key}.json", key)
    raise ConfigError(f"{ref}: no such file or shipped example")
