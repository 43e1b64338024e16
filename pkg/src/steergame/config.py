"""Run configuration files: strict JSON schema, loud failures.

A run config names the model file, embeds the target and adversary specs,
and fixes the horizon and seed list.  Unknown fields are rejected so typos
cannot silently fall back to defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .adversaries import AdversarySpec
from .learner import LearnerConfig
from .targets import TargetSet, target_from_dict, target_to_dict

_FIELDS = {"model", "target", "leader", "adversary", "steps", "seeds", "learner", "output_dir"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model_path: Path
    target: TargetSet
    target_spec: dict
    leader: str  # "exact" | "learn"
    adversary: AdversarySpec
    steps: int
    seeds: tuple[int, ...]
    learner: LearnerConfig | None
    output_dir: Path

    def to_dict(self) -> dict:
        out = {
            "model": str(self.model_path),
            "target": self.target_spec,
            "leader": self.leader,
            "adversary": self.adversary.to_dict(),
            "steps": self.steps,
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
        }
        if self.learner is not None:
            out["learner"] = self.learner.to_dict()
        return out


def config_from_dict(data: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(data) - _FIELDS
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    missing = (_FIELDS - {"learner"}) - set(data)
    if missing:
        raise ConfigError(f"missing config fields: {sorted(missing)}")

    base = base_dir if base_dir is not None else Path.cwd()
    model_path = Path(data["model"])
    if not model_path.is_absolute():
        model_path = base / model_path
    if not model_path.is_file():
        raise ConfigError(f"model file not found: {model_path}")

    leader = data["leader"]
    if leader not in ("exact", "learn"):
        raise ConfigError(f"leader must be 'exact' or 'learn', got {leader!r}")

    steps = data["steps"]
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError(f"steps must be a positive integer, got {steps!r}")

    seeds = data["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")

    try:
        target = target_from_dict(data["target"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad target spec: {exc}") from exc
    try:
        adversary = AdversarySpec.from_dict(data["adversary"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad adversary spec: {exc}") from exc

    learner = None
    if leader == "learn":
        if "learner" not in data:
            raise ConfigError("leader 'learn' requires a learner config")
        try:
            learner = LearnerConfig.from_dict(data["learner"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad learner config: {exc}") from exc
    elif "learner" in data:
        raise ConfigError("learner config only applies when leader is 'learn'")

    output_dir = Path(data["output_dir"])
    if not output_dir.is_absolute():
        output_dir = base / output_dir

    return RunConfig(
        model_path=model_path,
        target=target,
        target_spec=target_to_dict(target),
        leader=leader,
        adversary=adversary,
        steps=steps,
        seeds=tuple(seeds),
        learner=learner,
        output_dir=output_dir,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(data, base_dir=path.parent)
