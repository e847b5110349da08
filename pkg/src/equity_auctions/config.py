"""Experiment configuration files: JSON validated against a bundled schema."""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .dists import GroupStructure, grid_steps, marginal_from_config

OUTPUT_DIR_ENV = "EQUITY_AUCTIONS_OUTPUT_DIR"

DEFAULTS = {
    "groups": {"n_min": 1, "n_maj": 1},
    "contamination": {"eps": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0], "rho": [0.0]},
    "delta": 0.02,
    "seed": 0,
    "n_samples": 100_000,
    "output_dir": ".",
    "lp_backend": "auto",
}


class ConfigError(ValueError):
    pass


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, schema())
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message}") from None
        cfg = copy.deepcopy(DEFAULTS)
        cfg.update(copy.deepcopy(data))
        groups = cfg["groups"]
        if len(cfg["marginals"]) != groups["n_min"] + groups["n_maj"]:
            raise ConfigError("need exactly one marginal per bidder")
        try:
            grid_steps(cfg["delta"])
            for m in cfg["marginals"]:
                marginal_from_config(m)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(cfg)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    @property
    def groups(self) -> GroupStructure:
        return GroupStructure(self.raw["groups"]["n_min"], self.raw["groups"]["n_maj"])

    @property
    def gamma(self) -> float:
        return float(self.raw["gamma"])

    @property
    def marginals(self):
        return [marginal_from_config(m) for m in self.raw["marginals"]]

    @property
    def eps(self) -> list:
        return list(self.raw["contamination"]["eps"])

    @property
    def rho(self) -> list:
        return list(self.raw["contamination"]["rho"])

    @property
    def delta(self) -> float:
        return float(self.raw["delta"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def n_samples(self) -> int:
        return int(self.raw["n_samples"])

    @property
    def lp_backend(self) -> str:
        return self.raw["lp_backend"]

    def output_dir(self, override: str | None = None) -> str:
        """Command-line flag, then the environment variable, then the config."""
        return override or os.environ.get(OUTPUT_DIR_ENV) or self.raw["output_dir"]

    def digest(self) -> str:
        """Hash of the resolved config, output directory excluded."""
        body = {k: v for k, v in self.raw.items() if k != "output_dir"}
        return config_digest(body)


def config_digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
