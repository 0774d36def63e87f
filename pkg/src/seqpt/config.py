# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Experiment configuration for the command line driver.

A configuration is a JSON object. Fields that are absent take the defaults of
:class:`ExperimentConfig`; unknown fields are rejected. The canonical form
(sorted keys, no whitespace) is hashed so every output can name the exact
configuration that produced it.
"""

import dataclasses
import hashlib
import json
import os
from typing import Any, Dict, List, Optional, Tuple, Union

from .designs import is_prime

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "config_hash",
           "DEFAULT_SHOTS"]

DEFAULT_SHOTS = 10_000


class ConfigError(ValueError):
    """An invalid experiment configuration. The message names the field."""


def _field_error(name: str, message: str) -> ConfigError:
    return ConfigError(f"field {name!r}: {message}")


def _parse_mode(mode: str) -> Optional[int]:
    if mode == "noiseless":
        return None
    prefix, _, count = mode.partition(":")
    if prefix != "shots" or not count:
        raise _field_error("mode", f"expected 'noiseless' or 'shots:<N>', "
                                   f"got {mode!r}")
    try:
        shots = int(count)
    except ValueError:
        raise _field_error("mode", f"shot count should be an integer, got "
                                   f"{count!r}") from None
    if shots < 1:
        raise _field_error("mode", f"shot count should be positive, got "
                                   f"{shots}")
    return shots


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    dims: Tuple[int, int] = (2, 3)
    channel: Dict[str, Any] = dataclasses.field(
        default_factory=lambda: {"type": "phase_slab", "d": 6,
                                 "phase": 5.42, "support": [0, 1]})
    mode: str = f"shots:{DEFAULT_SHOTS}"
    coefficients: Union[str, List[List[int]]] = "full"
    sample_size: Optional[int] = None
    m_grid: Tuple[int, ...] = (1, 2, 5, 10, 20, 30, 40, 50, 60, 72)
    repetitions: int = 20
    seed: int = 42
    states: int = 250
    out_dir: str = "seqpt-output"
    cptp_tol: float = 1e-8
    cptp_max_iter: int = 10_000
    report: Optional[str] = None
    save_dataset: bool = False

    def __post_init__(self):
        self.validate()

    @property
    def dim(self) -> int:
        return self.dims[0] * self.dims[1]

    @property
    def population(self) -> int:
        """Number of product design elements."""
        d1, d2 = self.dims
        return d1 * (d1 + 1) * d2 * (d2 + 1)

    @property
    def shots(self) -> Optional[int]:
        """Shots per setting, ``None`` for noiseless runs."""
        return _parse_mode(self.mode)

    def validate(self):
        if len(self.dims) != 2 or not all(
                isinstance(d, int) and not isinstance(d, bool)
                for d in self.dims):
            raise _field_error("dims", f"expected two integers, got "
                                       f"{list(self.dims)}")
        for d in self.dims:
            if not is_prime(d):
                raise _field_error("dims", f"factor dimension {d} is not "
                                           f"prime")
        if not isinstance(self.channel, dict) or "type" not in self.channel:
            raise _field_error("channel", "expected an object with a "
                                          "'type'")
        if int(self.channel.get("d", -1)) != self.dim:
            raise _field_error("channel", f"channel dimension "
                                          f"{self.channel.get('d')} does not "
                                          f"match dims {list(self.dims)}")
        _parse_mode(self.mode)
        if isinstance(self.coefficients, str):
            if self.coefficients not in ("full", "support"):
                raise _field_error("coefficients", f"expected 'full', "
                                                   f"'support' or a list of "
                                                   f"indices, got "
                                                   f"{self.coefficients!r}")
        elif not self.coefficients or any(
                len(index) != 4 for index in self.coefficients):
            raise _field_error("coefficients", "expected a non-empty list "
                                               "of [i1, i2, j1, j2] indices")
        if self.sample_size is not None and \
                not 1 <= self.sample_size <= self.population:
            raise _field_error("sample_size", f"should be between 1 and "
                                              f"{self.population}, got "
                                              f"{self.sample_size}")
        if not self.m_grid:
            raise _field_error("m_grid", "should not be empty")
        for m in self.m_grid:
            if not 1 <= m <= self.population:
                raise _field_error("m_grid", f"values should be between 1 "
                                             f"and {self.population}, got "
                                             f"{m}")
        if self.repetitions < 1:
            raise _field_error("repetitions", f"should be at least 1, got "
                                              f"{self.repetitions}")
        if self.seed < 0:
            raise _field_error("seed", f"should be non-negative, got "
                                       f"{self.seed}")
        if self.states < 1:
            raise _field_error("states", f"should be at least 1, got "
                                         f"{self.states}")
        if not self.cptp_tol > 0:
            raise _field_error("cptp_tol", f"should be positive, got "
                                           f"{self.cptp_tol}")
        if self.cptp_max_iter < 1:
            raise _field_error("cptp_max_iter", f"should be at least 1, got "
                                                f"{self.cptp_max_iter}")

    @classmethod
    def from_dict(cls, obj: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError(f"a configuration should be a JSON object, "
                              f"got {type(obj).__name__}")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown fields: {', '.join(unknown)}")
        values = dict(obj)
        try:
            if "dims" in values:
                values["dims"] = tuple(values["dims"])
            if "m_grid" in values:
                values["m_grid"] = tuple(int(m) for m in values["m_grid"])
            if isinstance(values.get("coefficients"), list):
                values["coefficients"] = [
                    [int(k) for k in index]
                    for index in values["coefficients"]]
        except (TypeError, ValueError) as error:
            raise ConfigError(f"malformed configuration: {error}") from error
        try:
            return cls(**values)
        except TypeError as error:
            raise ConfigError(f"malformed configuration: {error}") from error

    def to_dict(self) -> Dict[str, Any]:
        obj = dataclasses.asdict(self)
        obj["dims"] = list(self.dims)
        obj["m_grid"] = list(self.m_grid)
        return obj

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """A copy with the non-``None`` overrides applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except OSError as error:
        raise ConfigError(f"cannot read configuration {os.fspath(path)}: "
                          f"{error.strerror or error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"{os.fspath(path)} is not valid JSON: "
                          f"{error}") from error
    return ExperimentConfig.from_dict(obj)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    canonical = json.dumps(config.to_dict(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
