# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Simulated measurement bench.

A measurement setting prepares a pure state, sends it through the channel
and projects onto a second pure state. Successes out of a fixed number of
shots are binomial. Every setting draws from its own random stream, seeded
by the master seed and a digest of the two states, so identical physical
settings always produce identical counts regardless of scheduling.

Datasets are stored as JSON lines: a header line followed by one record per
setting. Paths ending in ``.gz`` are gzip-compressed with zlib-ng.
"""

import builtins
import errno
import functools
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from zlib_ng import gzip_ng_threaded

from .algebra import PureState, TOLERANCES, from_pairs, to_pairs
from .channels import ChiMatrix, KrausChannel
from .designs import OperatorBasis, ProductDesign
from .seqpt import SamplePlan, element_recipe, flat_pair
from .seqpt_threaded import threaded_map

__all__ = ["Setting", "MeasurementRecord", "MeasurementDataset",
           "MissingSettingError", "SimulatedSource", "SCHEMA_VERSION",
           "TAGS", "setting_key", "survival_probability", "simulate_counts",
           "settings_for", "settings_for_plans", "qst_settings",
           "run_experiment", "store_dataset", "load_dataset", "audit_dataset"]

_log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TAGS = ("f_tensor", "f1-marginal", "f2-marginal", "qst", "sqpt")

Channel = Union[KrausChannel, ChiMatrix]


class MissingSettingError(LookupError):
    """A dataset lacks a setting an estimator needs."""


def _canonical(vector: np.ndarray) -> np.ndarray:
    first = vector[np.flatnonzero(np.abs(vector) > 1e-9)[0]]
    # Adding 0.0 turns -0.0 into 0.0.
    return np.round(vector * (abs(first) / first), 10) + 0.0


def setting_key(preparation: np.ndarray, projector: np.ndarray) -> str:
    """Digest of a (preparation, projector) pair that ignores global
    phases."""
    digest = hashlib.sha256()
    for vector in (preparation, projector):
        canonical = _canonical(np.asarray(vector, dtype=complex))
        digest.update(canonical.astype(np.complex128).tobytes())
        digest.update(b"|")
    return digest.hexdigest()


def _setting_rng(seed: int, key: str) -> np.random.Generator:
    words = [int(key[k:k + 8], 16) for k in range(0, 64, 8)]
    return np.random.default_rng([seed, *words])


@dataclass(frozen=True, eq=False)
class Setting:
    """Prepare ``preparation``, project onto ``projector``."""
    preparation: PureState
    projector: PureState
    tag: str
    indices: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.preparation.dim != self.projector.dim:
            raise ValueError(f"preparation of dimension "
                             f"{self.preparation.dim} and projector of "
                             f"dimension {self.projector.dim} do not match")
        if self.tag not in TAGS:
            raise ValueError(f"unknown setting tag {self.tag!r}")

    @functools.cached_property
    def key(self) -> str:
        return setting_key(self.preparation.amplitudes,
                           self.projector.amplitudes)


def _checked_probabilities(values: np.ndarray) -> np.ndarray:
    tol = TOLERANCES.probability
    if np.any(values < -tol) or np.any(values > 1 + tol):
        worst = values[np.argmax(np.abs(values - 0.5))]
        raise ValueError(f"survival probability {worst!r} outside [0, 1]; "
                         f"the channel is not physical")
    return np.clip(values, 0.0, 1.0)


def survival_probability(ch: Channel, s: Setting) -> float:
    """``<phi_B| E(|phi_A><phi_A|) |phi_B>``, clipped to [0, 1]."""
    values = ch.survival(s.preparation.amplitudes, s.projector.amplitudes)
    return float(_checked_probabilities(values)[0, 0])


def simulate_counts(p: float, shots: int, rng: np.random.Generator) -> int:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p should be a probability, got {p}")
    if shots < 0:
        raise ValueError(f"shots should be non-negative, got {shots}")
    return int(rng.binomial(shots, p))


def _recipe_settings(recipe, n: int, deduplicate: bool) -> List[Setting]:
    tagged = [(0, "f_tensor")] + \
        [(r, "f1-marginal") for r in recipe.marginal_1] + \
        [(r, "f2-marginal") for r in recipe.marginal_2]
    settings = []
    for t, preparation in enumerate(recipe.preparations):
        prep = PureState(preparation)
        seen = set()
        for row, tag in tagged:
            if deduplicate and row in seen:
                continue
            seen.add(row)
            settings.append(Setting(
                prep, PureState(recipe.projectors[row]), tag,
                (n, recipe.projector_elements[row], t)))
    return settings


def _unique(settings: Iterable[Setting]) -> List[Setting]:
    seen = set()
    result = []
    for setting in settings:
        if setting.key not in seen:
            seen.add(setting.key)
            result.append(setting)
    return result


def settings_for(plan: SamplePlan, design: ProductDesign,
                 basis: OperatorBasis, deduplicate: bool = True
                 ) -> List[Setting]:
    """
    Every setting needed to assemble the fidelity triple of ``plan``.

    Per sampled element and preparation: the survival setting, then the
    marginal settings of both factors. Without deduplication the survival
    setting is listed once more in each marginal list.
    """
    i, j = flat_pair(plan.index, design.dims)
    settings: List[Setting] = []
    for n in plan.subset:
        recipe = element_recipe(design, basis, i, j, n)
        settings.extend(_recipe_settings(recipe, n, deduplicate))
    return _unique(settings) if deduplicate else settings


def settings_for_plans(plans: Iterable[SamplePlan], design: ProductDesign,
                       basis: OperatorBasis) -> List[Setting]:
    """Deduplicated settings of several plans, in first-seen order."""
    settings: List[Setting] = []
    for plan in plans:
        settings.extend(settings_for(plan, design, basis))
    return _unique(settings)


def qst_settings(states: Sequence[np.ndarray], projectors: np.ndarray
                 ) -> List[Setting]:
    """State tomography of the channel output of every state in
    ``states``: each state against every projector, in that order."""
    measured = [PureState(p) for p in projectors]
    return [Setting(PureState(state), proj, "qst", (s, k))
            for s, state in enumerate(states)
            for k, proj in enumerate(measured)]


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Counts of one setting. Exact records carry ``probability`` and no
    shots."""
    setting: Setting
    shots: Optional[int]
    successes: Optional[int]
    probability: Optional[float] = None

    def __post_init__(self):
        if self.shots is None:
            if self.probability is None:
                raise ValueError("an exact record needs a probability")
        elif self.successes is None or not 0 <= self.successes <= self.shots:
            raise ValueError(f"successes {self.successes} out of range for "
                             f"{self.shots} shots")

    @property
    def rate(self) -> float:
        if self.shots is None:
            return float(self.probability)  # type: ignore
        return self.successes / self.shots  # type: ignore

    @property
    def variance(self) -> float:
        if self.shots is None:
            return 0.0
        rate = self.rate
        return rate * (1 - rate) / self.shots

    def to_json(self) -> Dict[str, Any]:
        setting = self.setting
        return {"tag": setting.tag,
                "prep": to_pairs(setting.preparation.amplitudes),
                "proj": to_pairs(setting.projector.amplitudes),
                "shots": self.shots, "successes": self.successes,
                "probability": self.probability,
                "indices": list(setting.indices)}

    @classmethod
    def from_json(cls, obj: Dict[str, Any]) -> "MeasurementRecord":
        setting = Setting(PureState(from_pairs(obj["prep"])),
                          PureState(from_pairs(obj["proj"])), obj["tag"],
                          tuple(obj.get("indices", ())))
        return cls(setting, obj["shots"], obj["successes"],
                   obj.get("probability"))


class MeasurementDataset:
    """
    Measurement records keyed by setting. Serves as a survival source for
    the estimators.
    """
    def __init__(self, channel: Optional[Dict[str, Any]], seed: int,
                 shots: Optional[int],
                 dims: Optional[Sequence[int]] = None,
                 records: Iterable[MeasurementRecord] = (),
                 config_hash: Optional[str] = None):
        self.channel = channel
        self.seed = seed
        self.shots = shots
        self.dims = tuple(dims) if dims is not None else None
        self.config_hash = config_hash
        self.records: List[MeasurementRecord] = []
        self._index: Dict[str, int] = {}
        for record in records:
            self.add(record)

    def add(self, record: MeasurementRecord):
        key = record.setting.key
        if key in self._index:
            raise ValueError(f"dataset already holds setting {key[:12]}")
        self._index[key] = len(self.records)
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __contains__(self, setting: Setting) -> bool:
        return setting.key in self._index

    def __eq__(self, other):
        if not isinstance(other, MeasurementDataset):
            return NotImplemented
        return self.digest() == other.digest()

    def record(self, preparation, projector) -> MeasurementRecord:
        key = setting_key(preparation, projector)
        try:
            return self.records[self._index[key]]
        except KeyError:
            raise MissingSettingError(
                f"dataset has no measurement for setting {key[:12]}") \
                from None

    def expectations(self, preparations, projectors
                     ) -> Tuple[np.ndarray, np.ndarray]:
        preparations = np.atleast_2d(preparations)
        projectors = np.atleast_2d(projectors)
        values = np.empty((len(preparations), len(projectors)))
        variances = np.empty_like(values)
        for p, preparation in enumerate(preparations):
            for k, proj in enumerate(projectors):
                record = self.record(preparation, proj)
                values[p, k] = record.rate
                variances[p, k] = record.variance
        return values, variances

    def header(self) -> Dict[str, Any]:
        return {"schema_version": SCHEMA_VERSION, "kind": "seqpt-dataset",
                "channel": self.channel, "config_hash": self.config_hash,
                "seed": self.seed, "shots": self.shots,
                "dims": list(self.dims) if self.dims else None}

    def lines(self) -> List[str]:
        return [json.dumps(self.header(), sort_keys=True)] + \
            [json.dumps(r.to_json(), sort_keys=True) for r in self.records]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()

    def __repr__(self):
        return (f"MeasurementDataset(settings={len(self)}, "
                f"shots={self.shots}, seed={self.seed})")


class SimulatedSource:
    """Draws shot-noise survival rates on demand, exactly as
    :func:`run_experiment` would record them. ``shots=None`` returns the
    exact probabilities."""
    def __init__(self, channel: Channel, shots: Optional[int], seed: int,
                 dims: Optional[Sequence[int]] = None):
        if shots is not None and shots < 1:
            raise ValueError(f"shots should be at least 1, got {shots}")
        self.channel = channel
        self.shots = shots
        self.seed = seed
        self.dims = tuple(dims) if dims is not None else None

    def expectations(self, preparations, projectors
                     ) -> Tuple[np.ndarray, np.ndarray]:
        preparations = np.atleast_2d(preparations)
        projectors = np.atleast_2d(projectors)
        exact = _checked_probabilities(
            self.channel.survival(preparations, projectors))
        if self.shots is None:
            return exact, np.zeros_like(exact)
        rates = np.empty_like(exact)
        for p, k in np.ndindex(*exact.shape):
            key = setting_key(preparations[p], projectors[k])
            successes = simulate_counts(exact[p, k], self.shots,
                                        _setting_rng(self.seed, key))
            rates[p, k] = successes / self.shots
        return rates, rates * (1 - rates) / self.shots


def run_experiment(ch: Channel, settings: Iterable[Setting],
                   shots: Optional[int], seed: int, threads: int = 0,
                   channel_spec: Optional[Dict[str, Any]] = None,
                   dims: Optional[Sequence[int]] = None,
                   config_hash: Optional[str] = None
                   ) -> MeasurementDataset:
    """
    Measure every distinct setting once. ``shots=None`` stores exact
    probabilities instead of counts.

    Settings sharing a preparation are evaluated together from one channel
    output.
    """
    if shots is not None and shots < 1:
        raise ValueError(f"shots should be at least 1, got {shots}")
    groups: Dict[str, List[Setting]] = {}
    order: List[str] = []
    seen = set()
    for setting in settings:
        if setting.key in seen:
            continue
        seen.add(setting.key)
        order.append(setting.key)
        prep_key = setting_key(setting.preparation.amplitudes,
                               setting.preparation.amplitudes)
        groups.setdefault(prep_key, []).append(setting)

    def measure(group: List[Setting]) -> List[MeasurementRecord]:
        preparation = group[0].preparation.amplitudes
        projectors = np.array([s.projector.amplitudes for s in group])
        exact = _checked_probabilities(ch.survival(preparation,
                                                   projectors))[0]
        records = []
        for setting, p in zip(group, exact):
            if shots is None:
                records.append(MeasurementRecord(setting, None, None,
                                                 float(p)))
            else:
                rng = _setting_rng(seed, setting.key)
                records.append(MeasurementRecord(
                    setting, shots, simulate_counts(p, shots, rng)))
        return records

    measured = threaded_map(measure, list(groups.values()), threads)
    by_key = {r.setting.key: r for group in measured for r in group}
    dataset = MeasurementDataset(channel_spec, seed, shots, dims,
                                 (by_key[key] for key in order), config_hash)
    _log.info("measured %d settings with %s shots each", len(dataset),
              "exact" if shots is None else shots)
    return dataset


def _open_text(path: Union[str, os.PathLike], mode: str):
    if os.fspath(path).endswith(".gz"):
        # One thread keeps the compressed stream byte-identical.
        return gzip_ng_threaded.open(path, mode + "t", encoding="utf-8",
                                     threads=1)
    return builtins.open(path, mode, encoding="utf-8")


def store_dataset(dataset: MeasurementDataset,
                  path: Union[str, os.PathLike]):
    try:
        with _open_text(path, "w") as handle:
            for line in dataset.lines():
                handle.write(line + "\n")
    except OSError as error:
        raise OSError(error.errno or errno.EIO,
                      f"cannot write dataset {os.fspath(path)}: "
                      f"{error.strerror or error}") from error
    _log.info("stored %d settings in %s", len(dataset), os.fspath(path))


def load_dataset(path: Union[str, os.PathLike]) -> MeasurementDataset:
    try:
        with _open_text(path, "r") as handle:
            lines = [line for line in handle.read().split("\n") if line]
    except OSError as error:
        raise OSError(error.errno or errno.EIO,
                      f"cannot read dataset {os.fspath(path)}: "
                      f"{error.strerror or error}") from error
    if not lines:
        raise ValueError(f"{os.fspath(path)} is empty")
    try:
        header = json.loads(lines[0])
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"{os.fspath(path)} has dataset schema "
                             f"{version!r}, expected {SCHEMA_VERSION}")
        records = [MeasurementRecord.from_json(json.loads(line))
                   for line in lines[1:]]
        dataset = MeasurementDataset(header.get("channel"), header["seed"],
                                     header.get("shots"), header.get("dims"),
                                     records, header.get("config_hash"))
    except (json.JSONDecodeError, KeyError, TypeError) as error:
        raise ValueError(f"{os.fspath(path)} is not a valid dataset: "
                         f"{error}") from error
    _log.info("loaded %d settings from %s", len(dataset), os.fspath(path))
    return dataset


def audit_dataset(dataset: MeasurementDataset,
                  settings: Iterable[Setting]) -> List[Setting]:
    """The settings an estimation would need that ``dataset`` lacks."""
    return [s for s in settings if s not in dataset]
