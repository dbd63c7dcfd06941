"""Run configuration: a sectioned ``key = value`` file.

Example::

    [run]
    sample_size = 50000
    seed = 42
    features = all
    normalize = minmax
    embedding_methods = pca, lda, mds, spectral
    embedding_sample = 2000
    spectral_k = 10
    references = UQ, ISP
    out = report

    [dataset UQ]
    path = uq_flows.csv
    profile = nprobe
    kind = real_world
    assume_benign = true

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

from ..embed import METHODS
from ..flow_model import ALL_FEATURES, DatasetKind, FeatureId
from ..metrics import NORMALIZE_MODES

DEFAULT_SAMPLE_SIZE = 50_000
DEFAULT_SEED = 42
DEFAULT_EMBEDDING_SAMPLE = 2_000
DEFAULT_SPECTRAL_K = 10


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    path: str
    profile: str = "nprobe"
    kind: DatasetKind = DatasetKind.SYNTHETIC
    assume_benign: bool = False


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple
    sample_size: int = DEFAULT_SAMPLE_SIZE
    seed: int = DEFAULT_SEED
    features: tuple = ALL_FEATURES
    normalize: str = "minmax"
    embedding_methods: tuple = METHODS
    embedding_sample: int = DEFAULT_EMBEDDING_SAMPLE
    spectral_k: int = DEFAULT_SPECTRAL_K
    references: Optional[tuple] = None
    out: str = "report"
    base_dir: str = "."
    workers: int = 4

    def __post_init__(self):
        names = [d.name for d in self.datasets]
        if len(names) < 2:
            raise ConfigError("at least 2 datasets are required for comparisons")
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")
        if self.sample_size < 1 or self.embedding_sample < 1:
            raise ConfigError("sample sizes must be positive")
        if self.normalize not in NORMALIZE_MODES:
            raise ConfigError(f"normalize must be one of {NORMALIZE_MODES}")
        bad = [m for m in self.embedding_methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown embedding methods {bad}; choose from {METHODS}")
        if self.references is not None:
            if len(self.references) != 2:
                raise ConfigError("references must name exactly two datasets")
            missing = [r for r in self.references if r not in names]
            if missing:
                raise ConfigError(f"references {missing} are not configured datasets")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def out_dir(self) -> Path:
        return self.resolve(self.out)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d.pop("workers")
        d.pop("out")  # location does not affect content
        d["datasets"] = [{**asdict(e), "kind": e.kind.value} for e in self.datasets]
        d["features"] = [f.value for f in self.features]
        d["embedding_methods"] = list(self.embedding_methods)
        d["references"] = list(self.references) if self.references else None
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


def _bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_features(value) -> tuple:
    if isinstance(value, str):
        value = _list(value)
    if not value or list(value) == ["all"]:
        return ALL_FEATURES
    try:
        chosen = {FeatureId.parse(v) for v in value}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return tuple(f for f in ALL_FEATURES if f in chosen)


def _int(section, key, default):
    try:
        return section.getint(key, fallback=default)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {section.get(key)!r}") from None


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None

    datasets = []
    for section in parser.sections():
        if section == "run":
            continue
        m = re.fullmatch(r"dataset[:\s]\s*(\S.*)", section)
        if not m:
            raise ConfigError(f"unknown section [{section}]")
        name = m.group(1).strip()
        s = parser[section]
        if "path" not in s:
            raise ConfigError(f"[{section}] needs a path")
        try:
            kind = DatasetKind(s.get("kind", "synthetic").strip())
        except ValueError:
            raise ConfigError(f"[{section}] kind must be synthetic or real_world") from None
        datasets.append(
            DatasetEntry(
                name=name,
                path=s["path"].strip(),
                profile=s.get("profile", "nprobe").strip(),
                kind=kind,
                assume_benign=_bool(s.get("assume_benign", "false"), f"[{section}] assume_benign"),
            )
        )

    run = parser["run"] if parser.has_section("run") else parser[parser.default_section]
    refs = _list(run.get("references", ""))
    return RunConfig(
        datasets=tuple(datasets),
        sample_size=_int(run, "sample_size", DEFAULT_SAMPLE_SIZE),
        seed=_int(run, "seed", DEFAULT_SEED),
        features=parse_features(run.get("features", "all")),
        normalize=run.get("normalize", "minmax").strip(),
        embedding_methods=tuple(_list(run.get("embedding_methods", ",".join(METHODS)))),
        embedding_sample=_int(run, "embedding_sample", DEFAULT_EMBEDDING_SAMPLE),
        spectral_k=_int(run, "spectral_k", DEFAULT_SPECTRAL_K),
        references=tuple(refs) if refs else None,
        out=run.get("out", "report").strip(),
        base_dir=str(base_dir),
        workers=_int(run, "workers", 4),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
