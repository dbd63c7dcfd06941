"""End-to-end run: ingest, sample, features, statistics, distances, embeddings.

Each stage is a plain function over the previous stage's output so the CLI
subcommands can stop early. :func:`run_pipeline` chains all of them and
writes a :class:`ReportBundle`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import __version__, kernels
from ..dist_stats import boxplot_summary, ecdf
from ..embed import EmbeddingError, EmbeddingResult, embed, spectral_2d, standardize
from ..features import FeatureSample, FlowTable, available_features, extract_feature, feature_matrix
from ..flow_model import DatasetHandle, DatasetKind, FeatureId
from ..ingest import ParseReport, filter_benign, open_text, parse_flows, resolve_profile, sample_reservoir, split_by_day
from ..metrics import (
    KruskalResult,
    MetricError,
    ScatterCoordinates,
    averaged_distance_matrix,
    kruskal_wallis,
    pairwise_distance_matrix,
    reference_scatter,
    wasserstein_over_pca,
)
from . import svg
from .config import DatasetEntry, RunConfig

log = logging.getLogger(__name__)

FORMATS = ("json", "csv", "svg")
LOG_SCALE_FEATURES = frozenset({FeatureId.FLOW_DURATION, FeatureId.FLOW_SIZE_BYTES, FeatureId.AVG_PACKET_TIME})


class PipelineError(Exception):
    def __init__(self, stage: str, message: str, dataset: str | None = None):
        self.stage = stage
        self.dataset = dataset
        where = f"stage={stage}" + (f" dataset={dataset}" if dataset else "")
        super().__init__(f"[{where}] {message}")


@dataclass
class LoadedDataset:
    handle: DatasetHandle
    records: list  # the analysed sample, stream order
    report: ParseReport
    input_sha256: str

    @property
    def name(self) -> str:
        return self.handle.name


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(entry: DatasetEntry, config: RunConfig) -> LoadedDataset:
    """Parse, keep benign flows and reservoir-sample one dataset."""
    path = config.resolve(entry.path)
    try:
        profile = resolve_profile(entry.profile, Path(config.base_dir))
        with open_text(path) as fh:
            records, report = parse_flows(fh, profile, name=entry.path)
            benign = filter_benign(records, profile, assume_benign=entry.assume_benign)
            seen = 0

            def counted():
                nonlocal seen
                for r in benign:
                    seen += 1
                    yield r

            sample = sample_reservoir(counted(), config.sample_size, config.seed)
        digest = _sha256(path)
    except Exception as exc:
        raise PipelineError("ingest", str(exc), entry.name) from exc
    if not sample:
        raise PipelineError("ingest", "no benign flows", entry.name)
    handle = DatasetHandle(entry.name, entry.kind, entry.path).as_benign(seen)
    return LoadedDataset(handle, sample, report, digest)


def load_all(config: RunConfig) -> list[LoadedDataset]:
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        return list(pool.map(lambda e: load_dataset(e, config), config.datasets))


def build_tables(datasets: Sequence[LoadedDataset]) -> dict[str, FlowTable]:
    return {
        d.name: FlowTable.from_records(d.records, name=d.name, benign_only=d.handle.benign_only)
        for d in datasets
    }


def select_features(tables: dict[str, FlowTable], wanted: Sequence[FeatureId], warnings: list) -> list[FeatureId]:
    """Requested features available in every dataset."""
    chosen = []
    for f in wanted:
        missing = [n for n, t in tables.items() if f not in available_features(t)]
        if missing:
            warnings.append(f"feature {f.value} dropped: unavailable for {', '.join(missing)}")
        else:
            chosen.append(f)
    return chosen


def compute_samples(tables: dict[str, FlowTable], features: Sequence[FeatureId]) -> dict[FeatureId, dict[str, FeatureSample]]:
    out = {}
    for f in features:
        per = {}
        for name, table in tables.items():
            try:
                per[name] = extract_feature(table, f)
            except Exception as exc:
                raise PipelineError("features", str(exc), name) from exc
        out[f] = per
    return out


def compute_summaries(datasets, features, samples, warnings):
    overall = {}
    by_day = {}
    for f in features:
        overall[f] = {}
        for name, s in samples[f].items():
            if len(s) == 0:
                warnings.append(f"{name}: empty {f.value} sample")
                continue
            overall[f][name] = boxplot_summary(s)
    for d in datasets:
        days = split_by_day(d.records)
        per_day = {}
        for day, recs in days.items():
            table = FlowTable.from_records(recs, name=d.name, benign_only=True)
            summary = {}
            for f in features:
                if f not in available_features(table):
                    continue
                sample = extract_feature(table, f)
                if len(sample):
                    summary[f.value] = boxplot_summary(sample).to_dict()
            per_day[day.isoformat()] = summary
        by_day[d.name] = per_day
    return overall, by_day


@dataclass
class ComparisonResult:
    matrices: dict  # tag -> DistanceMatrix
    kruskal: dict  # feature -> KruskalResult | error str
    scatter: Optional[ScatterCoordinates]
    pca_scatter: Optional[ScatterCoordinates] = None


def default_references(config: RunConfig) -> Optional[tuple]:
    if config.references:
        return config.references
    real = [d.name for d in config.datasets if d.kind is DatasetKind.REAL_WORLD]
    return tuple(real[:2]) if len(real) >= 2 else None


def compare(config, features, samples, vectors, warnings) -> ComparisonResult:
    names = [d.name for d in config.datasets]
    matrices = {}
    kw = {}
    for f in features:
        try:
            matrices[f.value] = pairwise_distance_matrix([samples[f][n] for n in names], f, config.normalize, names)
        except Exception as exc:
            raise PipelineError("metrics", f"{f.value}: {exc}") from exc
        try:
            kw[f.value] = kruskal_wallis([samples[f][n] for n in names])
        except MetricError as exc:
            kw[f.value] = str(exc)
    if not matrices:
        raise PipelineError("metrics", "no feature available in every dataset")
    avg = averaged_distance_matrix([matrices[f.value] for f in features])
    matrices["averaged"] = avg

    refs = default_references(config)
    scatter = pca_scatter = None
    if refs:
        scatter = reference_scatter(avg, *refs)
    else:
        warnings.append("reference scatter skipped: fewer than two real_world datasets and no references set")

    if vectors is not None:
        try:
            pcs = [wasserstein_over_pca(vectors, c) for c in (1, 2)]
        except Exception as exc:
            warnings.append(f"PCA Wasserstein skipped: {exc}")
        else:
            for m in pcs:
                matrices[m.feature] = m
            matrices["pca_averaged"] = averaged_distance_matrix(pcs, tag="pca_averaged")
            if refs:
                pca_scatter = reference_scatter(matrices["pca_averaged"], *refs)
    return ComparisonResult(matrices, kw, scatter, pca_scatter)


def compute_vectors(tables: dict[str, FlowTable], warnings: list) -> Optional[dict[str, np.ndarray]]:
    lacking = [n for n, t in tables.items() if not t.has_l7]
    if lacking:
        warnings.append(f"feature vectors skipped: l7_proto unavailable for {', '.join(lacking)}")
        return None
    try:
        return {n: feature_matrix(t) for n, t in tables.items()}
    except Exception as exc:
        raise PipelineError("features", str(exc)) from exc


SPECTRAL_WIDENINGS = 3


def _spectral_widening(Z: np.ndarray, labels: list, k: int, warnings: list) -> EmbeddingResult:
    # Flow data has many exact duplicates; more than k copies of a vector
    # form an isolated clique, so widen the neighbourhood a few times.
    for attempt in range(SPECTRAL_WIDENINGS + 1):
        k_try = min(k * 2**attempt, Z.shape[0] - 1)
        try:
            result = spectral_2d(Z, labels, k=k_try)
        except EmbeddingError as exc:
            if "disconnected" not in str(exc) or attempt == SPECTRAL_WIDENINGS or k_try == Z.shape[0] - 1:
                raise
            continue
        if k_try != k:
            warnings.append(f"spectral graph disconnected at k={k}; used k={k_try}")
        result.params["requested_k"] = k
        return result
    raise AssertionError("unreachable")


def compute_embeddings(config: RunConfig, vectors: dict[str, np.ndarray], warnings: list) -> dict[str, EmbeddingResult]:
    blocks, labels = [], []
    for name, X in vectors.items():
        rows = sample_reservoir(range(X.shape[0]), config.embedding_sample, config.seed)
        blocks.append(X[rows])
        labels.extend([name] * len(rows))
    try:
        Z, _ = standardize(np.vstack(blocks))
    except EmbeddingError as exc:
        raise PipelineError("embed", str(exc)) from exc
    out = {}
    for method in config.embedding_methods:
        try:
            if method == "spectral":
                result = _spectral_widening(Z, labels, config.spectral_k, warnings)
            else:
                result = embed(method, Z, labels)
        except EmbeddingError as exc:
            warnings.append(f"{method} embedding skipped: {exc}")
            continue
        result.params.setdefault("per_dataset_sample", config.embedding_sample)
        result.params.setdefault("seed", config.seed)
        out[method] = result
    return out


@dataclass
class ReportBundle:
    config: RunConfig
    datasets: list
    features: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    summaries_by_day: dict = field(default_factory=dict)
    ecdfs: dict = field(default_factory=dict)
    comparison: Optional[ComparisonResult] = None
    embeddings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def kinds(self) -> dict:
        return {d.name: d.handle.kind.value for d in self.datasets}

    def provenance(self) -> dict:
        return {
            "tool": "flowbench",
            "version": __version__,
            "config": self.config.to_dict(),
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "datasets": [
                {
                    "name": d.name,
                    "kind": d.handle.kind.value,
                    "source": d.handle.source,
                    "input_sha256": d.input_sha256,
                    "benign_flows": d.handle.flow_count,
                    "sampled_flows": len(d.records),
                    "parse_report": d.report.to_dict(),
                }
                for d in self.datasets
            ],
            "conventions": {
                "std": "population (divide by n)",
                "quantiles": "linear interpolation between order statistics (type 7)",
                "whiskers": "most extreme data within 1.5 IQR of the quartiles",
                "normalization": self.config.normalize,
                "distance": "1-D Wasserstein (integral of |ECDF difference|)",
                "p_value": "chi-squared approximation, df = k - 1",
            },
            "warnings": list(self.warnings),
        }


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def bundle_files(bundle: ReportBundle, formats: Sequence[str] = FORMATS) -> dict[str, str]:
    """Relative path -> file content for every artifact except provenance."""
    files: dict[str, str] = {}
    kinds = bundle.kinds
    want = set(formats)

    if bundle.summaries:
        files["summaries/boxplots.json"] = _dump({
            f.value: {n: s.to_dict() for n, s in per.items()} for f, per in bundle.summaries.items()
        })
        files["summaries/boxplots_by_day.json"] = _dump(bundle.summaries_by_day)
        if "svg" in want:
            for f, per in bundle.summaries.items():
                if per:
                    log_y = f in LOG_SCALE_FEATURES and all(s.whisker_low > 0 for s in per.values())
                    files[f"summaries/{f.value}.svg"] = svg.render_boxplots(f.value, per, f.unit, log_y, kinds)
    for f, per in bundle.ecdfs.items():
        files[f"ecdf/{f.value}.json"] = _dump({"feature": f.value, "unit": f.unit, "datasets": {n: d.to_dict() for n, d in per.items()}})
        if "svg" in want and per:
            log_x = f in LOG_SCALE_FEATURES and all(np.any(d.support > 0) for d in per.values())
            files[f"ecdf/{f.value}.svg"] = svg.render_ecdfs(f.value, per, log_x, kinds)

    comp = bundle.comparison
    if comp is not None:
        for tag, m in comp.matrices.items():
            files[f"matrices/{tag}.json"] = _dump(m.to_dict())
            if "csv" in want:
                files[f"matrices/{tag}.csv"] = m.to_csv()
            if "svg" in want:
                files[f"matrices/{tag}.svg"] = svg.render_heatmap(m)
        files["matrices/kruskal_wallis.json"] = _dump({
            f: (r.to_dict() if isinstance(r, KruskalResult) else {"error": r}) for f, r in comp.kruskal.items()
        })
        for stem, sc in (("scatter", comp.scatter), ("pca_scatter", comp.pca_scatter)):
            if sc is not None:
                files[f"matrices/{stem}.json"] = _dump(sc.to_dict())
                if "svg" in want:
                    files[f"matrices/{stem}.svg"] = svg.render_scatter(sc, kinds)

    for method, res in bundle.embeddings.items():
        files[f"embeddings/{method}.json"] = _dump(res.to_dict())
        if "csv" in want:
            files[f"embeddings/{method}.csv"] = res.to_csv()
        if "svg" in want:
            files[f"embeddings/{method}.svg"] = svg.render_embedding(res, kinds)
    return files


def content_hash(files: dict[str, str]) -> str:
    h = hashlib.sha256()
    for path in sorted(files):
        data = files[path].encode()
        h.update(path.encode() + b"\0" + str(len(data)).encode() + b"\0" + data)
    return h.hexdigest()


def write_tree(files: dict[str, str], out_dir: Path):
    """Write all files into a sibling temp directory, then swap it into place.

    Nothing is left behind if writing fails.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        for rel, text in files.items():
            target = tmp / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8", newline="")
        old = None
        if out_dir.exists():
            old = out_dir.with_name(f".{out_dir.name}.old-{os.getpid()}")
            os.replace(out_dir, old)
        os.replace(tmp, out_dir)
        if old is not None:
            shutil.rmtree(old, ignore_errors=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def finalize(bundle: ReportBundle, formats: Sequence[str] = FORMATS, out_dir: Path | None = None) -> dict[str, str]:
    files = bundle_files(bundle, formats)
    prov = bundle.provenance()
    prov["content_hash"] = content_hash(files)
    prov["backend"] = kernels.BACKEND
    prov["std_normalization"] = "population"  # boxplot std divides by n
    files["provenance.json"] = _dump(prov)
    write_tree(files, out_dir or bundle.config.out_dir)
    return files


def analyse(config: RunConfig, stages: str = "all") -> ReportBundle:
    """Run the stages up to ``stages`` ("features", "compare", "embed" or
    "all") and return the in-memory bundle."""
    datasets = load_all(config)
    bundle = ReportBundle(config, datasets)
    tables = build_tables(datasets)
    features = select_features(tables, config.features, bundle.warnings)
    bundle.features = features
    samples = compute_samples(tables, features)
    bundle.samples = samples
    if stages == "features":
        return bundle

    vectors = compute_vectors(tables, bundle.warnings)

    if stages in ("all", "compare"):
        try:
            bundle.summaries, bundle.summaries_by_day = compute_summaries(datasets, features, samples, bundle.warnings)
            bundle.ecdfs = {f: {n: ecdf(s) for n, s in samples[f].items() if len(s)} for f in features}
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError("stats", str(exc)) from exc
        bundle.comparison = compare(config, features, samples, vectors, bundle.warnings)

    if stages in ("all", "embed") and vectors is not None and config.embedding_methods:
        bundle.embeddings = compute_embeddings(config, vectors, bundle.warnings)
    for w in bundle.warnings:
        log.warning(w)
    return bundle


def run_pipeline(config: RunConfig, formats: Sequence[str] = FORMATS) -> ReportBundle:
    """Full run; writes the bundle to ``config.out_dir``."""
    bundle = analyse(config, "all")
    finalize(bundle, formats)
    return bundle
