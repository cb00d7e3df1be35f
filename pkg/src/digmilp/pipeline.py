"""File-configured end-to-end run: generate, label, train, sample, verify, score.

Every stage writes into the output directory and records the sha256 of each
file it produced in ``MANIFEST.json``. The manifest is rewritten after every
stage, so an aborted run leaves a record of which stages completed.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .analytics import js_similarity, summarize
from .datasets import generate_family
from .exceptions import AssemblyFailure, DigMilpError, ValidationError
from .instance import Status
from .io import store_instances
from .solver import SolverParams, classify
from .validation import check_int, check_real
from .vae import DigMilpGenerator, InferConfig, TrainConfig, label_dataset

log = logging.getLogger(__name__)

MANIFEST = "MANIFEST.json"
STAGES = ("generate", "label", "train", "sample", "verify", "similarity")


@dataclass(frozen=True)
class DatasetSection:
    family: str = "sc"
    count: int = 20
    seed: int = 0
    n_cons: int = 10
    n_vars: int = 20
    density: float = 0.25
    n_items: int = 10
    n_bids: int = 20

    def __post_init__(self):
        if self.family not in ("sc", "ca"):
            raise ValidationError(f"dataset.family must be 'sc' or 'ca', got {self.family!r}")
        check_int(self.count, "dataset.count", 1)
        check_int(self.seed, "dataset.seed", 0)

    def generate(self):
        if self.family == "sc":
            kw = dict(n_cons=self.n_cons, n_vars=self.n_vars, density=self.density)
        else:
            kw = dict(n_items=self.n_items, n_bids=self.n_bids)
        return generate_family(self.family, self.count, self.seed, **kw)


@dataclass(frozen=True)
class AnalyticsSection:
    bins: int = 10
    n_configs: int = 45

    def __post_init__(self):
        check_int(self.bins, "analytics.bins", 1)
        check_int(self.n_configs, "analytics.n_configs", 3)


@dataclass(frozen=True)
class PathsSection:
    out_dir: str = "run"


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    infer: InferConfig = field(default_factory=lambda: InferConfig(gamma=0.1, count=20, seed=0))
    analytics: AnalyticsSection = field(default_factory=AnalyticsSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ValidationError("pipeline config must be a mapping")
        sections = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(d) - set(sections)
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        for name, value in d.items():
            section_type = _section_types()[name]
            if not isinstance(value, dict):
                raise ValidationError(f"config section {name!r} must be a mapping")
            allowed = {f.name for f in dataclasses.fields(section_type)}
            bad = set(value) - allowed
            if bad:
                raise ValidationError(f"unknown keys in {name!r}: {sorted(bad)}")
            try:
                kw[name] = section_type(**value)
            except TypeError as e:
                raise ValidationError(f"config section {name!r}: {e}") from None
        cfg = cls(**kw)
        check_real(cfg.infer.gamma, "infer.gamma", 0, 1, low_open=True)
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        text = path.read_text()
        try:
            doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ValidationError(f"{path}: cannot parse config: {e}") from None
        return cls.from_dict(doc or {})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _section_types():
    return {"dataset": DatasetSection, "train": TrainConfig, "infer": InferConfig,
            "analytics": AnalyticsSection, "paths": PathsSection}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class StageError(DigMilpError):
    """Wraps a failure with the name of the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


class _Manifest:
    def __init__(self, root: Path, cfg: PipelineConfig):
        self.root = root
        self.doc = {"config": cfg.to_dict(), "stages": {}, "complete": False}

    def record(self, stage: str, files):
        hashes = {str(Path(f).relative_to(self.root)): sha256_file(f) for f in sorted(map(Path, files))}
        digest = hashlib.sha256(json.dumps(hashes, sort_keys=True).encode()).hexdigest()
        self.doc["stages"][stage] = {"status": "done", "sha256": digest, "files": hashes}
        self.write()

    def fail(self, stage: str, err: Exception):
        self.doc["stages"][stage] = {"status": "failed", "error": str(err)}
        self.write()

    def write(self):
        (self.root / MANIFEST).write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


def run_pipeline(cfg: PipelineConfig, out_dir=None) -> dict:
    """Run every stage; returns the manifest document."""
    root = Path(out_dir or cfg.paths.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(root, cfg)
    manifest.write()
    state = {}

    def stage(name, fn):
        log.info("stage %s", name)
        try:
            files = fn()
        except Exception as e:
            manifest.fail(name, e)
            raise StageError(name, e) from e
        manifest.record(name, files)

    def generate():
        state["instances"] = cfg.dataset.generate()
        return store_instances(state["instances"], root / "dataset")

    def label():
        state["labels"] = label_dataset(state["instances"])
        return store_instances(state["instances"], root / "labels.json", state["labels"])

    def train():
        t = cfg.train
        gen = DigMilpGenerator(alpha=t.alpha, epochs=t.epochs, batch_size=t.batch_size, lr=t.lr,
                               latent_dim=t.latent_dim, hidden_dim=t.hidden_dim, huber_delta=t.huber_delta,
                               seed=t.seed)
        state["model"] = gen.fit(state["instances"], state["labels"])
        path = root / "model.ckpt"
        gen.save(path)
        return [path]

    def sample():
        inf = cfg.infer
        samples = state["model"].sample(inf.count, gamma=inf.gamma, seed=inf.seed)
        statuses = [classify(s, SolverParams()) for s in samples]
        bad = [s.name for s, st in zip(samples, statuses) if st is not Status.OPTIMAL]
        if bad:
            raise AssemblyFailure(f"{len(bad)} sampled instance(s) are not feasible-bounded: {bad[:5]}")
        state["samples"] = samples
        return store_instances(samples, root / "samples")

    def verify():
        k = len(state["samples"])
        ok = sum(classify(s, SolverParams()) is Status.OPTIMAL for s in state["samples"])
        path = root / "verify.txt"
        path.write_text(f"feasible-bounded: {ok}/{k}\n")
        if ok != k:
            raise AssemblyFailure(f"feasible-bounded: {ok}/{k}")
        return [path]

    def similarity():
        report = js_similarity(state["instances"], [state["samples"]], bins=cfg.analytics.bins,
                               names=[f"digmilp-gamma-{cfg.infer.gamma}"])[0]
        doc = {"report": report.to_dict(), "original_means": summarize(state["instances"]),
               "sample_means": summarize(state["samples"])}
        path = root / "similarity.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return [path]

    for name, fn in zip(STAGES, (generate, label, train, sample, verify, similarity)):
        stage(name, fn)
    manifest.doc["complete"] = True
    manifest.write()
    return manifest.doc
