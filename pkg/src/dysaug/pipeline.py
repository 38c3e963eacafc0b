"""Stage helpers and the end-to-end run.

Stages: augment -> transfer -> analyze -> classify -> evaluate. Each stage
writes into ``<out>/<stage>.partial`` and is renamed to ``<out>/<stage>``
only on success, so a failing stage never touches completed outputs. Every
random choice is seeded from (global seed, stage, utt_id), which keeps
outputs identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

from . import augment as aug
from . import classify as clf
from . import transfer as tr
from .asr_eval import aggregate, pairs_from_manifest, read_hypotheses
from .audio import CANONICAL_RATE, load, write_wav
from .errors import StageError, ValidationError
from .manifest import Manifest, ingest, with_paths, write_manifest
from .prosody import FEATURE_NAMES, extract_profile
from .reports import emit_report, ratio_report, write_json
from .seeding import derive_seed

log = logging.getLogger(__name__)

WORKERS_ENV = "DYSAUG_WORKERS"
STAGES = ("augment", "transfer", "analyze", "classify", "evaluate")


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, workers=1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- stage helpers

def augment_manifest(manifest: Manifest, method, seed, out_dir, workers=1, rate=CANONICAL_RATE):
    """Write one perturbed copy per utterance plus ``plan.json`` and ``manifest.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    plan = aug.build_plan(manifest, method, seed)

    def work(rec):
        spec = plan.specs[rec.utt_id]
        name = f"{rec.utt_id}.wav"
        write_wav(spec.apply(load(manifest.resolve(rec), rate)), os.path.join(out_dir, name))
        return {"utt_id": rec.utt_id, "method": method, "ratio": spec.ratio, "output_path": name}

    entries = parallel_map(work, manifest, workers)
    write_json({"seed": seed, "method": method, "specs": entries}, os.path.join(out_dir, "plan.json"))
    out = with_paths(manifest, {e["utt_id"]: e["output_path"] for e in entries}, out_dir)
    write_manifest(out, os.path.join(out_dir, "manifest.csv"))
    return plan, out


def load_targets(path, rate=CANONICAL_RATE):
    """Read ``[{target_id, gender, wav_path}]`` and load each target's audio."""
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    if not isinstance(items, list) or not items:
        raise ValidationError(f"{path}: expected a non-empty JSON list of targets")
    root = os.path.dirname(os.path.abspath(path))
    out = []
    for it in items:
        missing = [k for k in ("target_id", "gender", "wav_path") if k not in it]
        if missing:
            raise ValidationError(f"{path}: target entry lacks {', '.join(missing)}")
        wav = it["wav_path"] if os.path.isabs(it["wav_path"]) else os.path.join(root, it["wav_path"])
        out.append((str(it["target_id"]), it["gender"], load(wav, rate)))
    return out


def transfer_manifest(manifest: Manifest, targets, modes, seed, out_dir, workers=1, rate=CANONICAL_RATE):
    """Pair sources with targets and convert in each requested mode.

    Both modes share one pairing; speaker-prosody output is the prosody stage
    applied to the speaker-only output. Writes ``<mode>/<utt>.wav``,
    ``<mode>/jobs.json`` and ``<mode>/manifest.csv``.
    """
    modes = list(modes)
    pool = tr.build_target_pool(targets)
    jobs = tr.pair_sources(manifest, pool, seed)
    records = manifest.by_id()
    for m in modes:
        os.makedirs(os.path.join(out_dir, m), exist_ok=True)

    def work(job):
        rec = records[job.utt_id]
        target = pool[job.target_id].profile
        speaker = {"stage": "speaker"}
        y = tr.convert_speaker(load(manifest.resolve(rec), rate), target, speaker)
        outputs = {tr.SPEAKER_ONLY: (y, [speaker])}
        if tr.SPEAKER_PROSODY in modes:
            prosody = {"stage": "prosody"}
            outputs[tr.SPEAKER_PROSODY] = (tr.convert_prosody(y, target, prosody), [speaker, prosody])
        logs = {}
        for m in modes:
            z, stages = outputs[m]
            name = f"{job.utt_id}.wav"
            write_wav(z, os.path.join(out_dir, m, name))
            logs[m] = {"utt_id": job.utt_id, "target_id": job.target_id, "mode": m,
                       "r": speaker["r"], "stages": stages, "output_path": name}
        return logs

    results = parallel_map(work, jobs, workers)
    manifests = {}
    for m in modes:
        entries = [r[m] for r in results]
        write_json({"seed": seed, "pool_size": pool.effective_size,
                    "targets": [{"target_id": e.target_id, "gender": e.gender, "multiplicity": e.multiplicity}
                                for e in pool.entries],
                    "jobs": entries}, os.path.join(out_dir, m, "jobs.json"))
        sub = os.path.join(out_dir, m)
        manifests[m] = with_paths(manifest, {e["utt_id"]: e["output_path"] for e in entries}, sub)
        write_manifest(manifests[m], os.path.join(sub, "manifest.csv"))
    return jobs, manifests


def analyze_manifest(manifest: Manifest, method="", workers=1, rate=CANONICAL_RATE):
    def work(rec):
        profile = extract_profile(load(manifest.resolve(rec), rate))
        return clf.FeatureRow(rec.utt_id, rec.speaker_id, rec.label, tuple(profile.feature_vector()),
                              rec.level, rec.severity, method)

    return parallel_map(work, manifest, workers)


def evaluate_manifest(manifest, hypotheses_path, pooling="corpus"):
    return aggregate(pairs_from_manifest(manifest, read_hypotheses(hypotheses_path)), pooling=pooling)


def save_classifiers(classifiers, path):
    write_json({"kind": "gbt", "feature_names": list(FEATURE_NAMES),
                "regimes": {k: (None if v is None else v.to_dict()) for k, v in classifiers.items()}}, path)
    return path


def load_classifiers(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("kind") != "gbt":
        raise ValidationError(f"{path}: not a classifier file")
    return {k: (None if v is None else clf.Classifier.from_dict(v)) for k, v in d["regimes"].items()}


# ---------------------------------------------------------------- run

@dataclass
class RunConfig:
    out_dir: str = "run_out"
    sources: str = ""
    corpus: str = ""
    targets: str = ""
    hypotheses: str = ""
    seed: int = 0
    canonical_rate: int = CANONICAL_RATE
    workers: int = field(default_factory=default_workers)
    augment_methods: tuple = aug.METHODS
    transfer_modes: tuple = tr.MODES
    stages: tuple = STAGES
    grid_search: bool = False
    test_fraction: float = 0.2
    pooling: str = "corpus"

    def validate(self):
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValidationError(f"unknown stage(s): {', '.join(sorted(unknown))}")
        bad = set(self.augment_methods) - set(aug.METHODS)
        if bad:
            raise ValidationError(f"unknown augment method(s): {', '.join(sorted(bad))}")
        bad = set(self.transfer_modes) - set(tr.MODES)
        if bad:
            raise ValidationError(f"unknown transfer mode(s): {', '.join(sorted(bad))}")
        if self.workers < 1 or self.canonical_rate <= 0:
            raise ValidationError("workers and canonical_rate must be positive")
        return self


PATH_KEYS = ("out_dir", "sources", "corpus", "targets", "hypotheses")


def load_config(path, **overrides) -> RunConfig:
    """Read a flat TOML key = value file; relative paths resolve against its directory."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"{path}: unknown config key(s): {', '.join(sorted(unknown))}")
    base = os.path.dirname(os.path.abspath(path))
    for k in PATH_KEYS:
        if raw.get(k) and not os.path.isabs(raw[k]):
            raw[k] = os.path.join(base, raw[k])
    for k in ("augment_methods", "transfer_modes", "stages"):
        if k in raw:
            raw[k] = tuple(raw[k])
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**raw).validate()


def file_digests(root):
    out = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            full = os.path.join(dirpath, name)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, root).replace(os.sep, "/")] = hashlib.sha256(fh.read()).hexdigest()
    return out


class _Run:
    def __init__(self, config: RunConfig, manifests):
        self.cfg = config
        self.out = config.out_dir
        self.m = manifests
        self.generated = {}
        self.features = {}
        self.summary = {"config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(config).items()},
                        "seeds": {}, "counts": {}, "timings": {}, "stages": {}, "outputs": {}}

    def seed(self, *keys):
        s = derive_seed(self.cfg.seed, *keys)
        self.summary["seeds"]["/".join(keys)] = s
        return s

    def stage(self, name, fn):
        final = os.path.join(self.out, name)
        partial = final + ".partial"
        shutil.rmtree(partial, ignore_errors=True)
        os.makedirs(partial)
        t0 = time.perf_counter()
        try:
            fn(partial, final)
        except Exception as exc:
            with open(os.path.join(partial, "FAILED"), "w") as fh:
                fh.write(f"{type(exc).__name__}: {exc}\n")
            self.summary["stages"][name] = "failed"
            self.write_summary("failed")
            raise StageError(name, exc) from exc
        shutil.rmtree(final, ignore_errors=True)
        os.replace(partial, final)
        self.summary["timings"][name] = round(time.perf_counter() - t0, 3)
        self.summary["stages"][name] = "ok"
        for rel, digest in file_digests(final).items():
            self.summary["outputs"][f"{name}/{rel}"] = digest
        self.write_summary("running")

    def write_summary(self, status):
        self.summary["status"] = status
        write_json(self.summary, os.path.join(self.out, "summary.json"))

    # stages -------------------------------------------------------------

    def augment(self, partial, final):
        for method in self.cfg.augment_methods:
            _, man = augment_manifest(self.m["sources"], method, self.seed("augment", method),
                                      os.path.join(partial, method), self.cfg.workers, self.cfg.canonical_rate)
            self.generated[method] = Manifest(man, os.path.join(final, method))
            self.summary["counts"][f"augment/{method}"] = len(man)

    def transfer(self, partial, final):
        targets = load_targets(self.cfg.targets, self.cfg.canonical_rate)
        jobs, mans = transfer_manifest(self.m["sources"], targets, self.cfg.transfer_modes,
                                       self.seed("transfer"), partial, self.cfg.workers, self.cfg.canonical_rate)
        for mode, man in mans.items():
            self.generated[mode] = Manifest(man, os.path.join(final, mode))
            self.summary["counts"][f"transfer/{mode}"] = len(jobs)

    def analyze(self, partial, final):
        w, rate = self.cfg.workers, self.cfg.canonical_rate
        if "corpus" in self.m:
            self.features["corpus"] = analyze_manifest(self.m["corpus"], "corpus", w, rate)
            clf.write_features(self.features["corpus"], os.path.join(partial, "corpus_features.csv"))
        generated = []
        if "sources" in self.m:
            generated += analyze_manifest(self.m["sources"], "none", w, rate)
        for method, man in self.generated.items():
            generated += analyze_manifest(man, method, w, rate)
        if generated:
            self.features["generated"] = generated
            clf.write_features(generated, os.path.join(partial, "generated_features.csv"))
        self.summary["counts"]["analyze"] = sum(len(v) for v in self.features.values())

    def classify(self, partial, final):
        if "corpus" not in self.features:
            raise ValidationError("classify needs corpus features (enable analyze and set corpus)")
        models = clf.train_regimes(self.features["corpus"], self.cfg.test_fraction, self.seed("classify"),
                                   self.cfg.grid_search)
        save_classifiers(models, os.path.join(partial, "model.json"))
        f1s = {k: (None if v is None else v.test_f1) for k, v in models.items()}
        if self.features.get("generated"):
            report = ratio_report(clf.ratio_table(models, self.features["generated"]), f1s)
            emit_report(report, os.path.join(partial, "table3.json"))
            emit_report(report, os.path.join(partial, "table3.csv"))

    def evaluate(self, partial, final):
        report = evaluate_manifest(self.m["corpus"], self.cfg.hypotheses, self.cfg.pooling)
        label = self.m["corpus"][0].language
        emit_report(report, os.path.join(partial, "cer_report.json"), row_label=label)
        emit_report(report, os.path.join(partial, "table2.csv"), row_label=label)


def run(config: RunConfig, manifests=None):
    """Execute the enabled stages in order; returns the run summary dict."""
    config.validate()
    manifests = dict(manifests or {})
    for key in ("sources", "corpus"):
        path = getattr(config, key)
        if key not in manifests and path:
            manifests[key] = ingest(path)
        if key in manifests and not manifests[key]:
            raise ValidationError(f"{key} manifest is empty")
    needs = {"augment": ["sources"], "transfer": ["sources"], "classify": ["corpus"], "evaluate": ["corpus"]}
    for stage in config.stages:
        for key in needs.get(stage, []):
            if key not in manifests:
                raise ValidationError(f"stage {stage!r} needs a {key} manifest")
    if "transfer" in config.stages and not config.targets:
        raise ValidationError("stage 'transfer' needs a targets file")
    if "evaluate" in config.stages and not config.hypotheses:
        raise ValidationError("stage 'evaluate' needs a hypotheses file")

    os.makedirs(config.out_dir, exist_ok=True)
    r = _Run(config, manifests)
    for name in STAGES:
        if name in config.stages:
            r.stage(name, getattr(r, name))
    r.write_summary("ok")
    return r.summary
