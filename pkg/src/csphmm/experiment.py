"""End-to-end experiment: enroll, identify, tabulate, test, sweep, cross-validate.

Configuration is an INI file with one section per stage.  Every field of
:class:`FeatureConfig`, :class:`ModelConfig` and :class:`SynthConfig` can be
set, plus the experiment options below::

    [corpus]
    root = corpus
    protocol = true

    [identify]
    variants = LTRSPHMM1, LTRSPHMM2, CSPHMM1, CSPHMM2
    alpha = 0.5

    [evaluate]
    sweep = true
    crossval = false
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .audio import read_wav
from .corpus import CorpusError, CorpusManifest, ManifestEntry, ShoutTransform, SynthConfig, ingest_corpus
from .evaluation import (
    DEFAULT_ALPHAS,
    ScoredTrial,
    TrialRecord,
    accuracy,
    accuracy_table,
    alpha_sweep,
    partition,
    summarize,
    sweep_csv,
    t_statistic,
)
from .features import FeatureConfig, UtteranceFeatures
from .speaker import ModelConfig, Registry, Variant, enroll, score_utterance

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass
class ExperimentConfig:
    corpus_root: str = "corpus"
    manifest: str = ""
    protocol: bool = False
    num_speakers: int = 10
    num_sentences: int = 3
    corpus_seed: int = 20100101
    variants: tuple[Variant, ...] = tuple(Variant)
    alpha: float = 0.5
    normalize: bool = False
    sweep: bool = False
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    crossval: bool = False
    num_subsets: int = 5
    crossval_seed: int = 20100101
    output_dir: str = "results"
    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)


_TOP_LEVEL = {
    "corpus": {"root": "corpus_root", "manifest": "manifest", "protocol": "protocol",
               "num_speakers": "num_speakers", "num_sentences": "num_sentences",
               "seed": "corpus_seed"},
    "identify": {"variants": "variants", "alpha": "alpha", "normalize": "normalize"},
    "evaluate": {"sweep": "sweep", "alphas": "alphas", "crossval": "crossval",
                 "num_subsets": "num_subsets", "seed": "crossval_seed"},
    "output": {"dir": "output_dir"},
}
_NESTED = {"features": "features", "model": "model", "synth": "synth"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(text: str, current):
    if isinstance(current, tuple):
        return tuple(float(v) for v in text.strip("()").split(",") if v.strip())
    if isinstance(current, bool):
        return _parse_bool(text)
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    return text


def _apply(cfg: ExperimentConfig, section: str, key: str, value: str) -> ExperimentConfig:
    if section in _TOP_LEVEL:
        if key not in _TOP_LEVEL[section]:
            raise KeyError(f"unknown option [{section}] {key}")
        attr = _TOP_LEVEL[section][key]
        if attr == "variants":
            parsed = tuple(Variant(v.strip().upper()) for v in value.split(",") if v.strip())
        elif attr == "alphas":
            parsed = tuple(float(v) for v in value.split(",") if v.strip())
        else:
            parsed = _convert(value, getattr(cfg, attr))
        return dataclasses.replace(cfg, **{attr: parsed})
    if section in _NESTED:
        sub = getattr(cfg, _NESTED[section])
        if section == "synth" and key.startswith("shout_"):
            shout = sub.shout
            name = key[len("shout_"):]
            if name not in {f.name for f in dataclasses.fields(shout)}:
                raise KeyError(f"unknown option [{section}] {key}")
            shout = dataclasses.replace(shout, **{name: float(value)})
            sub = dataclasses.replace(sub, shout=shout)
        else:
            if key not in {f.name for f in dataclasses.fields(sub)}:
                raise KeyError(f"unknown option [{section}] {key}")
            sub = dataclasses.replace(sub, **{key: _convert(value, getattr(sub, key))})
        return dataclasses.replace(cfg, **{_NESTED[section]: sub})
    raise KeyError(f"unknown section [{section}]")


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read an INI config (optional) and apply ``section.key=value`` overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise FileNotFoundError(f"config file not found: {path}")
        base = Path(path).resolve().parent
        for section in parser.sections():
            for key, value in parser.items(section):
                cfg = _apply(cfg, section, key, value)
        for attr in ("corpus_root", "output_dir"):
            value = getattr(cfg, attr)
            if value and not Path(value).is_absolute():
                cfg = dataclasses.replace(cfg, **{attr: str(base / value)})
    for item in overrides:
        dotted, sep, value = item.partition("=")
        section, dot, key = dotted.partition(".")
        if not sep or not dot:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        cfg = _apply(cfg, section.strip(), key.strip(), value.strip())
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that :func:`load_config` reads back to the same settings."""
    parser = configparser.ConfigParser()
    for section, mapping in _TOP_LEVEL.items():
        parser[section] = {}
        for key, attr in mapping.items():
            value = getattr(cfg, attr)
            if attr == "variants":
                value = ", ".join(v.value for v in value)
            elif attr == "alphas":
                value = ", ".join(repr(a) for a in value)
            parser[section][key] = str(value).lower() if isinstance(value, bool) else str(value)
    for section, attr in _NESTED.items():
        sub = getattr(cfg, attr)
        parser[section] = {}
        for f in dataclasses.fields(sub):
            value = getattr(sub, f.name)
            if isinstance(value, ShoutTransform):
                for g in dataclasses.fields(value):
                    parser[section][f"shout_{g.name}"] = repr(getattr(value, g.name))
            else:
                parser[section][f.name] = str(value).lower() if isinstance(value, bool) else repr(value)
    import io
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# --------------------------------------------------------------------------


class FeatureCache:
    """Features per corpus file, computed on first use."""

    def __init__(self, manifest: CorpusManifest, config: FeatureConfig):
        self.manifest = manifest
        self.config = config
        self._cache: dict[str, UtteranceFeatures] = {}

    def __getitem__(self, entry: ManifestEntry) -> UtteranceFeatures:
        if entry.path not in self._cache:
            audio = read_wav(self.manifest.resolve(entry))
            self._cache[entry.path] = UtteranceFeatures.from_audio(audio, self.config)
        return self._cache[entry.path]


def enroll_all(train_entries, variant: Variant, cache: FeatureCache,
               model_config: ModelConfig, registry: Registry | None = None) -> Registry:
    """One reference model per (speaker, sentence) from ``train_entries``."""
    registry = Registry() if registry is None else registry
    groups: dict[tuple[str, str], list[ManifestEntry]] = {}
    for e in train_entries:
        groups.setdefault((e.speaker, e.sentence), []).append(e)
    for (spk, sent), entries in sorted(groups.items()):
        entries = sorted(entries, key=lambda e: e.take)
        registry.add(enroll(spk, sent, variant, [cache[e] for e in entries],
                            model_config, cache.config))
    return registry


def score_trials(test_entries, variant: Variant, registry: Registry,
                 cache: FeatureCache) -> list[ScoredTrial]:
    trials = []
    for e in sorted(test_entries):
        models = registry.models(e.sentence, variant)
        if not models:
            raise StageError("identify", f"no {variant.value} models for sentence {e.sentence}")
        if e.speaker not in models:
            logger.warning("%s: true speaker %s is not enrolled for %s", e.path, e.speaker,
                           e.sentence)
        scores = score_utterance(cache[e], models, cache.config)
        trials.append(ScoredTrial(e.path, e.speaker, e.sentence, e.environment, e.gender,
                                  variant.value, scores))
    return trials


def fuse(trials, alpha: float, normalize: bool = False, label: str | None = None):
    records = [t.record(alpha, normalize) for t in trials]
    if label is not None:
        records = [dataclasses.replace(r, variant=label) for r in records]
    return records


def _cv_strata(entry: ManifestEntry):
    return (entry.speaker, entry.sentence, entry.environment, entry.session)


def crossval_subsets(manifest: CorpusManifest, num_subsets: int, seed: int):
    """Stratified random partition: every subset gets an equal share (up to
    one) of each speaker's takes of each sentence, session and environment."""
    short = []
    for spk in manifest.speakers:
        for sent in manifest.sentences:
            n = len(manifest.select(speaker=spk, sentence=sent, session="train"))
            if n and n < num_subsets:
                short.append(f"{spk}/{sent} has {n} training takes")
    if short:
        raise CorpusError([f"cross-validation into {num_subsets} subsets requires at least "
                           f"{num_subsets} training takes per speaker and sentence"] + short)
    return partition(manifest.entries, num_subsets, seed, strata=_cv_strata)


@dataclass
class CrossValResult:
    variant: str
    accuracies: dict[str, list[float]]   # environment -> per-subset accuracy
    subset_sizes: list[int]

    def summary(self) -> dict[str, tuple[float, float]]:
        return {env: summarize(values) for env, values in sorted(self.accuracies.items())}


def cross_validate(manifest: CorpusManifest, variant, num_subsets: int = 5,
                   seed: int = 20100101, cache: FeatureCache | None = None,
                   model_config: ModelConfig = ModelConfig(),
                   features: FeatureConfig = FeatureConfig(), alpha: float = 0.5,
                   normalize: bool = False) -> CrossValResult:
    """Re-enroll on each subset's training takes and test on the rest."""
    variant = Variant(variant)
    cache = FeatureCache(manifest, features) if cache is None else cache
    subsets = crossval_subsets(manifest, num_subsets, seed)
    accuracies: dict[str, list[float]] = {}
    for subset in subsets:
        train = [e for e in subset if e.session == "train"]
        test = [e for e in subset if e.session == "test"]
        registry = enroll_all(train, variant, cache, model_config)
        records = fuse(score_trials(test, variant, registry, cache), alpha, normalize)
        for env in sorted({r.environment for r in records}):
            accuracies.setdefault(env, []).append(
                accuracy(r for r in records if r.environment == env))
    return CrossValResult(variant.value, accuracies, [len(s) for s in subsets])


def _subset_accuracies(records: list[TrialRecord], num_subsets: int, seed: int):
    """Per-subset accuracy per environment over a stratified split of the test
    trials (used for t-tests when cross-validation is off)."""
    out: dict[str, list[float]] = {}
    by_env: dict[str, list[TrialRecord]] = {}
    for r in records:
        by_env.setdefault(r.environment, []).append(r)
    for env, recs in sorted(by_env.items()):
        if len(recs) < num_subsets:
            logger.warning("%s: %d %s trials cannot fill %d subsets; no t-test",
                           recs[0].variant, len(recs), env, num_subsets)
            continue
        recs = sorted(recs, key=lambda r: r.path)
        subsets = partition(recs, num_subsets, seed,
                            strata=lambda r: (r.true_speaker, r.sentence))
        out[env] = [accuracy(s) for s in subsets]
    return out


def _format_t_table(title: str, rows: list[tuple[str, dict]]) -> tuple[str, str]:
    envs = sorted({env for _, by_env in rows for env in by_env})
    text = [title, ""]
    header = f"{'Comparison':<26}" + "".join(f"{e.capitalize():>14}" for e in envs)
    text += [header, "-" * len(header)]
    csv_lines = ["comparison,environment,t_value,sd_pooled,n,significant"]
    for name, by_env in rows:
        line = f"{name:<26}"
        for env in envs:
            res = by_env.get(env)
            line += f"{'-' if res is None else f'{res.t_value:.3f}':>14}"
            if res is not None:
                csv_lines.append(f"{name},{env},{res.t_value:.6f},{res.sd_pooled:.6f},"
                                 f"{res.n},{str(res.significant).lower()}")
        text.append(line)
    return "\n".join(text) + "\n", "\n".join(csv_lines) + "\n"


@dataclass
class ExperimentResult:
    files: dict[str, str]
    records: dict[str, list[TrialRecord]]
    trials: dict[str, list[ScoredTrial]]
    sample_accuracies: dict[str, dict[str, list[float]]]
    crossval: dict[str, CrossValResult]

    @property
    def report(self) -> str:
        return self.files["report.txt"]

    def write(self, output_dir) -> None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (out / name).write_text(text, encoding="utf-8")


def run_experiment(config: ExperimentConfig, manifest: CorpusManifest | None = None,
                   cache: FeatureCache | None = None, write: bool = True) -> ExperimentResult:
    """Enroll every configured variant on the neutral training takes and
    identify every test take; build tables, t-tests and optional extras."""
    if manifest is None:
        try:
            manifest = ingest_corpus(config.corpus_root, config.manifest or None,
                                     protocol=config.protocol)
        except (CorpusError, OSError) as exc:
            raise StageError("ingest", str(exc)) from exc
    cache = FeatureCache(manifest, config.features) if cache is None else cache

    train = [e for e in manifest if e.session == "train" and e.environment == "neutral"]
    test = [e for e in manifest if e.session == "test"]
    if not train or not test:
        raise StageError("ingest", "corpus needs neutral training takes and test takes")

    records: dict[str, list[TrialRecord]] = {}
    acoustic_records: dict[str, list[TrialRecord]] = {}
    trials: dict[str, list[ScoredTrial]] = {}
    for variant in config.variants:
        try:
            registry = enroll_all(train, variant, cache, config.model)
        except Exception as exc:
            raise StageError("enroll", f"{variant.value}: {exc}") from exc
        try:
            trials[variant.value] = score_trials(test, variant, registry, cache)
            records[variant.value] = fuse(trials[variant.value], config.alpha, config.normalize)
            acoustic_records[variant.acoustic_name] = fuse(
                trials[variant.value], 0.0, config.normalize, label=variant.acoustic_name)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("identify", f"{variant.value}: {exc}") from exc

    files: dict[str, str] = {}
    supra = accuracy_table(r for recs in records.values() for r in recs)
    acoustic = accuracy_table(r for recs in acoustic_records.values() for r in recs)
    files["accuracy.csv"] = supra.to_csv()
    files["accuracy_acoustic.csv"] = acoustic.to_csv()

    crossval: dict[str, CrossValResult] = {}
    if config.crossval:
        for variant in config.variants:
            try:
                crossval[variant.value] = cross_validate(
                    manifest, variant, config.num_subsets, config.crossval_seed, cache,
                    config.model, config.features, config.alpha, config.normalize)
            except Exception as exc:
                raise StageError("crossval", f"{variant.value}: {exc}") from exc
        lines = ["variant,environment,mean,std," +
                 ",".join(f"subset{i + 1}" for i in range(config.num_subsets))]
        for name, res in crossval.items():
            for env, (avg, sd) in res.summary().items():
                lines.append(f"{name},{env},{avg:.4f},{sd:.4f}," +
                             ",".join(f"{a:.4f}" for a in res.accuracies[env]))
        files["crossval.csv"] = "\n".join(lines) + "\n"

    # samples for the t-tests: per-subset accuracies
    samples: dict[str, dict[str, list[float]]] = {}
    for name, recs in {**records, **acoustic_records}.items():
        if name in crossval:
            samples[name] = crossval[name].accuracies
        else:
            samples[name] = _subset_accuracies(recs, config.num_subsets, config.crossval_seed)

    def ttests(pairs):
        rows = []
        for a, b in pairs:
            by_env = {}
            for env in sorted(set(samples[a]) & set(samples[b])):
                if len(samples[a][env]) == len(samples[b][env]) >= 2:
                    by_env[env] = t_statistic(samples[a][env], samples[b][env])
            rows.append((f"t({a},{b})", by_env))
        return rows

    names = [v.value for v in config.variants]
    text_parts = [
        supra.to_text("Identification performance (%) with suprasegmental models, "
                      f"alpha = {config.alpha}"),
        acoustic.to_text("Identification performance (%) with acoustic models only"),
    ]
    if "CSPHMM2" in names and len(names) > 1:
        vs_best = [("CSPHMM2", n) for n in names if n != "CSPHMM2"]
        text, csv_text = _format_t_table("t values: CSPHMM2 against the other variants",
                                         ttests(vs_best))
        text_parts.append(text)
        files["ttest_variants.csv"] = csv_text
    text, csv_text = _format_t_table(
        "t values: suprasegmental model against its acoustic model",
        ttests([(v.value, v.acoustic_name) for v in config.variants]))
    text_parts.append(text)
    files["ttest_acoustic.csv"] = csv_text

    if config.sweep:
        lines = ["Accuracy (%) against alpha", ""]
        for name, vtrials in trials.items():
            curves = alpha_sweep(vtrials, config.alphas, config.normalize)
            for env, curve in curves.items():
                files[f"sweep_{name}_{env}.csv"] = sweep_csv(curve)
                lines.append(f"{name} {env}: " +
                             " ".join(f"{a:.1f}:{acc:.1f}" for a, acc in curve))
        text_parts.append("\n".join(lines) + "\n")

    if crossval:
        lines = ["Cross-validation over "
                 f"{config.num_subsets} subsets: mean and standard deviation (%)", ""]
        for name, res in crossval.items():
            for env, (avg, sd) in res.summary().items():
                lines.append(f"{name:<12}{env:<10}{avg:8.2f}{sd:8.2f}")
        text_parts.append("\n".join(lines) + "\n")

    trial_lines = ["variant,path,true_speaker,predicted_speaker,sentence,environment,gender,alpha"]
    for recs in records.values():
        for r in recs:
            trial_lines.append(f"{r.variant},{r.path},{r.true_speaker},{r.predicted_speaker},"
                               f"{r.sentence},{r.environment},{r.gender},{r.alpha}")
    files["trials.csv"] = "\n".join(trial_lines) + "\n"
    files["report.txt"] = "\n".join(text_parts)
    files["config.ini"] = dump_config(config)

    result = ExperimentResult(files, records, trials, samples, crossval)
    if write:
        result.write(config.output_dir)
    return result
