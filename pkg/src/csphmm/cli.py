"""Command-line entry point: ``csphmm <subcommand> [--config FILE] [--set s.k=v ...]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .audio import read_wav
from .corpus import CorpusError, ingest_corpus, synth_corpus
from .experiment import (
    FeatureCache,
    StageError,
    cross_validate,
    enroll_all,
    load_config,
    run_experiment,
)
from .features import UtteranceFeatures
from .speaker import Registry, Variant, identify

logger = logging.getLogger("csphmm")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config option")
    parser.add_argument("--corpus", help="corpus root (same as --set corpus.root=...)")
    parser.add_argument("--output", help="output directory (same as --set output.dir=...)")
    parser.add_argument("-v", "--verbose", action="store_true")


def _config(args):
    overrides = list(args.overrides)
    if args.corpus:
        overrides.append(f"corpus.root={args.corpus}")
    if args.output:
        overrides.append(f"output.dir={args.output}")
    return load_config(args.config, overrides)


def _manifest(cfg):
    return ingest_corpus(cfg.corpus_root, cfg.manifest or None, protocol=cfg.protocol)


def cmd_synth_corpus(args) -> int:
    cfg = _config(args)
    manifest = synth_corpus(cfg.corpus_root, cfg.num_speakers, cfg.num_sentences,
                            cfg.corpus_seed, cfg.synth)
    print(f"wrote {len(manifest)} utterances to {cfg.corpus_root}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _config(args)
    manifest = _manifest(cfg)
    sessions = {}
    for e in manifest:
        sessions[(e.environment, e.session)] = sessions.get((e.environment, e.session), 0) + 1
    print(f"{len(manifest)} utterances, {len(manifest.speakers)} speakers, "
          f"{len(manifest.sentences)} sentences")
    for (env, session), n in sorted(sessions.items()):
        print(f"  {env}/{session}: {n}")
    return 0


def cmd_enroll(args) -> int:
    cfg = _config(args)
    manifest = _manifest(cfg)
    models_dir = Path(args.models or Path(cfg.output_dir) / "registry")
    cache = FeatureCache(manifest, cfg.features)
    train = [e for e in manifest if e.session == "train" and e.environment == "neutral"]
    registry = Registry(models_dir)
    for variant in cfg.variants:
        enroll_all(train, variant, cache, cfg.model, registry)
    print(f"enrolled {len(registry)} models into {models_dir}")
    return 0


def cmd_identify(args) -> int:
    cfg = _config(args)
    registry = Registry.load(args.models)
    variant = Variant(args.variant.upper()) if args.variant else cfg.variants[0]
    alpha = cfg.alpha if args.alpha is None else args.alpha
    for wav in args.wav:
        feats = UtteranceFeatures.from_audio(read_wav(wav), cfg.features)
        result = identify(feats, args.sentence, variant, alpha, registry, cfg.normalize,
                          cfg.features)
        margin = "inf" if result.margin is None else f"{result.margin:.3f}"
        print(f"{wav}\t{result.winner}\tmargin={margin}" + ("\ttie" if result.tie else ""))
        if args.verbose:
            for spk, score in result.ranked:
                print(f"  {spk}\tfused={score.fused:.3f}\tacoustic={score.acoustic_logp:.3f}"
                      f"\tprosodic={score.prosodic_logp:.3f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    result = run_experiment(cfg)
    print(result.report)
    print(f"results written to {cfg.output_dir}")
    return 0


def cmd_sweep_alpha(args) -> int:
    cfg = dataclasses.replace(_config(args), sweep=True)
    result = run_experiment(cfg)
    print(result.report)
    return 0


def cmd_crossval(args) -> int:
    cfg = _config(args)
    manifest = _manifest(cfg)
    cache = FeatureCache(manifest, cfg.features)
    lines = ["variant,environment,mean,std"]
    for variant in cfg.variants:
        res = cross_validate(manifest, variant, cfg.num_subsets, cfg.crossval_seed, cache,
                             cfg.model, cfg.features, cfg.alpha, cfg.normalize)
        for env, (avg, sd) in res.summary().items():
            lines.append(f"{variant.value},{env},{avg:.4f},{sd:.4f}")
    text = "\n".join(lines) + "\n"
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "crossval.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    cfg = _config(args)
    path = Path(cfg.output_dir) / "report.txt"
    if not path.exists():
        print(f"error: no report at {path}; run 'evaluate' first", file=sys.stderr)
        return 1
    print(path.read_text(encoding="utf-8"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csphmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "synth-corpus": (cmd_synth_corpus, "generate a synthetic neutral/shouted corpus"),
        "ingest": (cmd_ingest, "validate a corpus manifest and its WAV files"),
        "enroll": (cmd_enroll, "train reference models and save them"),
        "identify": (cmd_identify, "identify the speaker of WAV files"),
        "evaluate": (cmd_evaluate, "run the full experiment and write reports"),
        "sweep-alpha": (cmd_sweep_alpha, "experiment plus accuracy against alpha"),
        "crossval": (cmd_crossval, "cross-validated accuracy per variant"),
        "report": (cmd_report, "print the report of a finished run"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(func=func)
        if name in ("enroll", "identify"):
            p.add_argument("--models", required=name == "identify",
                           help="registry directory")
        if name == "identify":
            p.add_argument("--sentence", required=True)
            p.add_argument("--variant")
            p.add_argument("--alpha", type=float)
            p.add_argument("wav", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
