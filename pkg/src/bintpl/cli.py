"""Command-line interface for bintpl.

Commands:
    db build    index library binaries or manifests into a TPL database
    extract     turn an ELF binary (or a manifest) into a manifest file
    train       train the function embedding model
    scan        detect libraries and versions in target binaries
    eval        run the detection variants on a synthetic corpus
    corpus gen  generate a seeded synthetic corpus

Exit status: 0 success, 1 error, 2 finished with skipped inputs.
"""

import argparse
import json
import logging
import multiprocessing
import sys
import time
from multiprocessing.connection import wait
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from bintpl.config import Config, load_config, with_overrides
from bintpl.detection import Detector
from bintpl.embedding import EmbeddingModel, train_with_history
from bintpl.embedding.train import split_pairs
from bintpl.errors import BintplError, ConfigurationError, ElfParseError, IntegrityError, ManifestValidationError
from bintpl.evaluation import (
    VARIANTS,
    CorpusSpec,
    build_training_pairs,
    generate_corpus,
    load_corpus,
    load_ground_truth,
    pair_metrics,
    run_ablation,
    write_corpus,
)
from bintpl.evaluation.ablation import VARIANT_ALIASES
from bintpl.evaluation.corpus import GROUND_TRUTH_FILE
from bintpl.extractors import detect_kind, get_extractor
from bintpl.featuredb import TplDatabase
from bintpl.features import BinaryFeatureSet
from bintpl.formats.manifest import write_manifest
from bintpl.formats.metrics import format_metrics_table, write_metrics
from bintpl.formats.report import write_reports
from bintpl.reporting import build_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

TRAINING_PAIRS = 2400

# path, extractor kind, library, version
InputEntry = Tuple[Path, str, Optional[str], Optional[str]]


# -- shared helpers ---------------------------------------------------------

def _string_options(config: Config) -> dict:
    return config.strings.model_dump()


def _extract(path: str, kind: str, library: Optional[str], version: Optional[str], options: dict) -> BinaryFeatureSet:
    """Extract one input (runs in a child process)."""
    return get_extractor(kind, **options).extract(path, library=library, version=version)


def _run_extraction(conn, extract, arguments) -> None:
    """Child process body: send back the feature set or the exception raised."""
    try:
        conn.send(extract(*arguments))
    except Exception as e:
        conn.send(e)
    finally:
        conn.close()


Outcome = Union[BinaryFeatureSet, BaseException]


def extract_inputs(inputs: List[InputEntry], options: dict, workers: int, timeout: float) -> Dict[Path, Outcome]:
    """Extract every input in its own process, at most workers at a time.

    Each extraction is timed from its own start. One still running after
    timeout seconds is terminated and its outcome is a TimeoutError.

    Returns:
        Per input path, the feature set or the exception its extraction raised
    """
    # fork keeps the parent's module state, including a replaced _extract
    methods = multiprocessing.get_all_start_methods()
    context = multiprocessing.get_context("fork" if "fork" in methods else None)
    pending = list(inputs)
    running: Dict[Any, Tuple[Path, Any, float]] = {}
    outcomes: Dict[Path, Outcome] = {}

    while pending or running:
        while pending and len(running) < workers:
            path, kind, library, version = pending.pop(0)
            reader, writer = context.Pipe(duplex=False)
            process = context.Process(
                target=_run_extraction,
                args=(writer, _extract, (str(path), kind, library, version, options)),
                daemon=True,
            )
            process.start()
            writer.close()
            running[reader] = (path, process, time.monotonic() + timeout)

        next_deadline = min(deadline for _, _, deadline in running.values())
        for reader in wait(list(running), timeout=max(0.0, next_deadline - time.monotonic())):
            path, process, _ = running.pop(reader)
            try:
                outcomes[path] = reader.recv()
            except EOFError:
                process.join()
                outcomes[path] = IntegrityError(f"extraction process died (exit code {process.exitcode})")
            reader.close()
            process.join()

        now = time.monotonic()
        for reader, (path, process, deadline) in list(running.items()):
            if now >= deadline:
                process.terminate()
                process.join()
                reader.close()
                del running[reader]
                outcomes[path] = TimeoutError(f"extraction exceeded {timeout / 60.0:g} minutes")
    return outcomes


def discover_inputs(root: Path) -> List[InputEntry]:
    """Extractable files under root with the provenance implied by their location.

    Files laid out as <library>/<version>/<binary> take library and version
    from the path; manifests may carry their own provenance instead.
    """
    found = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        try:
            kind = detect_kind(path)
        except (ValueError, OSError):
            logger.debug(f"Skipping {path}: not an input")
            continue
        parts = path.relative_to(root).parts
        library, version = (parts[-3], parts[-2]) if len(parts) >= 3 else (None, None)
        found.append((path, kind, library, version))
    return found


def load_model(path: Optional[Path], required: bool) -> Optional[EmbeddingModel]:
    """Load the embedding model, or None when no path is configured.

    Raises:
        ConfigurationError: If required and no path is configured, or the file is missing
    """
    if path is None:
        if required:
            raise ConfigurationError("An embedding model is required: pass --model or set paths.model")
        return None
    if not Path(path).exists():
        raise ConfigurationError(f"Model checkpoint not found: {path}")
    model = EmbeddingModel.load(path)
    logger.info(f"Loaded model {path} (p={model.embedding_dim}, T={model.iterations})")
    return model


def fit_model(units: List[BinaryFeatureSet], config: Config, pairs: int, strength: float):
    """Train on recompiled variants of the units' functions.

    Returns:
        (model, held-out PairMetrics)
    """
    samples = build_training_pairs(units, pairs, strength, config.seed)
    training, validation = split_pairs(samples, config.embedding.validation_fraction, np.random.default_rng(config.seed))
    model, _ = train_with_history(training, config.embedding, config.seed, validation_pairs=validation)
    metrics = pair_metrics(model, validation, config.retrieval.pair_threshold)
    logger.info(
        f"Held-out pairs: AUC {metrics.auc:.3f}, accuracy {metrics.accuracy:.3f}, "
        f"recall@{config.retrieval.pair_threshold} {metrics.recall:.3f}"
    )
    return model, metrics


def _corpus_path(argument: Optional[str], config: Config) -> Path:
    path = argument or config.paths.corpus
    if path is None:
        raise ConfigurationError("No corpus: pass CORPUS or set paths.corpus")
    return Path(path)


def _corpus_units_dir(path: Path) -> Path:
    return path / "units" if (path / "units").is_dir() else path


# -- commands ---------------------------------------------------------------

def cmd_db_build(args, config: Config) -> int:
    """Index every input under args.input into a database at args.db."""
    input_dir = Path(args.input)
    db_path = args.db or config.paths.db
    if db_path is None:
        raise ConfigurationError("No database path: pass DB or set paths.db")
    if not input_dir.is_dir():
        raise ConfigurationError(f"Input directory not found: {input_dir}")

    model = load_model(args.model or config.paths.model, required=False)
    inputs = discover_inputs(input_dir)
    if not inputs:
        logger.warning(f"No binaries or manifests under {input_dir}; writing an empty database")

    outcomes = extract_inputs(inputs, _string_options(config), config.workers, config.timeout_mins * 60.0)
    units: List[BinaryFeatureSet] = []
    skipped = 0
    for path, _, _, _ in inputs:
        outcome = outcomes[path]
        if isinstance(outcome, BinaryFeatureSet):
            units.append(outcome)
        elif isinstance(outcome, TimeoutError):
            logger.warning(f"{path}: {outcome}; skipped")
            skipped += 1
        elif isinstance(outcome, (ElfParseError, ManifestValidationError, ConfigurationError, IntegrityError)):
            if args.strict:
                raise outcome
            logger.warning(f"{path}: {outcome}; skipped")
            skipped += 1
        else:
            raise outcome
    if skipped and args.strict:
        logger.error(f"{skipped} inputs skipped under --strict")
        return EXIT_ERROR

    db = TplDatabase.for_model(model)
    for unit in sorted(units, key=lambda u: u.binary_id):
        if unit.provenance is None:
            message = f"{unit.binary_id}: no library/version (use <library>/<version>/<binary> layout)"
            if args.strict:
                raise IntegrityError(message)
            logger.warning(message + "; skipped")
            skipped += 1
            continue
        db.index_unit(unit, model=model)
    db.persist(db_path)

    summary = db.summary()
    print(
        f"Indexed {summary['units']} units of {summary['libraries']} libraries: "
        f"{summary['features']} features, {summary['vectors']} vectors"
    )
    return EXIT_PARTIAL if skipped else EXIT_OK


def cmd_extract(args, config: Config) -> int:
    kind = args.kind or detect_kind(args.input)
    extractor = get_extractor(kind, **_string_options(config))
    feature_set = extractor.extract(
        args.input, binary_id=args.binary_id, library=args.library, version=args.lib_version
    )
    write_manifest(feature_set, args.output)
    logger.info(f"Wrote {args.output} with {extractor.get_name()} extractor {extractor.get_version()}")
    return EXIT_OK


def cmd_train(args, config: Config) -> int:
    """Train a model on the units of a corpus (or any manifest directory)."""
    source = _corpus_path(args.corpus, config)
    units_dir = _corpus_units_dir(source)
    if not units_dir.is_dir():
        raise ConfigurationError(f"Training input not found: {units_dir}")
    extractor = get_extractor("manifest", **_string_options(config))
    units = [extractor.extract(p) for p in sorted(units_dir.rglob("*.json"))]
    if not units:
        raise ConfigurationError(f"No manifests under {units_dir}")

    strength = args.perturbation
    if strength is None:
        truth_file = source / GROUND_TRUTH_FILE
        strength = load_ground_truth(truth_file)[0].perturbation if truth_file.exists() else 0.2

    model, metrics = fit_model(units, config, args.pairs, strength)
    output = Path(args.output or config.paths.model or "model.json")
    output.parent.mkdir(parents=True, exist_ok=True)
    model.save(output)
    sidecar = output.with_name(output.stem + ".metrics.json")
    sidecar.write_text(json.dumps({
        "auc": round(metrics.auc, 6),
        "accuracy": round(metrics.accuracy, 6),
        "recall": round(metrics.recall, 6),
        "threshold": config.retrieval.pair_threshold,
        "pairs": metrics.pairs,
    }, indent=2) + "\n", encoding="utf-8")
    print(f"Saved model to {output} (held-out AUC {metrics.auc:.3f})")
    return EXIT_OK


def cmd_scan(args, config: Config) -> int:
    db_path = args.db or config.paths.db
    if db_path is None:
        raise ConfigurationError("No database: pass --db or set paths.db")
    db = TplDatabase.load(db_path)
    needs_model = config.channels != "basic"
    model = load_model(args.model or config.paths.model, required=needs_model)
    detector = Detector(db, model, config)

    reports = []
    for target in args.targets:
        feature_set = get_extractor(detect_kind(target), **_string_options(config)).extract(target)
        result = detector.detect(feature_set)
        reports.append(build_report(feature_set.binary_id, result.candidates))
    write_reports(reports, args.output, config.output_format)
    return EXIT_OK


def cmd_eval(args, config: Config) -> int:
    corpus_dir = _corpus_path(args.corpus, config)
    corpus = load_corpus(corpus_dir)
    variants = args.variant or list(VARIANTS)

    model_path = args.model or config.paths.model
    if model_path is not None:
        model = load_model(model_path, required=True)
    else:
        logger.info("No model given; training one on the corpus units")
        model, _ = fit_model(corpus.units, config, TRAINING_PAIRS, corpus.spec.perturbation)

    db = TplDatabase.load(args.db) if args.db else TplDatabase.build(corpus.units, model)
    result = run_ablation(corpus, db, model, variants, config)

    output_dir = Path(args.output_dir) if args.output_dir else corpus_dir / "metrics"
    write_metrics(result, output_dir)
    sys.stdout.write(format_metrics_table(result))
    return EXIT_OK


def cmd_corpus_gen(args, config: Config) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("libraries", "versions", "targets", "fan_in", "strip", "perturbation")
        if getattr(args, key) is not None
    }
    try:
        spec = CorpusSpec(seed=config.seed, **overrides)
    except ValueError as e:
        raise ConfigurationError(f"Invalid corpus spec: {e}") from e
    corpus = generate_corpus(spec)
    write_corpus(corpus, args.output)
    print(f"Wrote {len(corpus.units)} units and {len(corpus.targets)} targets to {args.output}")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='TOML configuration file')
    common.add_argument('--seed', type=int, help='Random seed (default: from config, 0)')
    common.add_argument('--channels', choices=['basic', 'fr', 'both'], help='Detection channels (default: both)')
    common.add_argument('--format', dest='output_format', choices=['json', 'text'], help='Report format (default: json)')
    common.add_argument('--strict', action='store_true', help='Fail on the first unreadable input')
    common.add_argument('--timeout-mins', type=float, help='Per-binary extraction timeout (default: 30)')
    common.add_argument('--workers', type=int, help='Worker processes/threads (default: 1)')
    common.add_argument(
        '--verbosity', '-v',
        default='WARNING',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Set logging verbosity (default: WARNING)'
    )

    parser = argparse.ArgumentParser(
        prog='bintpl',
        description="bintpl - detect third-party libraries and their versions in binaries",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate the reference corpus and evaluate every variant
  bintpl corpus gen corpus/ --seed 1729
  bintpl train corpus/ model.json -v INFO
  bintpl eval corpus/ --model model.json

  # Build a database from <library>/<version>/<binary> files and scan a target
  bintpl db build libs/ tpl.db --model model.json
  bintpl scan app.json --db tpl.db --model model.json --format text

  # Basic features only (no model needed)
  bintpl scan ./app --db tpl.db --channels basic
        """
    )
    commands = parser.add_subparsers(dest='command', required=True)

    db = commands.add_parser('db', help='Database commands')
    db_commands = db.add_subparsers(dest='db_command', required=True)
    build = db_commands.add_parser('build', parents=[common], help='Build a TPL database')
    build.add_argument('input', help='Directory of manifests or <library>/<version>/<binary> files')
    build.add_argument('db', nargs='?', help='Database directory to write')
    build.add_argument('--model', help='Embedding model checkpoint (omit for basic features only)')
    build.set_defaults(handler=cmd_db_build)

    extract = commands.add_parser('extract', parents=[common], help='Write the manifest of one input')
    extract.add_argument('input', help='ELF binary or manifest')
    extract.add_argument('output', help='Manifest file to write')
    extract.add_argument('--kind', choices=['elf', 'manifest'], help='Input kind (default: auto-detect)')
    extract.add_argument('--binary-id', help='Binary id (default: file name)')
    extract.add_argument('--library', help='Library id, for database units')
    extract.add_argument('--lib-version', help='Library version, for database units')
    extract.set_defaults(handler=cmd_extract)

    train = commands.add_parser('train', parents=[common], help='Train the embedding model')
    train.add_argument('corpus', nargs='?', help='Corpus directory or manifest directory')
    train.add_argument('output', nargs='?', help='Checkpoint to write (default: model.json)')
    train.add_argument('--pairs', type=int, default=TRAINING_PAIRS, help=f'Training pairs (default: {TRAINING_PAIRS})')
    train.add_argument('--perturbation', type=float, help='Recompilation strength (default: from corpus, 0.2)')
    train.set_defaults(handler=cmd_train)

    scan = commands.add_parser('scan', parents=[common], help='Detect libraries in targets')
    scan.add_argument('targets', nargs='+', help='Target ELF binaries or manifests')
    scan.add_argument('--db', help='Database directory')
    scan.add_argument('--model', help='Embedding model checkpoint')
    scan.add_argument('--output', '-o', help='Report file (default: stdout)')
    scan.set_defaults(handler=cmd_scan)

    evaluate = commands.add_parser('eval', parents=[common], help='Evaluate variants on a corpus')
    evaluate.add_argument('corpus', nargs='?', help='Corpus directory')
    evaluate.add_argument('--model', help='Embedding model checkpoint (default: train on the corpus)')
    evaluate.add_argument('--db', help='Prebuilt database (default: build from the corpus units)')
    evaluate.add_argument(
        '--variant', action='append',
        choices=list(VARIANTS) + list(VARIANT_ALIASES),
        help='Variant to run; repeatable (default: all)'
    )
    evaluate.add_argument('--output-dir', help='Where to write metrics.csv/json (default: <corpus>/metrics)')
    evaluate.set_defaults(handler=cmd_eval)

    corpus = commands.add_parser('corpus', help='Corpus commands')
    corpus_commands = corpus.add_subparsers(dest='corpus_command', required=True)
    gen = corpus_commands.add_parser('gen', parents=[common], help='Generate a synthetic corpus')
    gen.add_argument('output', help='Corpus directory to write')
    gen.add_argument('--libraries', type=int, help='Library count (default: 50)')
    gen.add_argument('--versions', type=int, help='Versions per library (default: 3)')
    gen.add_argument('--targets', type=int, help='Fused targets (default: 30)')
    gen.add_argument('--fan-in', type=int, help='Libraries per target (default: 3)')
    gen.add_argument('--strip', type=float, help='Share of basic features stripped (default: 0.3)')
    gen.add_argument('--perturbation', type=float, help='Recompilation strength (default: 0.2)')
    gen.set_defaults(handler=cmd_corpus_gen)

    return parser


def resolve_config(args) -> Config:
    config = load_config(args.config)
    return with_overrides(
        config,
        seed=args.seed,
        channels=args.channels,
        output_format=args.output_format,
        timeout_mins=args.timeout_mins,
        workers=args.workers,
    )


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the command and return its exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.verbosity),
        format='%(levelname)s: %(message)s'
    )

    try:
        config = resolve_config(args)
        return args.handler(args, config)
    except BintplError as e:
        logger.error(f"{e}")
        return EXIT_ERROR
    except FileNotFoundError as e:
        logger.error(f"File not found: {e}")
        return EXIT_ERROR
    except ValueError as e:
        logger.error(f"{e}")
        return EXIT_ERROR


def main():
    """Main entry point for the bintpl command."""
    sys.exit(run())


if __name__ == "__main__":
    main()
