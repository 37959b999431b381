import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .evaluation import (
    AUX_ROWS,
    CONTRIBUTION_ROWS,
    ablate,
    crossval,
    evaluate,
    plot_bars,
    plot_curves,
    plot_frames,
    resolve_model,
    run_gradcheck,
    ssim,
)
from .evaluation.ablation import AVERAGED, GENERAL
from .exceptions import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DivergenceError,
    Error,
    InputError,
    TruncationError,
)
from .model import ModalityMask, ModelConfig, PersistenceBaseline
from .sensors import Behavior, Modality, TrialDataset, load_dataset
from .synthworld import generate_dataset
from .tensor import no_grad
from .training import EpochEvent, LossWeights, TrainConfig, Trainer
from .utils import read_csv, write_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_ERRORS = (ConfigError, ContractError, DataError, DimensionError, InputError, TruncationError)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """
    argparse exits with status 2 on bad usage; usage errors exit with 1 here
    """

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def behavior_mix(text: str) -> Dict[str, float]:
    """
    Parses "push=0.5,drop=0.5"
    """
    mix = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, weight = part.partition("=")
        name = name.strip()
        if name not in Behavior.ALL:
            raise argparse.ArgumentTypeError(f"unknown behavior {name!r}")
        try:
            mix[name] = float(weight) if weight else 1.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad weight {weight!r} for {name}")
    if not mix:
        raise argparse.ArgumentTypeError("empty behavior mix")
    return mix


def subset_list(text: str) -> List[ModalityMask]:
    """
    "all" (every flag combination), "table" (the contribution rows), "aux"
    (the auxiliary comparison rows) or comma-separated labels such as
    "vision,vision+haptic+behavior"
    """
    if text == "all":
        return ModalityMask.enumerate()
    if text == "table":
        return [ModalityMask.parse(label) for label in CONTRIBUTION_ROWS]
    if text == "aux":
        return [ModalityMask.parse(label) for label in AUX_ROWS]
    try:
        return [ModalityMask.parse(label) for label in text.split(",") if label.strip()]
    except ConfigError as error:
        raise argparse.ArgumentTypeError(str(error))


def forcing(text: str):
    return {"on": True, "off": False, "linear": "linear"}[text]


def _add_training(parser: argparse.ArgumentParser) -> None:
    defaults = TrainConfig.default()
    parser.add_argument("--epochs", type=int, default=defaults.epochs)
    parser.add_argument("--batch-size", type=int, default=defaults.batch_size)
    parser.add_argument("--lr", type=float, default=defaults.lr)
    parser.add_argument("--K", type=int, default=defaults.K, help="context frames")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fusion-channels", type=int, choices=(64, 128), default=64)
    parser.add_argument(
        "--teacher-forcing", choices=("on", "off", "linear"), default="on"
    )
    parser.add_argument("--clip-norm", type=float, default=defaults.clip_norm)
    parser.add_argument(
        "--weights",
        type=float,
        nargs=4,
        metavar=("VISION", "HAPTIC", "AUDIO", "VIBRO"),
        default=None,
        help="loss weights per modality",
    )
    parser.add_argument("--workers", type=int, default=0, help="prefetch / job threads")


def _train_config(args: argparse.Namespace, mask: ModalityMask) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        K=args.K,
        seed=args.seed,
        weights=LossWeights(*args.weights) if args.weights else None,
        mask=mask,
        model=ModelConfig(fusion_channels=args.fusion_channels),
        teacher_forcing=forcing(args.teacher_forcing),
        clip_norm=args.clip_norm,
        workers=args.workers,
    )


def _add_fold(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--folds", type=int, default=None, help="object-disjoint fold count")
    parser.add_argument("--fold", type=int, default=0, help="fold index when --folds is set")
    parser.add_argument("--split-seed", type=int, default=0)


def _fold_split(dataset: TrialDataset, args: argparse.Namespace, side: int) -> TrialDataset:
    """
    side 0 is the fold's training objects, side 1 its test objects
    """
    if args.folds is None:
        return dataset
    folds = crossval(dataset, args.folds, args.split_seed)
    if not 0 <= args.fold < len(folds):
        raise ConfigError(f"Fold {args.fold} does not exist among {len(folds)} folds")
    return dataset.subset_by_objects(folds[args.fold][side])


def build_parser() -> Parser:
    parser = Parser(
        prog="mmforesight",
        description="Multisensory next-frame prediction: data, training and evaluation",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )
    commands = parser.add_subparsers(dest="command", parser_class=Parser)
    commands.required = True

    gen = commands.add_parser("gen", help="generate a synthetic dataset container")
    gen.add_argument("--out", required=True)
    gen.add_argument("--trials", type=int, default=200)
    gen.add_argument("--mix", type=behavior_mix, default=None, help='e.g. "push=0.5,drop=0.5"')
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--objects", type=int, default=None)
    gen.add_argument("--ambiguous-pairs", type=int, default=None)

    train = commands.add_parser("train", help="train one predictor")
    train.add_argument("--data", required=True)
    train.add_argument("--checkpoint", required=True)
    train.add_argument("--log", default=None, help="per-batch loss CSV")
    train.add_argument("--mask", default="vision", help='e.g. "vision+haptic+behavior"')
    train.add_argument("--aux", action="store_true", help="auxiliary next-frame heads")
    _add_training(train)
    _add_fold(train)

    ev = commands.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--baseline", choices=("persistence",), default=None)
    ev.add_argument("--data", required=True)
    ev.add_argument("--csv", required=True)
    ev.add_argument("--mask", default=None, help="requested mask, defaults to the checkpoint's")
    ev.add_argument("--aux", action="store_true")
    ev.add_argument("--K", type=int, default=4)
    ev.add_argument("--workers", type=int, default=0)
    _add_fold(ev)

    ab = commands.add_parser("ablate", help="cross-validated modality ablation")
    ab.add_argument("--data", required=True)
    ab.add_argument("--out", required=True, help="directory for the CSV tables")
    ab.add_argument("--subsets", type=subset_list, default=subset_list("table"))
    ab.add_argument("--folds", type=int, default=5)
    ab.add_argument("--split-seed", type=int, default=0)
    ab.add_argument("--behavior-toggle", action="store_true")
    ab.add_argument("--aux-toggle", action="store_true")
    ab.add_argument("--aux", action="store_true", help="train every subset with aux heads")
    ab.add_argument("--per-behavior", action="store_true")
    _add_training(ab)

    gc = commands.add_parser("gradcheck", help="finite-difference gradient suites")
    gc.add_argument("--seeds", type=int, default=20)
    gc.add_argument("--pipeline-seeds", type=int, default=20)
    gc.add_argument("--suite", action="append", default=None)

    plot = commands.add_parser("plot", help="render curves, bars or frame strips")
    kind = plot.add_mutually_exclusive_group(required=True)
    kind.add_argument("--curves", nargs="+", metavar="CSV", help="evaluation CSVs")
    kind.add_argument("--bars", metavar="CSV", help="per-behavior ablation CSV")
    kind.add_argument("--frames", action="store_true", help="ground truth vs prediction strip")
    plot.add_argument("--out", required=True)
    plot.add_argument("--checkpoint", default=None)
    plot.add_argument("--data", default=None)
    plot.add_argument("--trial", type=int, default=0)
    plot.add_argument("--K", type=int, default=4)
    return parser


def run_gen(args: argparse.Namespace) -> int:
    generate_dataset(
        args.out,
        args.trials,
        args.mix,
        args.seed,
        n_objects=args.objects,
        ambiguous_pairs=args.ambiguous_pairs,
    )
    return EXIT_OK


def run_train(args: argparse.Namespace) -> int:
    logger = logging.getLogger("mmforesight.py")
    dataset = _fold_split(load_dataset(args.data), args, 0)
    mask = ModalityMask.parse(args.mask, aux_training=args.aux)
    trainer = Trainer(dataset, _train_config(args, mask))

    def progress(event: EpochEvent) -> None:
        terms = ", ".join(f"{m}={v:.4g}" for m, v in event.terms.items() if v)
        logger.info(f"epoch {event.epoch + 1}: {event.loss:.6g} ({terms})")

    trainer.on_epoch_end(progress)
    trainer.train(args.checkpoint, args.log)
    return EXIT_OK


def run_eval(args: argparse.Namespace) -> int:
    if (args.checkpoint is None) == (args.baseline is None):
        raise UsageError("eval needs exactly one of --checkpoint and --baseline")
    dataset = _fold_split(load_dataset(args.data), args, 1)
    model = args.checkpoint if args.checkpoint is not None else PersistenceBaseline()
    mask = ModalityMask.parse(args.mask, aux_training=args.aux) if args.mask else None
    report = evaluate(model, dataset, mask, K=args.K, workers=args.workers, fold=args.fold)
    report.write_csv(args.csv)
    return EXIT_OK


def run_ablate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    subsets = [mask.with_aux(args.aux) for mask in args.subsets]
    table = ablate(
        dataset,
        subsets,
        _train_config(args, ModalityMask.vision_only()),
        k_folds=args.folds,
        seed=args.split_seed,
        behavior_toggle=args.behavior_toggle,
        aux_toggle=args.aux_toggle,
        per_behavior=args.per_behavior,
        workers=args.workers,
        out_dir=Path(args.out) / "folds",
    )
    out = Path(args.out)
    table.write_csv(out / "ablation.csv")
    if args.aux_toggle:
        table.write_aux_csv(out / "aux.csv")
    if args.per_behavior:
        table.write_behavior_csv(out / "behaviors.csv")
    for row in table.rows:
        tag = row.label.replace("+", "_") + ("_aux" if row.mask.aux_training else "")
        row.general.write_csv(out / f"{tag}_mean.csv")
    return EXIT_OK


def run_gradcheck_command(args: argparse.Namespace) -> int:
    results = run_gradcheck(args.seeds, args.pipeline_seeds, args.suite)
    failed = [result for result in results if not result.passed]
    for result in failed:
        logging.getLogger("mmforesight.py").error(str(result))
    return EXIT_NUMERIC if failed else EXIT_OK


def _curve(path: str):
    header, rows = read_csv(path)
    if header[:2] != ["timestep", "ssim"]:
        raise DataError(f"{path} is not an evaluation CSV")
    return [int(row[0]) for row in rows], [float(row[1]) for row in rows]


def _behavior_groups(path: str) -> Dict[str, Dict[str, float]]:
    header, rows = read_csv(path)
    if header[:2] != ["subset", "behavior"]:
        raise DataError(f"{path} is not a per-behavior ablation CSV")
    groups: Dict[str, Dict[str, float]] = {}
    for subset, behavior, specific, general in rows:
        groups.setdefault(behavior, {})[subset] = float(specific)
        if behavior == AVERAGED:
            groups.setdefault(GENERAL, {})[subset] = float(general)
    # behaviors first, then the averaged and all-behavior columns
    ordered = [b for b in Behavior.ALL if b in groups] + [AVERAGED, GENERAL]
    return {name: groups[name] for name in ordered if name in groups}


def run_plot(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if args.curves:
        curves = {Path(path).stem: _curve(path) for path in args.curves}
        plot_curves(curves, out)
        write_csv(
            out.with_suffix(".csv"),
            ("series", "timestep", "ssim"),
            [(name, t, v) for name, (steps, values) in curves.items() for t, v in zip(steps, values)],
        )
        return EXIT_OK
    if args.bars:
        groups = _behavior_groups(args.bars)
        plot_bars(groups, out)
        write_csv(
            out.with_suffix(".csv"),
            ("group", "subset", "ssim"),
            [(group, subset, v) for group, bars in groups.items() for subset, v in bars.items()],
        )
        return EXIT_OK

    if args.checkpoint is None or args.data is None:
        raise UsageError("plot --frames needs --checkpoint and --data")
    model, stats = resolve_model(args.checkpoint)
    dataset = load_dataset(args.data).subset_by_trials([args.trial])
    if len(dataset) == 0:
        raise InputError(f"No trial {args.trial} in {args.data}")
    if stats is not None:
        dataset = dataset.normalized(stats)
    sample = dataset[0]
    with no_grad():
        result = model.rollout(sample, args.K, teacher_forcing=False)
    predicted = result.to_numpy(Modality.VISION)[0]
    plot_frames(sample.vision, predicted, out)
    write_csv(
        out.with_suffix(".csv"),
        ("timestep", "ssim"),
        [
            (t + 1, ssim(sample.vision[t], np.clip(frame, 0.0, 1.0)))
            for t, frame in zip(result.target_indices, predicted)
        ],
    )
    return EXIT_OK


COMMANDS = {
    "gen": run_gen,
    "train": run_train,
    "eval": run_eval,
    "ablate": run_ablate,
    "gradcheck": run_gradcheck_command,
    "plot": run_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Exit codes: 0 success, 1 usage, 2 data or configuration error, 3
    numeric failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        print(error, file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(message)s",
    )
    logger = logging.getLogger("mmforesight.py")
    try:
        return COMMANDS[args.command](args)
    except UsageError as error:
        print(error, file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as error:
        logger.error(str(error))
        return EXIT_NUMERIC
    except DATA_ERRORS as error:
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_DATA
    except (Error, FloatingPointError) as error:
        logger.error(f"{type(error).__name__}: {error}")
        return EXIT_NUMERIC
