"""Command line entry point: split, train, tune, evaluate, evaluate-page, build-page.

Settings come from an optional JSON file (``--config``) and are overridden by
flags. Relative paths inside the file are resolved against its directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import DataSplit, holdout_split, infer_format, parse_interactions, parse_item_features, validate_ratios
from .evaluation import EvaluationConfig, evaluate_page, greedy_page_builder, rank_candidates
from .metrics import DiscountWeights, discount_grid, write_grid_csv
from .recommenders import FAMILIES, PARAMS, check_family, fit_model, load_model, save_model
from .tuning import random_search, read_best_params

log = logging.getLogger("carousel_eval")

SEEDED = {"FunkSVD", "NMF"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str | None = None
    format: str | None = None
    movies: str | None = None
    tags: str | None = None
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 42
    models: dict = field(default_factory=dict)
    k: int = 10
    w_row: float = 1.0
    w_col: float = 1.0
    fixed: list[str] = field(default_factory=lambda: ["TopPopular"])
    candidates: list[str] = field(default_factory=list)
    budget: int = 50
    rows: int = 2
    out: str = "runs/default"

    def validate(self) -> "RunConfig":
        try:
            self.ratios = validate_ratios(self.ratios)
            DiscountWeights(self.w_row, self.w_col)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.dataset is None:
            raise ConfigError("no dataset given (use --dataset or the config file)")
        for name in ("dataset", "movies", "tags"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} path does not exist: {path}")
        try:
            for name in [*self.models, *self.fixed, *self.candidates]:
                check_family(name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def weights(self) -> DiscountWeights:
        return DiscountWeights(self.w_row, self.w_col)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        values = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(values) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("dataset", "movies", "tags", "out"):
            if values.get(key) is not None:
                values[key] = str((path.parent / values[key]).resolve())
        if isinstance(values.get("models"), list):
            values["models"] = {name: None for name in values["models"]}
        cfg = replace(cfg, **values)
    overrides = {
        "dataset": args.dataset,
        "format": args.format,
        "movies": args.movies,
        "tags": args.tags,
        "seed": args.seed,
        "k": args.k,
        "w_row": args.w_row,
        "w_col": args.w_col,
        "budget": getattr(args, "budget", None),
        "rows": getattr(args, "rows", None),
        "out": args.out,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.ratios is not None:
        cfg.ratios = tuple(args.ratios)
    if args.fixed is not None:
        cfg.fixed = _names(args.fixed)
    if args.models is not None:
        cfg.models = {name: cfg.models.get(name) for name in _names(args.models)}
    if getattr(args, "candidates", None) is not None:
        cfg.candidates = _names(args.candidates)
    cfg.ratios = tuple(cfg.ratios)
    return cfg.validate()


def _names(text: str) -> list[str]:
    return [name.strip() for name in text.split(",") if name.strip()]


def _write_record(cfg: RunConfig, command: str) -> None:
    record = {
        "command": command,
        "config": asdict(cfg),
        "seeds": {"root": cfg.seed, "split": cfg.seed, "tuning": cfg.seed, "models": cfg.seed},
        "versions": {
            "carousel_eval": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = cfg.out_dir / f"run_record_{command}.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=list) + "\n", encoding="utf-8")


def get_split(cfg: RunConfig, force: bool = False) -> DataSplit:
    """Load the saved split when it matches seed and ratios, otherwise build and save it."""
    path = cfg.out_dir / "split.npz"
    if path.exists() and not force:
        split = DataSplit.load(path)
        if split.seed == cfg.seed and np.allclose(split.ratios, cfg.ratios):
            return split
    fmt = cfg.format or infer_format(cfg.dataset)
    interactions = parse_interactions(cfg.dataset, fmt)
    split = holdout_split(interactions, cfg.ratios, cfg.seed)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    split.save(path)
    (cfg.out_dir / "split_manifest.txt").write_text(split.manifest(), encoding="utf-8")
    return split


def get_icm(cfg: RunConfig, split: DataSplit):
    if cfg.movies is None:
        return None
    return parse_item_features(cfg.movies, split.train.item_index, cfg.tags)


def resolve_params(cfg: RunConfig, name: str) -> dict:
    spec = cfg.models.get(name)
    if spec == "tuned":
        best = cfg.out_dir / "tuning" / f"{name}_best.json"
        if not best.exists():
            raise ConfigError(f"{name} is set to 'tuned' but {best} is missing; run `tune` first")
        _, params = read_best_params(best)
    else:
        params = dict(spec or {})
    if name in SEEDED:
        params.setdefault("seed", cfg.seed)
    # normalise through the params record so saved and requested params compare equal
    return PARAMS[name].from_dict(params).as_dict()


def get_models(cfg: RunConfig, split: DataSplit, names, refit: bool = False) -> dict:
    model_dir = cfg.out_dir / "models"
    icm = None
    models = {}
    for name in dict.fromkeys(names):
        params = resolve_params(cfg, name)
        path = model_dir / f"{name}.npz"
        if path.exists() and not refit:
            model = load_model(path)
            if model.params == params:
                models[name] = model
                continue
        if name == "ItemKNNHybrid" and icm is None:
            icm = get_icm(cfg, split)
        log.info("fitting %s %s", name, params)
        models[name] = fit_model(name, split.train, params, icm)
    return models


def eval_config(cfg: RunConfig, fixed=None, candidates=()) -> EvaluationConfig:
    return EvaluationConfig(
        k=cfg.k,
        weights=cfg.weights,
        fixed_models=tuple(cfg.fixed if fixed is None else fixed),
        candidate_models=tuple(candidates),
    )


def cmd_split(cfg: RunConfig, args) -> None:
    split = get_split(cfg, force=True)
    _write_record(cfg, "split")
    print(split.manifest(), end="")


def cmd_train(cfg: RunConfig, args) -> None:
    split = get_split(cfg)
    names = list(cfg.models) or list(FAMILIES)
    models = get_models(cfg, split, names, refit=True)
    model_dir = cfg.out_dir / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    for name, model in models.items():
        save_model(model, model_dir / f"{name}.npz")
        print(f"saved {model_dir / (name + '.npz')}")
    _write_record(cfg, "train")


def cmd_tune(cfg: RunConfig, args) -> None:
    split = get_split(cfg)
    names = list(cfg.models) or [f for f in FAMILIES if f != "TopPopular"]
    tune_dir = cfg.out_dir / "tuning"
    tune_dir.mkdir(parents=True, exist_ok=True)
    icm = get_icm(cfg, split) if "ItemKNNHybrid" in names else None
    for name in names:
        trials = random_search(name, split, budget=cfg.budget, seed=cfg.seed, icm=icm, k=cfg.k)
        trials.to_csv(tune_dir / f"{name}_trials.csv")
        trials.write_best(tune_dir / f"{name}_best.json")
        print(f"{name}: best validation NDCG@{cfg.k} {trials.best.validation_ndcg:.4f} {trials.best_params}")
    _write_record(cfg, "tune")


def cmd_evaluate(cfg: RunConfig, args) -> None:
    split = get_split(cfg)
    requested = list(cfg.models) or list(FAMILIES)
    candidates = cfg.candidates or [n for n in requested if n not in cfg.fixed]
    models = get_models(cfg, split, [*cfg.fixed, *candidates])
    report = rank_candidates(models, split, eval_config(cfg, candidates=candidates), heatmaps=True)
    report.baselines = {n: v for n, v in report.baselines.items() if n in requested}
    out = cfg.out_dir
    report.to_csv(out / "report.csv")
    n_rows = len(cfg.fixed) + 1
    write_grid_csv(discount_grid(n_rows, cfg.k, cfg.weights), out / "discount_grid.csv")
    for name, grid in report.heatmaps.items():
        write_grid_csv(grid, out / f"heatmap_{name}.csv")
    _write_record(cfg, "evaluate")
    print(f"users evaluated: {report.n_users_evaluated}")
    print(report.format_table())


def cmd_evaluate_page(cfg: RunConfig, args) -> None:
    split = get_split(cfg)
    candidate = check_family(args.candidate)
    models = get_models(cfg, split, [*cfg.fixed, candidate])
    value = evaluate_page([models[n] for n in cfg.fixed], models[candidate], split, eval_config(cfg))
    path = cfg.out_dir / f"page_{candidate}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fixed", "candidate", "ndcg2d"])
        writer.writerow(["|".join(cfg.fixed), candidate, f"{value:.6f}"])
    _write_record(cfg, "evaluate-page")
    print(f"NDCG2D of {cfg.fixed + [candidate]}: {value:.4f}")


def cmd_build_page(cfg: RunConfig, args) -> None:
    split = get_split(cfg)
    pool = list(cfg.models) or list(FAMILIES)
    models = get_models(cfg, split, pool)
    ecfg = eval_config(cfg, fixed=())
    chosen = greedy_page_builder(models, cfg.rows, split, ecfg)
    path = cfg.out_dir / "page.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "model", "page_ndcg2d"])
        for row in range(1, len(chosen) + 1):
            rows = [models[n] for n in chosen[:row]]
            value = evaluate_page(rows[:-1], rows[-1], split, ecfg)
            writer.writerow([row, chosen[row - 1], f"{value:.6f}"])
    _write_record(cfg, "build-page")
    print("page: " + " > ".join(chosen))


COMMANDS = {
    "split": cmd_split,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "evaluate-page": cmd_evaluate_page,
    "build-page": cmd_build_page,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--dataset", help="ratings file (ratings.dat or u.data)")
    common.add_argument("--format", choices=["double-colon", "tab"], help="default: inferred from extension")
    common.add_argument("--movies", help="movies.dat with genres, enables ItemKNNHybrid features")
    common.add_argument("--tags", help="tags.dat")
    common.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    common.add_argument("--seed", type=int, help="root seed for split, tuning and models")
    common.add_argument("--models", help="comma separated model identifiers: " + ", ".join(FAMILIES))
    common.add_argument("--k", type=int, help="carousel length (default 10)")
    common.add_argument("--w-row", type=float, dest="w_row")
    common.add_argument("--w-col", type=float, dest="w_col")
    common.add_argument("--fixed", help="comma separated models forming the top of the page")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="carousel-eval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("split", parents=[common], help="random holdout split + manifest")
    sub.add_parser("train", parents=[common], help="fit and save models")
    tune = sub.add_parser("tune", parents=[common], help="random hyperparameter search")
    tune.add_argument("--budget", type=int)
    evaluate = sub.add_parser("evaluate", parents=[common], help="individual vs carousel ranking table")
    evaluate.add_argument("--candidates", help="comma separated candidates (default: models minus fixed)")
    page = sub.add_parser("evaluate-page", parents=[common], help="NDCG2D of fixed carousels + one candidate")
    page.add_argument("--candidate", required=True)
    build = sub.add_parser("build-page", parents=[common], help="greedy page construction")
    build.add_argument("--rows", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = load_config(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
