"""
Command-line interface.

Every subcommand resolves a RunConfig (defaults < --config file < GEOF_*
environment < flags), writes it as resolved_config.json next to its outputs
and then runs one pipeline stage. Exit codes: 0 success, 1 usage or
configuration error, 2 any other GeoFormer error.
"""

import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import click
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from geoformer import __version__
from geoformer.cli.plots import bar_rows, save_histogram_svg, save_line_svg, sparkline
from geoformer.core.config import setup_config, write_resolved_config
from geoformer.core.errors import ConfigurationError, GeoFormerError, StatsError
from geoformer.core.logging import JsonLinesWriter, get_logger, setup_logging
from geoformer.core.models.config import N_DAYS, RunConfig
from geoformer.core.models.mobility import DatasetSplit, UserHistory
from geoformer.data import (
    autocorrelation,
    build_histories,
    daily_movement_counts,
    events_per_slot,
    generate_synthetic,
    ingest_csv,
    oov_summary,
    split_users,
    write_csv,
)
from geoformer.evaluation import (
    build_eval_set,
    evaluate,
    sweep_generation,
    write_sweep_csv,
    write_sweep_json,
)
from geoformer.generation import (
    DecodingAudit,
    GeoFormerPredictor,
    RandomCandidatePredictor,
    has_enough_context,
    predict_all,
)
from geoformer.model import DirectoryCheckpointStore, init_model, load_checkpoint
from geoformer.tokenizer.vocabulary import build_vocabulary
from geoformer.training import Trainer, WindowDataset, finetune

console = Console()
logger = get_logger("cli")

USER_SETS = ("test", "val", "held-out")
GROUPINGS = ("per_day", "per_trajectory")

EXISTING_FILE = click.Path(exists=True, dir_okay=False)
OUTPUT_FILE = click.Path(dir_okay=False)
OUTPUT_DIR = click.Path(file_okay=False)

VOCAB_LAYOUT = (
    ("0-2", "<eos> <|data|> <|sep|>"),
    ("3-9", "<|dow0|> .. <|dow6|>"),
    ("10-19", "0 .. 9"),
    ("20", "N"),
    ("21-520", "x000 .. x499"),
    ("521-1020", "y000 .. y499"),
)


class GeoFormerGroup(click.Group):
    """Click group that maps failures onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, **extra):
        extra.pop("standalone_mode", None)
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.exceptions.Exit as e:
            sys.exit(e.exit_code)
        except click.exceptions.Abort:
            console.print("[red]Aborted[/red]")
            sys.exit(1)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except (ConfigurationError, ValidationError) as e:
            console.print(f"[red]Configuration error:[/red] {e}")
            sys.exit(1)
        except GeoFormerError as e:
            console.print(f"[red]Error ({type(e).__name__}):[/red] {e}")
            sys.exit(2)
        sys.exit(rv if isinstance(rv, int) else 0)


def config_options(func: Callable) -> Callable:
    func = click.option(
        "--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR or CRITICAL."
    )(func)
    func = click.option(
        "--config",
        "config_file",
        type=EXISTING_FILE,
        default=None,
        help="JSON or YAML run configuration.",
    )(func)
    return func


def _resolve(config_file: Optional[str], overrides: Mapping[str, Any]) -> RunConfig:
    cfg = setup_config(config_file, dict(overrides))
    try:
        setup_logging(cfg.log_level, cfg.log_file)
    except ValueError as e:
        raise ConfigurationError(str(e))
    return cfg


def _load_dataset(
    data: str, cfg: RunConfig
) -> Tuple[Dict[int, UserHistory], DatasetSplit]:
    records = ingest_csv(data)
    histories = build_histories(records, cfg.data.dow_offset)
    split = split_users(
        histories,
        cfg.data.n_val,
        cfg.data.n_test,
        cfg.data.split_seed,
        cfg.data.horizon_day,
    )
    return histories, split


def _select_users(split: DatasetSplit, which: str) -> List[int]:
    if which == "test":
        return sorted(split.test_uids)
    if which == "val":
        return sorted(split.val_uids)
    return sorted(split.held_out_uids)


def _eligible_users(
    histories: Dict[int, UserHistory], split: DatasetSplit, which: str, horizon_day: int
) -> List[int]:
    selected = _select_users(split, which)
    uids = [u for u in selected if has_enough_context(histories[u], horizon_day)]
    if len(uids) < len(selected):
        logger.warning(
            f"Skipping {len(selected) - len(uids)} users with fewer than 7 "
            f"observed days before day {horizon_day}"
        )
    return uids


def _parse_list(text: str, cast: Callable) -> List:
    try:
        return [cast(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise click.BadParameter(f"cannot parse {text!r}: {e}")


def _output_dir(cfg: RunConfig, out_dir: Optional[str], stage: str) -> Path:
    return Path(out_dir) if out_dir else Path(cfg.output_dir) / stage


def _write_frame(columns: Dict[str, Any], path: Path) -> None:
    pd.DataFrame(columns).to_csv(path, index=False, lineterminator="\n")


@click.group(cls=GeoFormerGroup)
@click.version_option(__version__, prog_name="geoformer")
def main():
    """GeoFormer: transformer-based mobility prediction on a 500x500 grid."""


@main.command()
@config_options
@click.option("--users", type=int, default=None, help="Number of synthetic users.")
@click.option("--days", type=int, default=None, help="Number of days (at most 75).")
@click.option("--seed", type=int, default=None)
@click.option("--emergency-day", type=int, default=None)
@click.option("--dow-offset", type=int, default=None)
@click.option("--out", required=True, type=OUTPUT_FILE, help="CSV to write.")
def synth(config_file, log_level, users, days, seed, emergency_day, dow_offset, out):
    """Generate a deterministic synthetic dataset in the ingestion CSV format."""
    cfg = _resolve(
        config_file,
        {
            "log_level": log_level,
            "synth.n_users": users,
            "synth.n_days": days,
            "synth.seed": seed,
            "synth.emergency_day": emergency_day,
            "synth.dow_offset": dow_offset,
        },
    )
    records = generate_synthetic(cfg.synth)
    path = write_csv(records, out)
    write_resolved_config(cfg, path.parent)
    console.print(
        f"Wrote {len(records)} records for {cfg.synth.n_users} users to {path}"
    )


@main.command()
@config_options
@click.option("--data", required=True, type=EXISTING_FILE)
@click.option("--horizon", type=int, default=None, help="Horizon day (default 60).")
@click.option("--out-dir", type=OUTPUT_DIR, default=None)
def eda(config_file, log_level, data, horizon, out_dir):
    """Seasonality, daily movement and out-of-training rate reports."""
    cfg = _resolve(config_file, {"log_level": log_level, "data.horizon_day": horizon})
    horizon_day = cfg.data.horizon_day
    out = _output_dir(cfg, out_dir, "eda")
    out.mkdir(parents=True, exist_ok=True)

    records = ingest_csv(data)
    if not records:
        raise StatsError(f"{data} holds no records")
    histories = build_histories(records, cfg.data.dow_offset)
    last_day = max(r.day for r in records) + 1

    before = events_per_slot(histories, (0, min(horizon_day, last_day)))
    per_slot = {"slot": list(range(len(before))), "before_horizon": before.tolist()}
    try:
        after = events_per_slot(histories, (horizon_day, last_day))
        per_slot["after_horizon"] = after.tolist()
    except StatsError:
        logger.info("No days after the horizon, reporting the observed period only")
    _write_frame(per_slot, out / "events_per_slot.csv")

    daily = daily_movement_counts(histories, (0, last_day))
    _write_frame({"day": list(range(last_day)), "movement": daily}, out / "daily_movement.csv")

    oov = oov_summary(histories.values(), horizon_day)
    edges = oov["bin_edges"]
    _write_frame(
        {
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "users_x": oov["hist_rate_x"],
            "users_y": oov["hist_rate_y"],
            "users_xy": oov["hist_rate_xy"],
        },
        out / "oov_histogram.csv",
    )

    summary = {
        "n_users": len(histories),
        "n_records": len(records),
        "horizon_day": horizon_day,
        "users_with_oov_rates": oov["n_users"],
        "mean_oov_rate_x": oov["mean_rate_x"],
        "mean_oov_rate_y": oov["mean_rate_y"],
        "mean_oov_rate_xy": oov["mean_rate_xy"],
        "movement_autocorrelation": {
            str(lag): autocorrelation(daily, lag) for lag in (1, 7, 14) if lag < len(daily)
        },
    }
    with open(out / "eda_summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")

    save_line_svg(
        before,
        out / "events_per_slot.svg",
        "Pings per slot before the horizon",
        "slot",
        "pings per user-day",
    )
    save_line_svg(
        daily,
        out / "daily_movement.svg",
        "Daily movement count",
        "day",
        "moves per user",
        marker_at=horizon_day if horizon_day < last_day else None,
    )
    save_histogram_svg(
        oov["hist_rate_xy"],
        edges,
        out / "oov_histogram.svg",
        "Out-of-training (x, y) rate after the horizon",
        "rate",
    )
    write_resolved_config(cfg, out)

    console.rule("pings per slot")
    console.print(sparkline(before))
    console.rule("daily movement")
    console.print(sparkline(daily))
    console.rule("out-of-training (x, y) rate")
    labels = [f"{lo:.1f}-{hi:.1f}" for lo, hi in zip(edges[:-1], edges[1:])]
    for row in bar_rows(labels, oov["hist_rate_xy"]):
        console.print(row, markup=False)
    console.print(f"Reports written to {out}")


def _window_data(split, histories, context_len, tc, day_min, day_max):
    train_data = WindowDataset.for_training(
        split, histories, day_min, day_max, context_len, tc.target_day_only_loss
    )
    val_data = WindowDataset.for_validation(
        split, histories, day_min, day_max, context_len, tc.target_day_only_loss
    )
    console.print(
        f"{len(train_data)} training windows, {len(val_data)} validation windows "
        f"over days [{day_min}, {day_max})"
    )
    return train_data, val_data


def _report_training(result, store: DirectoryCheckpointStore) -> None:
    table = Table(title="Training")
    for column in ("final step", "best step", "best eval loss", "last train loss"):
        table.add_column(column)
    best_loss = result.best_eval_loss
    table.add_row(
        str(result.final_step),
        str(result.best_step),
        f"{best_loss:.4f}" if best_loss is not None else "n/a",
        f"{result.train_losses[-1]:.4f}" if result.train_trace else "n/a",
    )
    console.print(table)
    best = store.best_path()
    if best is not None:
        console.print(f"Best checkpoint: {best}")


@main.command()
@config_options
@click.option("--data", required=True, type=EXISTING_FILE)
@click.option("--out-dir", type=OUTPUT_DIR, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--steps", type=int, default=None, help="Total optimizer steps.")
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None, help="Peak learning rate.")
@click.option("--warmup", type=int, default=None)
@click.option("--eval-interval", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--n-layers", type=int, default=None)
@click.option("--n-heads", type=int, default=None)
@click.option("--d-model", type=int, default=None)
@click.option("--target-day-only/--all-targets", default=None)
@click.option("--resume", type=EXISTING_FILE, default=None)
def train(
    config_file,
    log_level,
    data,
    out_dir,
    epochs,
    steps,
    batch_size,
    lr,
    warmup,
    eval_interval,
    seed,
    n_layers,
    n_heads,
    d_model,
    target_day_only,
    resume,
):
    """Train on all pre-horizon data (held-out users cut at the horizon)."""
    cfg = _resolve(
        config_file,
        {
            "log_level": log_level,
            "train.epochs": epochs,
            "train.total_steps": steps,
            "train.batch_size": batch_size,
            "train.lr_max": lr,
            "train.warmup_steps": warmup,
            "train.eval_interval": eval_interval,
            "train.seed": seed,
            "train.target_day_only_loss": target_day_only,
            "model.n_layers": n_layers,
            "model.n_heads": n_heads,
            "model.d_model": d_model,
        },
    )
    out = _output_dir(cfg, out_dir, "train")
    write_resolved_config(cfg, out)
    histories, split = _load_dataset(data, cfg)
    split_info = {
        "horizon_day": split.horizon_day,
        "train_uids": sorted(split.train_uids),
        "val_uids": sorted(split.val_uids),
        "test_uids": sorted(split.test_uids),
    }
    with open(out / "split.json", "w", encoding="utf-8") as f:
        json.dump(split_info, f, indent=2)
    store = DirectoryCheckpointStore(out / "checkpoints")

    with JsonLinesWriter(out / "train_log.jsonl") as log:
        if resume:
            checkpoint = load_checkpoint(resume)
            tc = checkpoint.train_config or cfg.train
            context_len = checkpoint.config.context_len
            train_data, val_data = _window_data(
                split, histories, context_len, tc, 0, N_DAYS
            )
            trainer = Trainer.from_checkpoint(
                checkpoint, train_data, tc, val_data, store, log
            )
            console.print(f"Resuming from step {checkpoint.step}")
        else:
            train_data, val_data = _window_data(
                split, histories, cfg.model.context_len, cfg.train, 0, N_DAYS
            )
            model = init_model(cfg.model)
            trainer = Trainer(model, train_data, cfg.train, val_data, store, log)
        result = trainer.run()
    _report_training(result, store)


@main.command("finetune")
@config_options
@click.option("--ckpt", required=True, type=EXISTING_FILE)
@click.option("--data", required=True, type=EXISTING_FILE)
@click.option("--out-dir", type=OUTPUT_DIR, default=None)
@click.option("--day-min", type=int, default=None, help="First day (default: horizon).")
@click.option("--day-max", type=int, default=N_DAYS, show_default=True)
@click.option("--epochs", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--warmup", type=int, default=None)
@click.option("--eval-interval", type=int, default=None)
def finetune_command(
    config_file,
    log_level,
    ckpt,
    data,
    out_dir,
    day_min,
    day_max,
    epochs,
    steps,
    lr,
    warmup,
    eval_interval,
):
    """Fine-tune a checkpoint on a day range with reset optimizer moments."""
    cfg = _resolve(
        config_file,
        {
            "log_level": log_level,
            "finetune.epochs": epochs,
            "finetune.total_steps": steps,
            "finetune.lr_max": lr,
            "finetune.warmup_steps": warmup,
            "finetune.eval_interval": eval_interval,
        },
    )
    out = _output_dir(cfg, out_dir, "finetune")
    write_resolved_config(cfg, out)
    histories, split = _load_dataset(data, cfg)
    day_min = cfg.data.horizon_day if day_min is None else day_min
    checkpoint = load_checkpoint(ckpt)
    train_data, val_data = _window_data(
        split, histories, checkpoint.config.context_len, cfg.finetune, day_min, day_max
    )
    store = DirectoryCheckpointStore(out / "checkpoints")
    with JsonLinesWriter(out / "train_log.jsonl") as log:
        result = finetune(checkpoint, train_data, cfg.finetune, val_data, store, log)
    _report_training(result, store)


@main.command()
@config_options
@click.option("--ckpt", type=EXISTING_FILE, default=None)
@click.option("--data", required=True, type=EXISTING_FILE)
@click.option("--out", required=True, type=OUTPUT_FILE, help="Predictions CSV.")
@click.option("--truth-out", type=OUTPUT_FILE, default=None)
@click.option(
    "--users", "which", type=click.Choice(USER_SETS), default="test", show_default=True
)
@click.option("--baseline", is_flag=True, help="Uniform draw from candidates, no model.")
@click.option("--temperature", type=float, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--top-p", type=float, default=None)
@click.option("--window", type=int, default=None, help="Candidate slot window.")
@click.option("--seed", type=int, default=None)
@click.option("--roll/--no-roll", default=None, help="Reuse generated days as context.")
@click.option("--jobs", type=int, default=None)
@click.option("--audit", type=OUTPUT_FILE, default=None, help="JSON-lines audit log.")
def predict(
    config_file,
    log_level,
    ckpt,
    data,
    out,
    truth_out,
    which,
    baseline,
    temperature,
    top_k,
    top_p,
    window,
    seed,
    roll,
    jobs,
    audit,
):
    """Predict the post-horizon days of held-out users."""
    cfg = _resolve(
        config_file,
        {
            "log_level": log_level,
            "generation.temperature": temperature,
            "generation.top_k": top_k,
            "generation.top_p": top_p,
            "generation.candidate_window": window,
            "generation.seed": seed,
            "generation.roll": roll,
            "jobs": jobs,
        },
    )
    if not baseline and ckpt is None:
        raise click.UsageError("--ckpt is required unless --baseline is given")
    out_path = Path(out)
    horizon_day = cfg.data.horizon_day
    histories, split = _load_dataset(data, cfg)
    uids = _eligible_users(histories, split, which, horizon_day)
    eval_set = build_eval_set(histories, uids, horizon_day)

    if baseline:
        predictor = RandomCandidatePredictor(cfg.generation, horizon_day)
    else:
        model = load_checkpoint(ckpt).to_model()
        predictor = GeoFormerPredictor(model, cfg.generation, horizon_day)

    writer = JsonLinesWriter(audit) if audit else None
    decoding_audit = DecodingAudit(writer, keep=True)
    try:
        predictions = predict_all(
            predictor,
            histories,
            eval_set.signatures,
            cfg.generation.seed,
            cfg.jobs,
            decoding_audit,
        )
    finally:
        if writer is not None:
            writer.close()

    write_csv(predictions, out_path)
    truth_path = write_csv(eval_set.truth, truth_out or out_path.parent / "truth.csv")
    write_resolved_config(cfg, out_path.parent)
    console.print(
        f"{len(predictions)} predicted pings for {len(eval_set.signatures)} users "
        f"written to {out_path}"
    )
    console.print(f"Truth for the same keys written to {truth_path}")
    tiers = dict(sorted(decoding_audit.tier_counts().items()))
    console.print(
        f"Candidate compliance {decoding_audit.compliance():.4f}, tiers used {tiers}"
    )


@main.command("evaluate")
@config_options
@click.option("--pred", required=True, type=EXISTING_FILE)
@click.option("--truth", required=True, type=EXISTING_FILE)
@click.option("--report", type=OUTPUT_FILE, default=None, help="Report JSON.")
@click.option("--geobleu-grouping", type=click.Choice(GROUPINGS), default=None)
@click.option("--dtw-grouping", type=click.Choice(GROUPINGS), default=None)
@click.option("--jobs", type=int, default=None)
def evaluate_command(
    config_file, log_level, pred, truth, report, geobleu_grouping, dtw_grouping, jobs
):
    """Score predictions against truth with GEO-BLEU and DTW."""
    cfg = _resolve(
        config_file,
        {
            "log_level": log_level,
            "metrics.geobleu_grouping": geobleu_grouping,
            "metrics.dtw_grouping": dtw_grouping,
            "jobs": jobs,
        },
    )
    result = evaluate(ingest_csv(pred), ingest_csv(truth), cfg.metrics, jobs=cfg.jobs)
    if report:
        result.write_json(report)
        write_resolved_config(cfg, Path(report).parent)
    console.print(f"GEO-BLEU {result.mean_geobleu:.4f}")
    console.print(f"DTW {result.mean_dtw:.4f}")


@main.command()
@config_options
@click.option("--ckpt", required=True, type=EXISTING_FILE)
@click.option("--data", required=True, type=EXISTING_FILE)
@click.option("--temperatures", default="0.2,0.6,1.0", show_default=True)
@click.option("--top-ks", default="5", show_default=True)
@click.option("--seeds", default="0", show_default=True)
@click.option(
    "--users", "which", type=click.Choice(USER_SETS), default="test", show_default=True
)
@click.option("--out-dir", type=OUTPUT_DIR, default=None)
@click.option("--jobs", type=int, default=None)
def sweep(
    config_file, log_level, ckpt, data, temperatures, top_ks, seeds, which, out_dir, jobs
):
    """Score every temperature x top-k x seed combination."""
    cfg = _resolve(config_file, {"log_level": log_level, "jobs": jobs})
    out = _output_dir(cfg, out_dir, "sweep")
    horizon_day = cfg.data.horizon_day
    histories, split = _load_dataset(data, cfg)
    uids = _eligible_users(histories, split, which, horizon_day)
    eval_set = build_eval_set(histories, uids, horizon_day)
    rows = sweep_generation(
        load_checkpoint(ckpt).to_model(),
        eval_set,
        histories,
        _parse_list(temperatures, float),
        _parse_list(top_ks, int),
        cfg.generation,
        _parse_list(seeds, int),
        cfg.metrics,
        cfg.jobs,
    )
    write_sweep_csv(rows, out / "sweep.csv")
    write_sweep_json(rows, out / "sweep.json")
    write_resolved_config(cfg, out)

    table = Table(title="Generation sweep")
    for column in ("temperature", "top_k", "seed", "GEO-BLEU", "DTW"):
        table.add_column(column)
    for r in rows:
        table.add_row(
            str(r.temperature),
            str(r.top_k),
            str(r.seed),
            f"{r.geobleu:.4f}",
            f"{r.dtw:.4f}",
        )
    console.print(table)


@main.command("inspect-ckpt")
@click.argument("path", type=EXISTING_FILE)
@click.option("--json", "as_json", is_flag=True, help="Print machine-readable JSON.")
def inspect_ckpt(path, as_json):
    """Show a checkpoint's header and tensor inventory."""
    checkpoint = load_checkpoint(path)
    n_params = int(sum(a.size for a in checkpoint.params.values()))
    info = {
        "format_version": checkpoint.version,
        "step": checkpoint.step,
        "model": checkpoint.config.model_dump(mode="json"),
        "trainer_state": checkpoint.trainer_state,
        "n_parameters": n_params,
        "has_optimizer_state": bool(checkpoint.adam_m),
        "tensors": {name: list(a.shape) for name, a in checkpoint.params.items()},
    }
    if as_json:
        click.echo(json.dumps(info, indent=2, sort_keys=True))
        return
    console.print(
        f"[bold]{path}[/bold]: format v{checkpoint.version}, step {checkpoint.step}, "
        f"{n_params:,} parameters, dtype {checkpoint.config.dtype}"
    )
    console.print(f"model: {info['model']}")
    console.print(f"trainer state: {checkpoint.trainer_state}")
    table = Table(title="Parameters")
    table.add_column("name")
    table.add_column("shape")
    for name, shape in info["tensors"].items():
        table.add_row(name, "x".join(str(d) for d in shape))
    console.print(table)


@main.command()
@click.option("--out", type=OUTPUT_FILE, default=None, help="Write token -> id JSON.")
def vocab(out):
    """Show (or dump) the fixed vocabulary."""
    vocabulary = build_vocabulary()
    if out:
        vocabulary.dump_json(out)
        console.print(f"Wrote {len(vocabulary)} tokens to {out}")
        return
    table = Table(title=f"Vocabulary ({len(vocabulary)} tokens)")
    table.add_column("ids")
    table.add_column("tokens")
    for ids, tokens in VOCAB_LAYOUT:
        table.add_row(ids, tokens)
    console.print(table)
