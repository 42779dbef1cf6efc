"""
Temperature x top-k sweep of generation parameters.
"""

import itertools
import json
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from geoformer.core.logging import get_logger
from geoformer.core.models.config import EvalConfig, GenConfig
from geoformer.core.models.mobility import UserHistory
from geoformer.evaluation.report import EvalSet, evaluate
from geoformer.generation.generator import GeoFormerPredictor, predict_all
from geoformer.model.transformer import GeoFormer

logger = get_logger(__name__)

SWEEP_COLUMNS = ["temperature", "top_k", "geobleu", "dtw", "seed"]


class SweepRow(BaseModel):
    temperature: float
    top_k: int
    geobleu: float
    dtw: float
    seed: int


def sweep_generation(
    model: GeoFormer,
    eval_set: EvalSet,
    histories: Mapping[int, UserHistory],
    temperatures: Sequence[float],
    top_ks: Sequence[int],
    base: Optional[GenConfig] = None,
    seeds: Optional[Sequence[int]] = None,
    eval_config: Optional[EvalConfig] = None,
    jobs: int = 1,
) -> List[SweepRow]:
    """
    Predict and score every (temperature, top_k, seed) combination.

    Args:
        model: Trained model
        eval_set: Signatures and truth
        histories: Full histories; only pre-horizon days are read
        temperatures: Temperatures to try
        top_ks: top_k values to try
        base: Remaining generation settings (defaults otherwise)
        seeds: Generation seeds per cell; defaults to the base seed
        eval_config: Metric settings
        jobs: Worker threads for prediction

    Returns:
        One row per combination, in factorial order
    """
    base = base or GenConfig()
    seeds = list(seeds) if seeds is not None else [base.seed]
    rows = []
    for temperature, top_k, seed in itertools.product(temperatures, top_ks, seeds):
        cfg = base.model_copy(update={"temperature": temperature, "top_k": top_k, "seed": seed})
        predictor = GeoFormerPredictor(model, cfg, eval_set.horizon_day)
        predictions = predict_all(predictor, histories, eval_set.signatures, cfg.seed, jobs)
        report = evaluate(predictions, eval_set.truth, eval_config, cfg)
        row = SweepRow(
            temperature=temperature,
            top_k=top_k,
            geobleu=report.mean_geobleu,
            dtw=report.mean_dtw,
            seed=seed,
        )
        logger.info(
            f"sweep temperature={temperature} top_k={top_k} seed={seed}: "
            f"GEO-BLEU {row.geobleu:.4f} DTW {row.dtw:.4f}"
        )
        rows.append(row)
    return rows


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=SWEEP_COLUMNS)


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sweep_frame(rows).to_csv(path, index=False, lineterminator="\n")
    return path


def write_sweep_json(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    """
    Plot-ready summary: the raw rows plus, per top_k, seed-averaged metric
    series ordered by temperature.
    """
    frame = sweep_frame(rows)
    series = {}
    if not frame.empty:
        means = (
            frame.groupby(["top_k", "temperature"])[["geobleu", "dtw"]]
            .mean()
            .reset_index()
            .sort_values(["top_k", "temperature"])
        )
        for top_k, group in means.groupby("top_k"):
            series[str(int(top_k))] = {
                "temperature": group["temperature"].tolist(),
                "geobleu": group["geobleu"].tolist(),
                "dtw": group["dtw"].tolist(),
            }
    payload = {"rows": [r.model_dump() for r in rows], "series_by_top_k": series}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return path
