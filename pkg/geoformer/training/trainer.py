"""
Epoch loop with periodic validation, checkpointing and best-model selection.

Each epoch visits the windows in a permutation drawn from a generator seeded
by (seed, epoch), so a run resumed from a checkpoint at step k replays the
same batches as the uninterrupted run.
"""

import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from geoformer.autograd.tensor import Tape, backward
from geoformer.core.logging import JsonLinesWriter, get_logger
from geoformer.core.models.config import TrainConfig
from geoformer.model.checkpoint import Checkpoint
from geoformer.model.optim import AdamWState, NonFiniteError, adamw_step, clip_gradients, lr_at
from geoformer.model.store import CheckpointStoreInterface
from geoformer.model.transformer import GeoFormer, next_token_loss
from geoformer.training.windows import Batch, TrainingError, WindowDataset

logger = get_logger(__name__)


class DivergenceError(TrainingError):
    """Raised when the training loss or a gradient becomes NaN or infinite."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"step {step}: {message}")


class StepRecord(BaseModel):
    step: int
    epoch: int
    lr: float
    train_loss: float
    grad_norm: float


class EvalRecord(BaseModel):
    step: int
    eval_loss: float


class TrainResult(BaseModel):
    """Loss traces plus the selected checkpoint."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    train_trace: List[StepRecord] = Field(default_factory=list)
    eval_trace: List[EvalRecord] = Field(default_factory=list)
    best_step: Optional[int] = None
    best_eval_loss: Optional[float] = None
    final_step: int = 0
    best: Optional[Checkpoint] = None
    last: Optional[Checkpoint] = None

    @property
    def train_losses(self) -> List[float]:
        return [r.train_loss for r in self.train_trace]

    @property
    def eval_losses(self) -> List[float]:
        return [r.eval_loss for r in self.eval_trace]


def evaluate_loss(model: GeoFormer, data: WindowDataset, batch_size: int) -> float:
    """Token-weighted mean next-token loss, dropout disabled, nothing recorded."""
    total, count = 0.0, 0
    for batch in data.batches(batch_size):
        loss = next_token_loss(model.forward(batch.inputs, training=False), batch.targets)
        n = batch.n_targets
        total += loss.item() * n
        count += n
    if count == 0:
        raise TrainingError("validation data has no target tokens")
    return total / count


class Trainer:
    """
    Sequential optimizer loop over a window dataset.

    Args:
        model: Model whose parameters are updated in place
        train_data: Training windows
        tc: Training configuration (total_steps is resolved from the data when unset)
        val_data: Validation windows; when empty the final checkpoint is selected
        store: Where interval checkpoints go
        log: JSON-lines sink for step and eval records
        optimizer: Existing moments (resume); fresh zeros otherwise
        state: Trainer position (epoch, cursor, best) restored from a checkpoint
    """

    def __init__(
        self,
        model: GeoFormer,
        train_data: WindowDataset,
        tc: TrainConfig,
        val_data: Optional[WindowDataset] = None,
        store: Optional[CheckpointStoreInterface] = None,
        log: Optional[JsonLinesWriter] = None,
        optimizer: Optional[AdamWState] = None,
        state: Optional[Dict[str, Any]] = None,
    ):
        if len(train_data) == 0:
            raise TrainingError("no training windows")
        self.model = model
        self.train_data = train_data
        self.tc = tc.resolve_total_steps(len(train_data))
        self.val_data = val_data if val_data is not None and len(val_data) > 0 else None
        self.store = store
        self.log = log or JsonLinesWriter()
        self.optimizer = optimizer or AdamWState.zeros_like(dict(model.named_arrays()))

        state = state or {}
        self.epoch = int(state.get("epoch", 0))
        self.cursor = int(state.get("cursor", 0))
        best = state.get("best_eval_loss")
        self.best_eval_loss: Optional[float] = float(best) if best is not None else None
        self.best_step: Optional[int] = state.get("best_step")
        self._best: Optional[Checkpoint] = None

        if self.val_data is None:
            logger.warning("No validation windows; the last checkpoint will be selected")

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        train_data: WindowDataset,
        tc: Optional[TrainConfig] = None,
        val_data: Optional[WindowDataset] = None,
        store: Optional[CheckpointStoreInterface] = None,
        log: Optional[JsonLinesWriter] = None,
    ) -> "Trainer":
        """Resume exactly where a checkpoint left off."""
        tc = tc or checkpoint.train_config
        if tc is None:
            raise TrainingError("checkpoint carries no training config; pass one explicitly")
        return cls(
            checkpoint.to_model(),
            train_data,
            tc,
            val_data,
            store,
            log,
            optimizer=checkpoint.optimizer_state(),
            state=checkpoint.trainer_state,
        )

    @property
    def step(self) -> int:
        return self.optimizer.step

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(len(self.train_data) / self.tc.batch_size)

    def state(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "cursor": self.cursor,
            "best_eval_loss": self.best_eval_loss,
            "best_step": self.best_step,
        }

    def _next_batch(self) -> Batch:
        if self.cursor >= self.batches_per_epoch:
            self.epoch += 1
            self.cursor = 0
        order = np.random.default_rng([self.tc.seed, self.epoch]).permutation(len(self.train_data))
        bs = self.tc.batch_size
        indices = order[self.cursor * bs:(self.cursor + 1) * bs]
        self.cursor += 1
        return self.train_data.batch(indices.tolist())

    def train_step(self) -> StepRecord:
        """
        One optimizer update.

        Raises:
            DivergenceError: If the loss or gradients are not finite
        """
        batch = self._next_batch()
        epoch = self.epoch
        t = self.step + 1
        lr = lr_at(t, self.tc)

        self.model.zero_grad()
        with Tape() as tape:
            logits = self.model.forward(batch.inputs, training=True)
            loss = next_token_loss(logits, batch.targets)
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            raise DivergenceError(f"training loss is {loss_value}", t)

        params = self.model.parameters()
        backward(tape, loss, params=params.values())
        try:
            grads, norm = clip_gradients(
                {name: p.grad for name, p in params.items()}, self.tc.clip_norm
            )
            arrays, self.optimizer = adamw_step(
                dict(self.model.named_arrays()), grads, self.optimizer, self.tc, lr
            )
        except NonFiniteError as exc:
            raise DivergenceError(str(exc), t) from exc

        for name, p in params.items():
            p.data = arrays[name]
            p.grad = None

        record = StepRecord(step=t, epoch=epoch, lr=lr, train_loss=loss_value, grad_norm=norm)
        self.log.write({"kind": "train", **record.model_dump()})
        return record

    def _checkpoint(self) -> Checkpoint:
        return Checkpoint.capture(self.model, self.optimizer, self.state(), self.tc)

    def _evaluate_and_save(self, result: TrainResult) -> None:
        eval_loss: Optional[float] = None
        if self.val_data is not None:
            eval_loss = evaluate_loss(self.model, self.val_data, self.tc.batch_size)
            if not math.isfinite(eval_loss):
                raise DivergenceError(f"validation loss is {eval_loss}", self.step)
            record = EvalRecord(step=self.step, eval_loss=eval_loss)
            result.eval_trace.append(record)
            self.log.write({"kind": "eval", **record.model_dump()})

        improved = (
            eval_loss is None
            or self.best_eval_loss is None
            or eval_loss < self.best_eval_loss
        )
        if improved:
            self.best_eval_loss = eval_loss
            self.best_step = self.step

        checkpoint = self._checkpoint()
        result.last = checkpoint
        if improved:
            self._best = checkpoint
        if self.store is not None:
            self.store.save(checkpoint)
            if improved:
                self.store.mark_best(self.step)

        logger.info(
            f"step {self.step}/{self.tc.total_steps} epoch {self.epoch} "
            f"eval_loss={eval_loss if eval_loss is not None else 'n/a'} "
            f"best_step={self.best_step}"
        )

    def run(self, max_steps: Optional[int] = None) -> TrainResult:
        """
        Train until total_steps (or until max_steps more updates).

        Validation and checkpointing happen every eval_interval updates and
        once more after the final update.
        """
        result = TrainResult()
        stop = self.tc.total_steps
        if max_steps is not None:
            stop = min(stop, self.step + max_steps)
        logger.info(
            f"Training from step {self.step} to {stop}: {len(self.train_data)} windows, "
            f"batch size {self.tc.batch_size}, {self.batches_per_epoch} batches per epoch"
        )

        while self.step < stop:
            result.train_trace.append(self.train_step())
            if self.step % self.tc.eval_interval == 0 or self.step == stop:
                self._evaluate_and_save(result)

        result.final_step = self.step
        result.best_step = self.best_step
        result.best_eval_loss = self.best_eval_loss
        result.best = self._best
        if result.best is None and self.store is not None and self.best_step is not None:
            result.best = self.store.load(self.best_step)
        return result


def run_training(
    model: GeoFormer,
    train_data: WindowDataset,
    tc: TrainConfig,
    val_data: Optional[WindowDataset] = None,
    store: Optional[CheckpointStoreInterface] = None,
    log: Optional[JsonLinesWriter] = None,
) -> TrainResult:
    """
    Train a model from its current parameters with fresh optimizer state.

    Raises:
        TrainingError: If there are no training windows
        DivergenceError: If the loss becomes NaN or infinite
    """
    return Trainer(model, train_data, tc, val_data, store, log).run()


def finetune(
    checkpoint: Checkpoint,
    train_data: WindowDataset,
    tc: TrainConfig,
    val_data: Optional[WindowDataset] = None,
    store: Optional[CheckpointStoreInterface] = None,
    log: Optional[JsonLinesWriter] = None,
) -> TrainResult:
    """
    Continue training a checkpoint's parameters with reset moments and a new schedule.

    The loop, validation and best selection are those of run_training; step
    numbering restarts at zero.
    """
    model = checkpoint.to_model()
    logger.info(
        f"Fine-tuning checkpoint from step {checkpoint.step} on {len(train_data)} windows "
        f"(warmup {tc.warmup_steps}, lr_max {tc.lr_max})"
    )
    return Trainer(model, train_data, tc, val_data, store, log).run()
