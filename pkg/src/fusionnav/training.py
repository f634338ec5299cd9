"""Training protocol: initial-LR grid search, plateau-driven LR decay, early
stopping, and per-epoch loss records.

The improvement predicate is shared by the scheduler and the stopper: an
epoch improves iff its validation loss beats the best seen so far by more
than min_delta. Both patience counters run concurrently on that predicate;
the scheduler multiplies the LR by its factor (and resets its own counter)
after scheduler_patience consecutive non-improving epochs, and training
stops after early_stop_patience of them. The returned checkpoint is always
the best-validation epoch's parameters.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fusionnav.dataset import batches, part_episodes, split_episodes, stack_part
from fusionnav.models import FUSION_KINDS, FusionNet, desk_config, save_model
from fusionnav.nn import adam_step, mse_loss_backward, mse_loss_forward


class ConfigurationError(ValueError):
    """Unknown architecture tag or invalid training configuration."""


class GridSearchError(RuntimeError):
    """Every grid-search candidate diverged."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, batch_index, lr):
        super().__init__(
            f"non-finite training loss at epoch {epoch}, batch {batch_index}, lr {lr:g}"
        )
        self.epoch = epoch
        self.batch_index = batch_index
        self.lr = lr


@dataclass(frozen=True)
class TrainConfig:
    lr_grid: tuple = (1e-6, 3e-6, 3e-5, 1e-4, 3e-4)
    grid_epochs: int = 5
    scheduler_factor: float = 0.2
    scheduler_patience: int = 3
    early_stop_patience: int = 5
    min_delta: float = 1e-6
    max_epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    weight_decay: float = 0.0  # decoupled multiplicative decay per step

    def __post_init__(self):
        if not self.lr_grid or any(lr <= 0 for lr in self.lr_grid):
            raise ConfigurationError(f"lr_grid must be positive and non-empty: {self.lr_grid}")
        if not (0.0 < self.scheduler_factor < 1.0):
            raise ConfigurationError(f"scheduler factor must be in (0,1): {self.scheduler_factor}")
        if self.scheduler_patience < 1 or self.early_stop_patience < 1:
            raise ConfigurationError("patience values must be >= 1")


@dataclass
class EpochGovernor:
    """Plateau scheduler + early stopper driven by one improvement predicate."""

    lr: float
    factor: float
    scheduler_patience: int
    early_stop_patience: int
    min_delta: float
    best_val: float = math.inf
    best_epoch: int = 0
    plateau_count: int = 0
    stop_count: int = 0
    stop: bool = False

    def observe(self, epoch: int, val_loss: float) -> bool:
        """Feed one epoch's validation loss; returns whether it improved."""
        improved = val_loss < self.best_val - self.min_delta
        if improved:
            self.best_val = val_loss
            self.best_epoch = epoch
            self.plateau_count = 0
            self.stop_count = 0
        else:
            self.plateau_count += 1
            self.stop_count += 1
            if self.plateau_count >= self.scheduler_patience:
                self.lr *= self.factor
                self.plateau_count = 0  # best_val is kept
            if self.stop_count >= self.early_stop_patience:
                self.stop = True
        return improved


@dataclass
class TrainRecord:
    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss, lr)
    stop_epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.inf
    best_params: dict = field(default_factory=dict)
    checkpoint_path: str = ""


def _train_epoch(net: FusionNet, train_part, lr: float, config: TrainConfig, epoch: int) -> float:
    """One optimizer pass over the training part; returns the sample-weighted
    mean of the per-batch losses."""
    total = 0.0
    count = 0
    for batch_index, (color, depth, omega) in enumerate(
        batches(train_part, config.batch_size, seed=config.seed, epoch=epoch)
    ):
        out, cache = net.forward(color, depth, with_cache=True)
        loss, loss_cache = mse_loss_forward(out, omega.astype(net.dtype))
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch, batch_index, lr)
        net.zero_grads()
        net.backward(mse_loss_backward(loss_cache), cache)
        adam_step(net.param_states(), lr=lr)
        if config.weight_decay:
            shrink = net.dtype.type(1.0 - lr * config.weight_decay)
            for p in net.param_states():
                p.value *= shrink
        total += loss * color.shape[0]
        count += color.shape[0]
    return total / count


def evaluate_loss(net: FusionNet, part, batch_size: int = 64) -> float:
    """Mean squared error over a whole part, computed in fixed-size chunks
    with no parameter updates."""
    color, depth, omega = part
    preds = predict(net, color, depth, batch_size=batch_size)
    diff = preds.astype(np.float64) - omega.astype(np.float64)
    return float(np.mean(diff * diff))


def predict(net: FusionNet, color, depth, batch_size: int = 64) -> np.ndarray:
    chunks = [
        net.forward(color[i : i + batch_size], depth[i : i + batch_size])
        for i in range(0, color.shape[0], batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def train(net: FusionNet, train_part, val_part, initial_lr: float, config: TrainConfig) -> TrainRecord:
    """Full protocol: per epoch one training pass then one validation pass,
    with the plateau scheduler and early stopper watching the val loss."""
    governor = EpochGovernor(
        lr=initial_lr,
        factor=config.scheduler_factor,
        scheduler_patience=config.scheduler_patience,
        early_stop_patience=config.early_stop_patience,
        min_delta=config.min_delta,
    )
    record = TrainRecord()
    for epoch in range(1, config.max_epochs + 1):
        lr_in_effect = governor.lr
        train_loss = _train_epoch(net, train_part, lr_in_effect, config, epoch)
        val_loss = evaluate_loss(net, val_part)
        record.epochs.append((epoch, train_loss, val_loss, lr_in_effect))
        record.stop_epoch = epoch
        if governor.observe(epoch, val_loss):
            record.best_params = {k: p.value.copy() for k, p in net.params.items()}
        if governor.stop:
            break
    record.best_epoch = governor.best_epoch
    record.best_val_loss = governor.best_val
    return record


def select_best_lr(table) -> float:
    """Argmin of final training loss; exact ties go to the smaller LR."""
    finite = [(loss, lr) for lr, loss in table if math.isfinite(loss)]
    if not finite:
        raise GridSearchError(f"every grid candidate diverged: {table}")
    _, best_lr = min(finite)
    return best_lr


# fork-inherited context for parallel grid workers (candidates share nothing
# mutable: each builds its own model and only reads the stacked arrays)
_GRID_CONTEXT: dict = {}


def _grid_candidate(lr: float) -> tuple:
    build_model = _GRID_CONTEXT["build_model"]
    train_part = _GRID_CONTEXT["train_part"]
    config = _GRID_CONTEXT["config"]
    net = build_model()
    final = math.inf
    try:
        for epoch in range(1, config.grid_epochs + 1):
            final = _train_epoch(net, train_part, lr, config, epoch)
    except TrainingDivergedError:
        final = math.inf
    return lr, final


def _grid_worker_init():
    # one BLAS thread per worker process; the results are unchanged (GEMM
    # does not split its reduction axis) and the workers stop contending
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=1)
    except ImportError:
        pass


def grid_search_lr(build_model, train_part, config: TrainConfig, workers: int = 1):
    """Train a fresh identically-seeded model per candidate LR for exactly
    grid_epochs epochs (no scheduler, no early stop, no validation) and pick
    the LR with the lowest final-epoch training loss. Diverging candidates
    are recorded as +inf and excluded. Candidates share nothing, so with
    workers > 1 they run in forked processes; the table is identical either
    way."""
    _GRID_CONTEXT.update(
        build_model=build_model, train_part=train_part, config=config
    )
    try:
        if workers > 1 and len(config.lr_grid) > 1:
            import multiprocessing

            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(min(workers, len(config.lr_grid)), initializer=_grid_worker_init) as pool:
                table = pool.map(_grid_candidate, config.lr_grid)
        else:
            table = [_grid_candidate(lr) for lr in config.lr_grid]
    finally:
        _GRID_CONTEXT.clear()
    return select_best_lr(table), table


@dataclass
class ExperimentResult:
    arch: str
    net: FusionNet
    record: TrainRecord
    grid_table: list
    best_lr: float
    split: object
    parts: dict  # name -> stacked (color, depth, omega)


def write_loss_curve(record: TrainRecord, path) -> None:
    lines = ["epoch,train_loss,val_loss,lr"]
    for epoch, train_loss, val_loss, lr in record.epochs:
        lines.append(f"{epoch},{train_loss!r},{val_loss!r},{lr!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_grid_table(table, path) -> None:
    lines = ["lr,final_train_loss"]
    for lr, loss in table:
        lines.append(f"{lr!r},{loss!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(
    arch: str,
    episodes: list,
    config: TrainConfig,
    out_dir=None,
    model_config=None,
    include_flagged: bool = False,
    grid_workers: int = 2,
) -> ExperimentResult:
    """Grid search then full training for one architecture; optionally write
    checkpoint, loss curve, and grid table under out_dir."""
    if arch not in FUSION_KINDS:
        raise ConfigurationError(f"unknown arch {arch!r}; valid tags: {list(FUSION_KINDS)}")
    kept = [e for e in episodes if include_flagged or not e.flagged]
    if not kept or all(not e.samples for e in kept):
        raise ValueError("dataset is empty; nothing to train on")
    split = split_episodes(kept, seed=config.seed)
    parts = {
        name: stack_part(part_episodes(kept, ids))
        for name, ids in (("train", split.train), ("val", split.val), ("test", split.test))
    }
    if model_config is None:
        model_config = desk_config(arch)

    def build_model():
        return FusionNet.build(model_config, seed=config.seed)

    best_lr, grid_table = grid_search_lr(
        build_model, parts["train"], config, workers=grid_workers
    )
    net = build_model()
    record = train(net, parts["train"], parts["val"], best_lr, config)
    for name, value in record.best_params.items():
        net.params[name].value = value.copy()
    result = ExperimentResult(
        arch=arch,
        net=net,
        record=record,
        grid_table=grid_table,
        best_lr=best_lr,
        split=split,
        parts=parts,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = out_dir / f"{arch}.ckpt"
        save_model(net, ckpt)
        record.checkpoint_path = str(ckpt)
        write_loss_curve(record, out_dir / f"{arch}_losses.csv")
        write_grid_table(grid_table, out_dir / f"{arch}_grid.csv")
    return result
