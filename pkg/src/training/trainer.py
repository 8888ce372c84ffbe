# src/training/trainer.py
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional, Tuple

import pandas as pd
import torch
from torch.utils.data import DataLoader, Dataset

from src.config_validation import validate_config
from src.data.dataset import DelaySequenceDataset, SuppressionSequenceDataset
from src.model.architecture import NeuralModel, classifier_specs, parameter_count, suppressor_specs
from src.model.weights_io import save_model
from src.training.evaluation import accuracy, evaluate
from src.training.loss import DelayLoss, SuppressionLoss
from src.training.optimization import get_optimizer_and_scheduler
from src.utils.exceptions import ConfigError, NumericalFailure
from src.utils.logger import setup_logger

LOSSES = ("cross-entropy", "band-gain-mse")
TASKS = {"tde": "cross-entropy", "res": "band-gain-mse"}


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 20
    optimizer: str = "adam"
    seed: int = 0
    loss: str = "cross-entropy"
    warmup_steps: int = 0
    schedule: str = "constant"
    warmup_frames: int = 0
    max_grad_norm: float = 1.0
    alpha: float = 0.7

    def validate(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss '{self.loss}', expected one of {LOSSES}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("learning_rate, batch_size and epochs must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")


def _merge(target: dict, overrides: dict):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _merge(target[key], value)
        else:
            target[key] = value


def make_criterion(config: TrainConfig):
    return DelayLoss() if config.loss == "cross-entropy" else SuppressionLoss(config.alpha)


def train(model: NeuralModel, dataset: Dataset, config: TrainConfig, val_dataset: Optional[Dataset] = None,
          save_path: Optional[str] = None, logger: Optional[logging.Logger] = None
          ) -> Tuple[NeuralModel, pd.DataFrame]:
    """Fit `model` in place and return it with the per-epoch loss curve.

    The curve has columns epoch, loss, accuracy (training set) and, with a
    validation set, val_loss and val_accuracy. Epoch 0 is the untrained model.
    With `save_path`, the model with the best validation loss (training loss
    when there is no validation set) is written there.

    Raises:
        NumericalFailure: the loss became NaN or infinite.
    """
    logger = logger or logging.getLogger(__name__)
    config.validate()
    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=True, generator=generator)
    eval_loader = DataLoader(dataset, batch_size=config.batch_size, shuffle=False)
    val_loader = DataLoader(val_dataset, batch_size=config.batch_size, shuffle=False) if val_dataset else None

    criterion = make_criterion(config)
    optimizer, scheduler = get_optimizer_and_scheduler(
        model.net.parameters(),
        optimizer=config.optimizer,
        lr=config.learning_rate,
        warmup_steps=config.warmup_steps,
        total_steps=len(loader) * config.epochs,
        schedule=config.schedule,
    )

    history = []

    def record(epoch: int):
        row = {"epoch": epoch, **evaluate(model, eval_loader, criterion)}
        if val_loader is not None:
            val = evaluate(model, val_loader, criterion)
            row.update(val_loss=val["loss"], val_accuracy=val["accuracy"])
        history.append(row)
        return row

    best = record(0)
    best_loss = best.get("val_loss", best["loss"])
    logger.info(f"Training {parameter_count(model)} parameters on {len(dataset)} sequences, "
                f"initial loss {best['loss']:.4f}")

    for epoch in range(1, config.epochs + 1):
        model.net.train()
        for step, (inputs, targets) in enumerate(loader):
            optimizer.zero_grad()
            outputs = model.net(inputs)
            loss = criterion(outputs, targets)
            if not math.isfinite(loss.item()):
                raise NumericalFailure(
                    f"loss became {loss.item()} at epoch {epoch} step {step}; "
                    f"lower learning_rate (currently {config.learning_rate}) or max_grad_norm")
            loss.backward()
            if config.max_grad_norm > 0:
                torch.nn.utils.clip_grad_norm_(model.net.parameters(), max_norm=config.max_grad_norm)
            optimizer.step()
            scheduler.step()
            if step % 100 == 0:
                logger.debug(f"epoch {epoch} batch {step} loss {loss.item():.4f} "
                             f"accuracy {accuracy(outputs, targets):.3f}")

        row = record(epoch)
        logger.info(f"Epoch {epoch}: loss = {row['loss']:.4f}, accuracy = {row['accuracy']:.3f}"
                    + (f", val loss = {row['val_loss']:.4f}" if "val_loss" in row else ""))
        current = row.get("val_loss", row["loss"])
        if save_path and current < best_loss:
            best_loss = current
            save_model(model, save_path)
            logger.info(f"Saved best model with loss {best_loss:.4f}")

    if save_path and not os.path.exists(save_path):
        save_model(model, save_path)
    model.net.eval()
    return model, pd.DataFrame(history)


class Trainer:
    """Trains the delay classifier (`tde`) or the suppressor (`res`) from a JSON config.

    The config has `model_params`, `training_params`, `data_params` and
    `output_params` sections; the first two hold one block per task.
    """

    def __init__(self, config_path: str, task: str = "tde", overrides: Optional[dict] = None):
        if task not in TASKS:
            raise ConfigError(f"unknown task '{task}', expected one of {sorted(TASKS)}")
        self.config = validate_config(config_path)
        self.task = task
        _merge(self.config, overrides or {})

        params = dict(self.config['training_params'][task])
        params.setdefault('loss', TASKS[task])
        params.setdefault('warmup_frames', self.config['data_params'].get('warmup_frames', 0))
        self.train_config = TrainConfig(**params)

        output = self.config['output_params']
        os.makedirs(output['log_dir'], exist_ok=True)
        self.logger = setup_logger("trainer", os.path.join(output['log_dir'], "training.log"))
        self.model_path = output.get(f'{task}_model_path') or os.path.join(output['model_dir'], f"{task}.efnn")

        self.setup_model()
        self.setup_data()

    def setup_model(self):
        """Build the network described by model_params."""
        model_params = dict(self.config['model_params'][self.task])
        preprocessing = model_params.pop('preprocessing', "log1p-max-normalize" if self.task == "tde" else "identity")
        try:
            specs = classifier_specs(**model_params) if self.task == "tde" else suppressor_specs(**model_params)
            self.model = NeuralModel(specs, preprocessing=preprocessing, seed=self.train_config.seed)
            self.logger.info(f"Model initialized with {parameter_count(self.model)} parameters")
        except Exception as e:
            self.logger.error(f"Failed to initialize model: {str(e)}")
            raise

    def setup_data(self):
        data_config = self.config['data_params']
        dataset_cls = DelaySequenceDataset if self.task == "tde" else SuppressionSequenceDataset
        try:
            kwargs = dict(preprocessing=self.model.preprocessing,
                          warmup_frames=self.train_config.warmup_frames,
                          limit=data_config.get('limit'))
            self.train_data = dataset_cls.from_manifest(data_config['data_dir'], "train", **kwargs)
            try:
                self.val_data = dataset_cls.from_manifest(data_config['data_dir'], "valid", **kwargs)
            except Exception as e:
                self.logger.warning(f"No validation data: {str(e)}")
                self.val_data = None
            self.logger.info(f"Loaded {len(self.train_data)} training and "
                             f"{len(self.val_data) if self.val_data else 0} validation sequences")
        except Exception as e:
            self.logger.error(f"Failed to load data: {str(e)}")
            raise

    def train(self) -> pd.DataFrame:
        self.model, curve = train(self.model, self.train_data, self.train_config, self.val_data,
                                  save_path=self.model_path, logger=self.logger)
        curve_path = os.path.join(self.config['output_params']['log_dir'], f"loss_{self.task}.csv")
        curve.to_csv(curve_path, index=False)
        self.logger.info(f"Loss curve written to {curve_path}")
        return curve
