# tests/test_trainer.py
import json
import logging
import os
import tempfile
import unittest

import numpy as np
import pandas as pd
import torch

from src.data.corpus import load_corpus, write_desk_corpus
from src.data.dataset import DelaySequenceDataset
from src.data.preprocessing import IGNORE_INDEX
from src.data.synthesis import SynthConfig, build_dataset
from src.model.architecture import LayerSpec, NeuralModel, classifier_specs
from src.model.weights_io import load_model
from src.training.loss import DelayLoss, SuppressionLoss
from src.training.optimization import get_optimizer_and_scheduler
from src.training.trainer import TrainConfig, Trainer, train
from src.utils.exceptions import ConfigError, NumericalFailure

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")


def spike_dataset(n_categories: int = 4, frames: int = 10) -> DelaySequenceDataset:
    inputs, targets = [], []
    for c in range(n_categories):
        x = np.zeros((frames, 8))
        x[:, 2 * c] = 1.0
        inputs.append(x)
        targets.append(np.full(frames, c))
    return DelaySequenceDataset(inputs, targets)


def tiny_classifier(seed: int = 0) -> NeuralModel:
    return NeuralModel(classifier_specs(input_dim=8, hidden_dim=16, gru_dim=8, n_categories=4), seed=seed)


class TestTrainLoop(unittest.TestCase):
    def test_memorizes_spike_positions(self):
        config = TrainConfig(learning_rate=1e-2, batch_size=4, epochs=200)
        model, curve = train(tiny_classifier(), spike_dataset(), config)
        self.assertEqual(curve["accuracy"].iloc[-1], 1.0)
        self.assertLess(curve["loss"].iloc[-1], curve["loss"].iloc[0])

    def test_separable_two_class_problem(self):
        rng = np.random.default_rng(5)
        points = rng.uniform(-1.0, 1.0, size=(600, 2))
        points = points[np.abs(points[:, 0] + points[:, 1]) > 0.2][:400]
        labels = (points[:, 0] + points[:, 1] > 0).astype(int)
        data = DelaySequenceDataset(list(points.reshape(40, 10, 2)), list(labels.reshape(40, 10)))
        model = NeuralModel([LayerSpec("dense", 2, 2, "softmax")], seed=1)
        _, curve = train(model, data, TrainConfig(learning_rate=0.05, batch_size=8, epochs=200))
        self.assertGreaterEqual(curve["accuracy"].iloc[-1], 0.99)

    def test_curve_has_initial_row(self):
        _, curve = train(tiny_classifier(), spike_dataset(), TrainConfig(epochs=3, batch_size=2))
        self.assertEqual(list(curve["epoch"]), [0, 1, 2, 3])
        self.assertNotIn("val_loss", curve.columns)

    def test_validation_columns(self):
        data = spike_dataset()
        _, curve = train(tiny_classifier(), data, TrainConfig(epochs=1), val_dataset=data)
        self.assertIn("val_loss", curve.columns)
        self.assertIn("val_accuracy", curve.columns)

    def test_nan_inputs_raise(self):
        data = spike_dataset()
        data.inputs[0][3, 0] = float("nan")
        with self.assertRaises(NumericalFailure):
            train(tiny_classifier(), data, TrainConfig(epochs=1, batch_size=4))

    def test_saves_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "tde.efnn")
            train(tiny_classifier(), spike_dataset(), TrainConfig(epochs=2), save_path=path)
            self.assertEqual(load_model(path).output_dim, 4)

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            TrainConfig(loss="hinge").validate()
        with self.assertRaises(ConfigError):
            TrainConfig(alpha=1.5).validate()


class TestLosses(unittest.TestCase):
    def test_suppression_loss_zero_for_perfect_gains(self):
        gains = torch.rand(2, 5, 22)
        dtd_logit = torch.zeros(2, 5, 1)
        outputs = {"output": torch.cat([gains, torch.sigmoid(dtd_logit)], dim=-1),
                   "logits": torch.cat([torch.zeros_like(gains), dtd_logit], dim=-1)}
        targets = {"gains": gains, "dtd": torch.ones(2, 5), "mask": torch.ones(2, 5)}
        self.assertAlmostEqual(SuppressionLoss(alpha=1.0)(outputs, targets).item(), 0.0, places=7)
        self.assertAlmostEqual(SuppressionLoss(alpha=0.0)(outputs, targets).item(), float(np.log(2.0)), places=5)

    def test_suppression_loss_ignores_masked_frames(self):
        outputs = {"output": torch.rand(1, 4, 23), "logits": torch.randn(1, 4, 23)}
        targets = {"gains": torch.rand(1, 4, 22), "dtd": torch.ones(1, 4), "mask": torch.zeros(1, 4)}
        self.assertEqual(SuppressionLoss()(outputs, targets).item(), 0.0)

    def test_delay_loss_skips_ignored_frames(self):
        logits = torch.randn(1, 3, 4)
        loss = DelayLoss()({"logits": logits}, torch.tensor([[2, IGNORE_INDEX, IGNORE_INDEX]]))
        first = DelayLoss()({"logits": logits[:, :1]}, torch.tensor([[2]]))
        self.assertAlmostEqual(loss.item(), first.item(), places=6)


class TestSchedule(unittest.TestCase):
    def test_constant_warmup(self):
        param = torch.nn.Parameter(torch.zeros(1))
        optimizer, scheduler = get_optimizer_and_scheduler([param], lr=1.0, warmup_steps=4)
        rates = []
        for _ in range(6):
            rates.append(optimizer.param_groups[0]["lr"])
            optimizer.step()
            scheduler.step()
        np.testing.assert_allclose(rates, [0.0, 0.25, 0.5, 0.75, 1.0, 1.0])

    def test_unknown_optimizer(self):
        with self.assertRaises(ConfigError):
            get_optimizer_and_scheduler([torch.nn.Parameter(torch.zeros(1))], optimizer="lbfgs")


class TestTrainer(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        corpus_dir = os.path.join(cls.tmp.name, "corpus")
        write_desk_corpus(corpus_dir, n_speakers=6, utterances_per_speaker=2, n_noises=2, seconds=3.0, seed=2)
        cls.data_dir = os.path.join(cls.tmp.name, "synth")
        build_dataset(10, load_corpus(corpus_dir), cls.data_dir, seed=3,
                      synth=SynthConfig(clip_seconds=2.0, n_generated_rirs=4))

        with open(os.path.join(CONFIG_DIR, "training_config.json")) as f:
            config = json.load(f)
        for task in ("tde", "res"):
            config["training_params"][task].update(epochs=1, batch_size=4)
        config["data_params"].update(data_dir=cls.data_dir, warmup_frames=10)
        config["output_params"] = {"model_dir": os.path.join(cls.tmp.name, "models"),
                                   "log_dir": os.path.join(cls.tmp.name, "logs")}
        cls.config_path = os.path.join(cls.tmp.name, "training_config.json")
        with open(cls.config_path, "w") as f:
            json.dump(config, f)

    @classmethod
    def tearDownClass(cls):
        logger = logging.getLogger("trainer")
        for handler in list(logger.handlers):
            if isinstance(handler, logging.FileHandler):
                logger.removeHandler(handler)
                handler.close()
        cls.tmp.cleanup()

    def test_train_delay_classifier(self):
        trainer = Trainer(self.config_path, task="tde")
        self.assertEqual(len(trainer.train_data), 7)
        self.assertEqual(len(trainer.val_data), 2)
        curve = trainer.train()
        self.assertEqual(len(curve), 2)
        self.assertTrue(os.path.exists(os.path.join(self.tmp.name, "models", "tde.efnn")))
        saved = pd.read_csv(os.path.join(self.tmp.name, "logs", "loss_tde.csv"))
        self.assertEqual(list(saved["epoch"]), [0, 1])
        self.assertEqual(load_model(trainer.model_path).output_dim, 152)

    def test_train_suppressor_with_overrides(self):
        model_path = os.path.join(self.tmp.name, "models", "res_small.efnn")
        trainer = Trainer(self.config_path, task="res", overrides={
            "training_params": {"res": {"epochs": 2}},
            "data_params": {"limit": 3},
            "output_params": {"res_model_path": model_path},
        })
        self.assertEqual(trainer.train_config.batch_size, 4)
        self.assertEqual(len(trainer.train_data), 3)
        curve = trainer.train()
        self.assertEqual(len(curve), 3)
        self.assertEqual(load_model(model_path).output_dim, 23)

    def test_unknown_task(self):
        with self.assertRaises(ConfigError):
            Trainer(self.config_path, task="agc")


if __name__ == "__main__":
    unittest.main()
