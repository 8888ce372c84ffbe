# tests/test_model.py
import os
import struct
import tempfile
import unittest

import numpy as np
import torch
from numpy.testing import assert_allclose

from src.model.architecture import (EchoNet, LayerSpec, NeuralModel, classifier_specs, log1p_max_normalize,
                                    parameter_count, require_dims, suppressor_specs, validate_layers)
from src.model.weights_io import load_model, model_from_bytes, model_to_bytes, save_model
from src.training.evaluation import gradient_check
from src.utils.exceptions import ConfigError, ModelFormatError, ModelShapeError


class TestEchoNet(unittest.TestCase):
    def test_classifier_outputs_distribution(self):
        net = EchoNet(classifier_specs())
        out = net(torch.rand(2, 5, 160))
        self.assertEqual(out["output"].shape, (2, 5, 152))
        self.assertEqual(out["logits"].shape, (2, 5, 152))
        assert_allclose(out["output"].sum(dim=-1).detach().numpy(), 1.0, atol=1e-5)

    def test_suppressor_heads(self):
        net = EchoNet(suppressor_specs())
        out = net(torch.randn(1, 7, 78))
        self.assertEqual(out["output"].shape, (1, 7, 23))
        self.assertTrue(torch.all((out["output"] >= 0) & (out["output"] <= 1)))
        assert_allclose(torch.sigmoid(out["logits"]).detach().numpy(), out["output"].detach().numpy(), atol=1e-6)

    def test_parameter_count(self):
        model = NeuralModel(classifier_specs())
        dense_in = 160 * 96 + 96
        gru = 3 * 48 * (96 + 48) + 2 * 3 * 48
        dense_out = 48 * 152 + 152
        self.assertEqual(parameter_count(model), dense_in + gru + dense_out)

    def test_same_seed_same_weights(self):
        a = NeuralModel(suppressor_specs(), seed=4)
        b = NeuralModel(suppressor_specs(), seed=4)
        self.assertEqual(model_to_bytes(a), model_to_bytes(b))


class TestLayerValidation(unittest.TestCase):
    def test_dims_must_chain(self):
        with self.assertRaises(ModelShapeError):
            validate_layers([LayerSpec("dense", 4, 8, "tanh"), LayerSpec("dense", 6, 2, "sigmoid")])

    def test_softmax_only_at_the_end(self):
        with self.assertRaises(ModelShapeError):
            validate_layers([LayerSpec("dense", 4, 8, "softmax"), LayerSpec("dense", 8, 2, "sigmoid")])

    def test_unknown_activation(self):
        with self.assertRaises(ConfigError):
            validate_layers([LayerSpec("dense", 4, 8, "gelu")])

    def test_require_dims(self):
        model = NeuralModel(suppressor_specs())
        require_dims(model, 78, 23, "suppressor")
        with self.assertRaises(ModelShapeError):
            require_dims(model, 160, 152, "delay")


class TestStreaming(unittest.TestCase):
    def test_step_matches_sequence_forward(self):
        model = NeuralModel(suppressor_specs(), seed=1)
        x = np.random.default_rng(0).standard_normal((12, 78))
        state = model.new_state()
        stepped = np.stack([model.step(v, state) for v in x])
        with torch.no_grad():
            batched = model.net(torch.as_tensor(x, dtype=torch.float32)[None])["output"][0].numpy()
        assert_allclose(stepped, batched, atol=1e-5)

    def test_wrong_input_shape(self):
        model = NeuralModel(classifier_specs())
        with self.assertRaises(ModelShapeError):
            model.step(np.zeros(78), model.new_state())

    def test_log1p_max_normalize(self):
        v = log1p_max_normalize(np.array([0.0, 2.0, 4.0]))
        assert_allclose(v, np.log1p([0.0, 0.5, 1.0]), atol=1e-9)


class TestGradientCheck(unittest.TestCase):
    def test_analytic_gradients_match_finite_differences(self):
        specs = [LayerSpec("dense", 4, 3, "tanh"), LayerSpec("gru", 3, 2, "tanh"), LayerSpec("dense", 2, 2, "sigmoid")]
        model = NeuralModel(specs, seed=2)
        generator = torch.Generator().manual_seed(0)
        inputs = torch.randn(1, 4, 4, generator=generator)
        targets = torch.rand(1, 4, 2, generator=generator)
        errors = gradient_check(model, inputs, targets)
        self.assertEqual(len(errors), 8)
        self.assertLess(max(errors.values()), 1e-4)

    def test_random_configurations(self):
        rng = np.random.default_rng(11)
        for trial in range(100):
            dims = [int(d) for d in rng.integers(1, 5, size=3)]
            trunk = [LayerSpec("dense", dims[0], dims[1], str(rng.choice(["tanh", "sigmoid", "identity"])))]
            if rng.random() < 0.7:
                trunk.append(LayerSpec("gru", dims[1], dims[2], "tanh"))
                width = dims[2]
            else:
                width = dims[1]
            if rng.random() < 0.5:
                specs = trunk + [LayerSpec("dense", width, 2, "sigmoid", head=True),
                                 LayerSpec("dense", width, 1, "sigmoid", head=True)]
            else:
                specs = trunk + [LayerSpec("dense", width, 3, str(rng.choice(["tanh", "identity", "softmax"])))]
            model = NeuralModel(specs, seed=trial)
            generator = torch.Generator().manual_seed(trial)
            inputs = torch.randn(2, 5, dims[0], generator=generator)
            targets = torch.rand(2, 5, 3, generator=generator)
            errors = gradient_check(model, inputs, targets)
            self.assertLess(max(errors.values()), 1e-4, f"configuration {trial}: {specs}")


class TestZeroWeights(unittest.TestCase):
    def test_gru_halves_its_state(self):
        net = EchoNet([LayerSpec("gru", 3, 4, "tanh")])
        with torch.no_grad():
            for param in net.parameters():
                param.zero_()
        h0 = torch.tensor([[[0.8, -0.4, 0.2, 1.0]]])
        out = net(torch.randn(1, 1, 3), [h0])
        assert_allclose(out["hidden"][0].detach().numpy(), 0.5 * h0.numpy(), atol=1e-7)
        out = net(torch.randn(1, 3, 3), [h0])
        assert_allclose(out["hidden"][0].detach().numpy(), 0.125 * h0.numpy(), atol=1e-7)

    def test_dense_identity_outputs_zero(self):
        net = EchoNet([LayerSpec("dense", 5, 3, "identity")])
        with torch.no_grad():
            for param in net.parameters():
                param.zero_()
        self.assertFalse(torch.any(net(torch.randn(2, 4, 5))["output"]))


class TestModelFile(unittest.TestCase):
    def setUp(self):
        self.model = NeuralModel(suppressor_specs(hidden_dim=16, gru_dim=8), seed=3)
        self.blob = model_to_bytes(self.model)

    def test_reload_preserves_outputs(self):
        loaded = model_from_bytes(self.blob)
        x = np.random.default_rng(1).standard_normal(78)
        assert_allclose(loaded.step(x, loaded.new_state()), self.model.step(x, self.model.new_state()))
        self.assertEqual(loaded.preprocessing, "identity")
        self.assertEqual(loaded.fft_size, 320)

    def test_bad_magic(self):
        with self.assertRaises(ModelFormatError):
            model_from_bytes(b"XXXX" + self.blob[4:])

    def test_truncated(self):
        with self.assertRaises(ModelFormatError):
            model_from_bytes(self.blob[:-5])

    def test_unknown_version(self):
        blob = self.blob[:4] + struct.pack("<I", 99) + self.blob[8:]
        with self.assertRaises(ModelFormatError):
            model_from_bytes(blob)

    def test_load_checks_fft_size(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "res.efnn")
            save_model(self.model, path)
            self.assertEqual(load_model(path, expected_fft_size=320).output_dim, 23)
            with self.assertRaises(ModelShapeError):
                load_model(path, expected_fft_size=512)

    def test_missing_file(self):
        with self.assertRaises(ModelFormatError):
            load_model("/nonexistent/model.efnn")


if __name__ == "__main__":
    unittest.main()
