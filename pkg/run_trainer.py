#!/usr/bin/env python3
import os
import sys

# Add project root to Python path
project_root = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, project_root)

# Default config path relative to project root
DEFAULT_CONFIG_PATH = os.path.join(project_root, "config", "training_config.json")


def check_prerequisites():
    """Check that the config and the synthetic corpus exist."""
    for directory in (os.path.join(project_root, "logs"), os.path.join(project_root, "models")):
        os.makedirs(directory, exist_ok=True)

    if not os.path.exists(DEFAULT_CONFIG_PATH):
        print(f"Error: Config file not found at {DEFAULT_CONFIG_PATH}")
        return False

    from src.config_validation import validate_config
    data_dir = validate_config(DEFAULT_CONFIG_PATH)["data_params"]["data_dir"]
    if not os.path.exists(os.path.join(data_dir, "manifest.jsonl")):
        print(f"Error: no synthetic corpus in {data_dir}; run `echofusion synth --n 2000` first")
        return False

    return True


if __name__ == "__main__":
    if not check_prerequisites():
        sys.exit(1)

    from src.training.trainer import Trainer
    for task in ("tde", "res"):
        trainer = Trainer(config_path=DEFAULT_CONFIG_PATH, task=task)
        trainer.train()
