# src/cli.py
"""Command-line entry point: `echofusion <subcommand> ...`.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from src.aec.agc import AgcConfig, AutomaticGainControl
from src.aec.pipeline import STAGES, EchoCanceller
from src.config_validation import (CONFIG_DIR, dump_defaults, from_dict, load_pipeline_config,
                                   load_synth_config, validate_config)
from src.data.corpus import default_data_dir, default_model_dir, load_corpus
from src.data.synthesis import SPLITS, build_dataset
from src.dsp.frames import FFT_SIZE
from src.model.weights_io import load_model
from src.training.benchmarks import eval_aec, eval_tde, stage_order
from src.utils.audio_io import read_wav, write_wav
from src.utils.exceptions import EXIT_OK, EXIT_USAGE, EchoFusionError
from src.utils.logger import setup_logger

logger = logging.getLogger("src.cli")


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_model(name: str) -> Optional[str]:
    path = default_model_dir() / name
    return str(path) if path.exists() else None


def _load_optional_model(path: Optional[str]):
    return load_model(path, expected_fft_size=FFT_SIZE) if path else None


def cmd_synth(args) -> int:
    data_cfg = validate_config(args.config) if args.config else {}
    synth = load_synth_config(args.config)
    if args.short_delay_grid:
        synth = dataclasses.replace(synth, short_delay_grid=True)
        synth.validate()
    corpus_dir = args.corpus or data_cfg.get("corpus_dir") or str(default_data_dir() / "corpus")
    out_dir = args.out or data_cfg.get("output_dir") or str(default_data_dir() / "synth")
    corpus = load_corpus(corpus_dir)
    records = build_dataset(args.n, corpus, out_dir, seed=args.seed, synth=synth, jobs=args.jobs)
    splits = {s: sum(r["split"] == s for r in records) for s in SPLITS}
    print(f"Wrote {len(records)} clips to {out_dir} ({splits})")
    return EXIT_OK


def cmd_train(args) -> int:
    from src.training.trainer import Trainer

    overrides = {"training_params": {args.task: {}}}
    if args.data:
        overrides["data_params"] = {"data_dir": args.data}
    if args.out:
        overrides["output_params"] = {f"{args.task}_model_path": args.out}
    for key in ("seed", "epochs"):
        value = getattr(args, key)
        if value is not None:
            overrides["training_params"][args.task][key] = value
    if args.lr is not None:
        overrides["training_params"][args.task]["learning_rate"] = args.lr
    if args.limit is not None:
        overrides.setdefault("data_params", {})["limit"] = args.limit

    trainer = Trainer(args.config, task=args.task, overrides=overrides)
    curve = trainer.train()
    last = curve.iloc[-1]
    print(f"Trained {args.task} model -> {trainer.model_path} "
          f"(final loss {last['loss']:.4f}, accuracy {last['accuracy']:.3f})")
    return EXIT_OK


def cmd_aec(args) -> int:
    cfg = load_pipeline_config(args.config)
    if args.stage:
        cfg.stage = args.stage
    if args.no_agc:
        cfg.agc = False
    cfg.tde_model = args.tde_model or cfg.tde_model
    cfg.res_model = args.res_model or cfg.res_model
    if cfg.uses_network and not cfg.res_model:
        cfg.res_model = _default_model("res.efnn")
    cfg.validate()

    far = read_wav(args.far)
    mic = read_wav(args.mic)
    if len(far) < len(mic):
        far = np.pad(far, (0, len(mic) - len(far)))
    far = far[:len(mic)]

    canceller = EchoCanceller(cfg)
    out = canceller.enhance(far, mic)
    write_wav(args.out, out, as_float=args.float)
    if args.diagnostics:
        canceller.write_diagnostics(args.diagnostics)
    print(f"Wrote {args.out} (stage {cfg.stage}, latency {canceller.latency} frames)")
    return EXIT_OK


def cmd_eval_tde(args) -> int:
    model = _load_optional_model(args.model)
    report = eval_tde(args.data, split=args.split, model=model, oracle=args.oracle,
                      warmup_frames=args.warmup, limit=args.limit)
    report.write(args.out, "tde")
    print(report.summary.to_string(index=False))
    return EXIT_OK


def cmd_eval_aec(args) -> int:
    stages = stage_order(args.stages)
    base = load_pipeline_config(args.config)
    base.agc = False
    needs_suppressor = any(STAGES.index(s) >= STAGES.index("nn") for s in stages)
    res_path = args.res_model or base.res_model or (_default_model("res.efnn") if needs_suppressor else None)
    report = eval_aec(args.data, split=args.split, stages=stages,
                      delay_model=_load_optional_model(args.tde_model or base.tde_model),
                      suppressor_model=_load_optional_model(res_path),
                      base_config=base, limit=args.limit)
    report.write(args.out, "aec")
    with open(os.path.join(args.out, "aec_extras.json"), "w") as f:
        json.dump(report.extras, f, indent=2)
    print(report.summary.to_string(index=False))
    print(f"parameters: {report.extras['parameters']}  ordering_ok: {report.extras['ordering_ok']}")
    return EXIT_OK


def cmd_agc(args) -> int:
    section = validate_config(args.config).get("agc") if args.config else None
    agc_cfg = from_dict(AgcConfig, section)
    if args.no_smooth:
        agc_cfg = dataclasses.replace(agc_cfg, smooth=False)
    agc_cfg.validate()

    agc = AutomaticGainControl(agc_cfg)
    out, gains = agc.process_stream(read_wav(args.input))
    write_wav(args.output, out, as_float=args.float)
    jump = float(np.max(np.abs(np.diff(gains)))) if len(gains) > 1 else 0.0
    print(f"Wrote {args.output} (smooth={agc_cfg.smooth}, max per-sample gain jump {jump:.6f}, "
          f"peak {float(np.max(np.abs(out))) if len(out) else 0.0:.4f})")
    return EXIT_OK


def cmd_config(args) -> int:
    if args.dump_defaults:
        print(json.dumps(dump_defaults(), indent=2))
        return EXIT_OK
    for name in ("aec_config", "data_config", "training_config"):
        validate_config(os.path.join(CONFIG_DIR, f"{name}.json"))
        print(f"Configuration file '{name}.json' is valid.")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    data_dir = str(default_data_dir() / "synth")
    parser = _Parser(prog="echofusion", description="Streaming acoustic echo cancellation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--log-file", help="also write the log to this file")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a labelled synthetic corpus")
    p.add_argument("--n", type=int, required=True, help="number of clips")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--out", help=f"output directory (default: data_config output_dir or {data_dir})")
    p.add_argument("--corpus", help="source corpus with speech/, noise/ and optional rir/ "
                                    "(default: $ECHOFUSION_DATA_DIR/corpus)")
    p.add_argument("--config", default=os.path.join(CONFIG_DIR, "data_config.json"),
                   help="data config with a 'synthesis' section")
    p.add_argument("--short-delays", "--paper-grid", dest="short_delay_grid", action="store_true",
                   help="restrict delays to 0-500 ms")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the delay classifier or the suppressor")
    p.add_argument("task", choices=("tde", "res"))
    p.add_argument("--config", default=os.path.join(CONFIG_DIR, "training_config.json"))
    p.add_argument("--data", help="synthetic corpus directory (overrides data_params.data_dir)")
    p.add_argument("--out", help="model file to write (default: <model_dir>/<task>.efnn)")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--limit", type=int, help="use at most this many clips per split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("aec", help="cancel echo in a far/mic WAV pair")
    p.add_argument("far")
    p.add_argument("mic")
    p.add_argument("out")
    p.add_argument("--config", default=os.path.join(CONFIG_DIR, "aec_config.json"))
    p.add_argument("--stage", choices=STAGES, help="last stage to run (default from config: omlsa)")
    p.add_argument("--no-agc", action="store_true")
    p.add_argument("--tde-model", help="delay classifier model file (default: energy argmax)")
    p.add_argument("--res-model", help="suppressor model file (default: $ECHOFUSION_MODEL_DIR/res.efnn)")
    p.add_argument("--diagnostics", help="per-frame diagnostics CSV")
    p.add_argument("--float", action="store_true", help="write float32 instead of PCM16")
    p.set_defaults(func=cmd_aec)

    p = sub.add_parser("eval-tde", help="delay-estimation accuracy at +-25 ms and +-5 ms")
    p.add_argument("--data", default=data_dir)
    p.add_argument("--split", default="test")
    p.add_argument("--model", help="delay classifier model file")
    p.add_argument("--oracle", action="store_true", help="add true-label predictions")
    p.add_argument("--warmup", type=int, default=100, help="unscored leading frames (default: 100)")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", default="reports")
    p.set_defaults(func=cmd_eval_tde)

    p = sub.add_parser("eval-aec", help="stage ablation: ERLE, SI-SDR improvement, segmental SNR")
    p.add_argument("--data", default=data_dir)
    p.add_argument("--split", default="test")
    p.add_argument("--stages", nargs="+", choices=STAGES, default=["nlp", "nn", "omlsa"])
    p.add_argument("--config", default=os.path.join(CONFIG_DIR, "aec_config.json"))
    p.add_argument("--tde-model")
    p.add_argument("--res-model")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", default="reports")
    p.set_defaults(func=cmd_eval_aec)

    p = sub.add_parser("agc", help="apply the sigmoid-smoothed AGC to a WAV file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--config", default=os.path.join(CONFIG_DIR, "aec_config.json"),
                   help="config whose 'agc' section is used")
    p.add_argument("--no-smooth", action="store_true", help="step gains at frame boundaries")
    p.add_argument("--float", action="store_true", help="write float32 instead of PCM16")
    p.set_defaults(func=cmd_agc)

    p = sub.add_parser("config", help="validate the bundled configs or dump defaults")
    p.add_argument("--dump-defaults", action="store_true", help="print every default as JSON")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger("src", log_file=args.log_file, level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except EchoFusionError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
