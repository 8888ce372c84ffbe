# scripts/generate_desk_corpus.py
import argparse
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.data.corpus import default_data_dir, write_desk_corpus  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Write a small synthetic speech/noise/RIR corpus for desk-scale runs.")
    parser.add_argument("--out", default=str(default_data_dir() / "corpus"), help="corpus root")
    parser.add_argument("--speakers", type=int, default=12)
    parser.add_argument("--utterances", type=int, default=8, help="utterances per speaker")
    parser.add_argument("--noises", type=int, default=6)
    parser.add_argument("--rirs", type=int, default=0, help="pre-generated room responses to store under rir/")
    parser.add_argument("--seconds", type=float, default=6.0, help="length of each file")
    parser.add_argument("--seed", type=int, default=0)
    return parser.parse_args()


def main() -> int:
    args = parse_args()
    setup_logger("src")
    write_desk_corpus(args.out, n_speakers=args.speakers, utterances_per_speaker=args.utterances,
                      n_noises=args.noises, n_rirs=args.rirs, seconds=args.seconds, seed=args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
