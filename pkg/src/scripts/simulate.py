import argparse
from pathlib import Path
from typing import Optional

from ..classes.ExperimentRunner import simulate_corpus
from ..classes.LabConfig import LabConfig
from ..classes.MotionScript import save_truth
from ..utils.logger import log_script_complete, log_script_start, setup_logger

logger = setup_logger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="Lab config file (KEY=VALUE)")
    parser.add_argument("--seed", type=int, help="Session seed (defaults to SEED)")
    parser.add_argument("--output", type=str, help="Directory for trace.vrt and truth.json")
    parser.add_argument("--text-dump", action="store_true", help="Also write a textual trace dump")


def main(
    config: Optional[str] = None,
    seed: Optional[int] = None,
    output: Optional[str] = None,
    text_dump: bool = False,
) -> None:
    """Synthesize every victim's typing session and record the observer's trace."""
    log_script_start(__name__)
    cfg = LabConfig.load(config)
    run_seed = cfg.seed if seed is None else seed
    out = Path(output) if output else Path(cfg.output_dir) / "simulate" / f"seed-{run_seed}"
    out.mkdir(parents=True, exist_ok=True)

    corpus = simulate_corpus(cfg, run_seed)
    corpus.trace.save(out / "trace.vrt")
    save_truth(list(corpus.truths.values()), out / "truth.json")
    if text_dump:
        (out / "trace.txt").write_text(corpus.trace.dump_text())

    log_script_complete(
        __name__,
        str(out),
        seed=run_seed,
        users=len(corpus.truths),
        records=len(corpus.trace),
        clicks=sum(len(t.labels) for t in corpus.truths.values()),
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Simulate a room session with typing victims")
    add_arguments(parser)
    args = parser.parse_args()
    main(args.config, args.seed, args.output, args.text_dump)
