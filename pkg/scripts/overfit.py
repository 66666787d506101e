"""Memorize 64 captioned garments, then greedy-decode them.

    python3 scripts/overfit.py --lambda 0.1 --steps 2000 --out runs/overfit
"""

import argparse
import json
import logging
from pathlib import Path

import torch

from patternlm.overfit import build_overfit_set, run_overfit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda", dest="reg_lambda", type=float, nargs="+", default=[0.1, 0.0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--batch-size", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/overfit"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    torch.set_num_threads(1)
    args.out.mkdir(parents=True, exist_ok=True)
    data = build_overfit_set(seed=args.seed)
    for lam in args.reg_lambda:
        r = run_overfit(lam, data, steps=args.steps, batch_size=args.batch_size, seed=args.seed)
        ev = r.evaluation
        summary = {
            "lambda": lam,
            "seconds": r.seconds,
            "final_ce": r.final_ce,
            "token_accuracy": ev.token_accuracy,
            "exact_sequences": ev.exact_sequences,
            "decode_failures": ev.failures,
            "metrics": ev.report.to_dict(),
        }
        print(json.dumps(summary, indent=1))
        (args.out / f"lambda_{lam:g}.json").write_text(
            json.dumps(summary | {"history": r.history}, indent=1) + "\n"
        )


if __name__ == "__main__":
    main()
