"""Sequence lengths, families and edit-rule frequencies of a generated corpus.

    python3 scripts/corpus_stats.py --n 2000 --seed 7
"""

import argparse
import json
from collections import Counter

import numpy as np

from patternlm.codec import encode_length
from patternlm.datagen import generate_sample, make_edit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    lengths, families, rules, kinds = [], Counter(), Counter(), Counter()
    for i in range(args.n):
        s = generate_sample(args.seed, i)
        families[s.params.family] += 1
        lengths.append(encode_length(s.pattern))
        for p in s.pattern.panels:
            kinds.update(e.geometry.kind for e in p.edges)
        e = make_edit(s.params, s.seed)
        rules[e.rule_id] += 1
        lengths.append(encode_length(e.after))
    lengths = np.array(lengths)
    print(json.dumps({
        "patterns": int(lengths.size),
        "length": {
            "min": int(lengths.min()),
            "median": float(np.median(lengths)),
            "p99": float(np.percentile(lengths, 99)),
            "max": int(lengths.max()),
        },
        "families": dict(sorted(families.items())),
        "edge_kinds": dict(sorted(kinds.items())),
        "edit_rules": dict(sorted(rules.items())),
    }, indent=1))


if __name__ == "__main__":
    main()
