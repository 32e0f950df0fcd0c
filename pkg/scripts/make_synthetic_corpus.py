#!/usr/bin/env python3
"""Write a synthetic annotated corpus plus summary files for the demo
pipeline: reference summaries (gold), shuffled references, and a lead-1
source baseline.
"""

import argparse
import json
import pathlib

from apes_eval import synth
from apes_eval.corpus import document_to_json


def summary_row(summary):
    return {"doc_id": summary.doc_id, "tokens": list(summary.tokens)}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--shuffle-seed", type=int, default=0)
    parser.add_argument("--out-dir", default="demo_data")
    args = parser.parse_args()

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    docs = synth.make_corpus(args.docs, seed=args.seed)

    files = {
        "corpus.jsonl": [document_to_json(d) for d in docs],
        "sys_gold.jsonl": [summary_row(synth.reference_summary(d)) for d in docs],
        "sys_shuffled.jsonl": [
            summary_row(synth.shuffled_summary(d, seed=args.shuffle_seed)) for d in docs
        ],
        "sys_lead1.jsonl": [summary_row(synth.lead_summary(d, 1)) for d in docs],
    }
    for name, rows in files.items():
        path = out / name
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row) + "\n")
        print(f"wrote {path} ({len(rows)} lines)")


if __name__ == "__main__":
    main()
