#!/usr/bin/env python3
"""Write a small step-model JSON for the decode-demo command.

The model prefers token "a" everywhere, but only "b" attends source
position 1, which carries all the saliency mass. Sweeping --gamma on the
demo flips the winning sequence once the unmet-saliency charge outweighs
the log-probability edge.
"""

import argparse
import itertools
import json
import math


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="toy_model.json")
    parser.add_argument("--max-len", type=int, default=3)
    args = parser.parse_args()

    vocab = ["a", "b", "</s>"]
    logp = {"a": math.log(0.7), "b": math.log(0.2), "</s>": math.log(0.1)}
    attn = {"a": [1.0, 0.0], "b": [0.0, 1.0]}
    steps = {}
    for length in range(args.max_len):
        for prefix in itertools.product(("a", "b"), repeat=length):
            row = attn[prefix[-1]] if prefix else [0.5, 0.5]
            steps[" ".join(prefix)] = {"logp": dict(logp), "attn": row}

    model = {
        "vocab": vocab,
        "eos": "</s>",
        "t_x": 2,
        "steps": steps,
        "saliency": [0.0, 1.0],
    }
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(model, handle, indent=2)
    print(f"wrote {args.out} ({len(steps)} listed prefixes)")
    print("try: apes-eval decode-demo", args.out, "--width 8 --max-len", args.max_len,
          "--gamma 0   # probability wins")
    print("     apes-eval decode-demo", args.out, "--width 8 --max-len", args.max_len,
          "--gamma 4   # saliency coverage wins")


if __name__ == "__main__":
    main()
