"""Regenerate the bundled counterexample fixture.

Usage: python scripts/find_counterexample.py [--seed 0] [--attempts 300]
"""
import argparse
import json
from pathlib import Path

from cacheroute.counterexample import certify, search
from cacheroute.fileio import format_text, to_json_doc
from cacheroute.primal_dual import PDConfig

OUT = Path(__file__).resolve().parents[1] / "src" / "cacheroute" / "data" / "counterexample.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--attempts", type=int, default=300)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    found = search(args.seed, attempts=args.attempts, config=PDConfig(max_iterations=500))
    if found is None:
        raise SystemExit("no certified instance found")
    inst, dem, k = found
    print(f"certified at attempt {k}: {certify(inst, dem)}")
    print(format_text(inst, dem))
    args.out.write_text(json.dumps(to_json_doc(inst, dem), indent=1) + "\n")


if __name__ == "__main__":
    main()
