"""Regenerate the clear-air and fog figure curves plus their gain summaries."""
import argparse
from pathlib import Path

from fso_linklab.cli import reproduce


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output-dir", default="results")
    args = ap.parse_args()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for which in ("fig_clear", "fig_fog"):
        _, gains = reproduce(which, out)
        print(which)
        for name, g in gains.items():
            print(f"  {name:40s} {g:7.2f} dB")


if __name__ == "__main__":
    main()
