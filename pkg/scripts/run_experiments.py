"""End-to-end experiment driver: section, sweep, fringe study, and figures.

Produces the three CSVs with the default configuration and, when the
echofig renderer (frontend/) is installed, the matching images.

Run:  python scripts/run_experiments.py [out_dir]
"""
import shutil
import subprocess
import sys


def main() -> int:
    out = sys.argv[1] if len(sys.argv) > 1 else "results"

    def echosim(*args):
        subprocess.run(["echosim", "--out", out, *args], check=True)

    echosim("poincare", "--periods", "400")
    echosim("sweep")
    echosim("fringe")
    echosim("oracle")

    if shutil.which("render"):
        for kind in ("poincare", "sweep", "fringe"):
            subprocess.run(
                ["render", "--kind", kind, "--in", f"{out}/{kind}.csv", "--out", f"{out}/{kind}.png"],
                check=True,
            )
    else:
        print("echofig renderer not installed; CSVs written, figures skipped")
    return 0


if __name__ == "__main__":
    sys.exit(main())
