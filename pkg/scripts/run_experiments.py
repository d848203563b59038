#!/usr/bin/env python3
"""Run experiment configs and print one summary line per metric cell.

    python scripts/run_experiments.py                 # every config in scripts/configs
    python scripts/run_experiments.py err_decay link_l1
"""

import argparse
import sys
import time
from pathlib import Path

from msbm.experiments import load_config, run_experiment, write_report

CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("names", nargs="*", help="config stems (default: all)")
    parser.add_argument("--no-timing", action="store_true", help="zero the wall_time column")
    args = parser.parse_args(argv)
    paths = [CONFIG_DIR / f"{n}.ini" for n in args.names] or sorted(CONFIG_DIR.glob("*.ini"))
    for path in paths:
        cfg = load_config(path)
        t0 = time.perf_counter()
        report = run_experiment(cfg, write=False)
        write_report(report, cfg.output, timing=not args.no_timing)
        print(f"== {path.stem}: {len(report.rows)} rows in {time.perf_counter() - t0:.1f}s -> {cfg.output}")
        for cell in report.summary["cells"]:
            mean = "nan" if cell["mean"] is None else f"{cell['mean']:.4f}"
            print(f"   n={cell['n']:<5} alpha={cell['alpha']:<7.4g} {cell['metric']:<22} mean={mean} (count {cell['count']})")
        if "loglog_slope" in report.summary:
            print(f"   log-log slope: {report.summary['loglog_slope']:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
