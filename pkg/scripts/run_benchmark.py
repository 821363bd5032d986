"""Exact vs approximate response time over growing synthetic cohorts.

Writes one CSV row per (size, mode, fraction) and prints the speedup at each
size. Absolute times depend on the machine; the ratio is what to look at.

    python3 scripts/run_benchmark.py --sizes 10000,50000,200000 --out bench.csv
"""

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path

from flexaq.engine import DEATHS_QUERY, benchmark, fixture_tables, write_report
from flexaq.kb import AttributeSpec, build_kb
from flexaq.query import parse

SPECS = (
    AttributeSpec("Patient", "age", 3, ("young", "middle_aged", "old")),
    AttributeSpec("Patient", "education_years", 3, ("school", "college", "university")),
    AttributeSpec("Patient", "alcohol_units_per_week", 3, ("never", "occasionally", "regularly")),
)


@dataclass
class BenchConfig:
    sizes: list[int] = field(default_factory=lambda: [10_000, 50_000, 100_000, 200_000])
    fractions: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    repetitions: int = 5
    seed: int = 0
    kb_rows: int = 20_000
    out: Path = Path("bench.csv")


def run(cfg: BenchConfig):
    kb = build_kb(fixture_tables(cfg.kb_rows, cfg.seed).values(), SPECS, cfg.seed)
    report = benchmark(parse(DEATHS_QUERY), lambda size: fixture_tables(size, cfg.seed), kb,
                       cfg.fractions, cfg.sizes, cfg.repetitions, seed=cfg.seed)
    write_report(report, cfg.out)
    exact = {r.rows: r.median_ms for r in report if r.mode == "exact"}
    for r in report:
        speedup = exact[r.rows] / r.median_ms if r.mode == "approx" else 1.0
        print(f"{r.rows:>8} {r.mode:<6} f={r.fraction:<5} {r.median_ms:9.1f} ms  "
              f"x{speedup:5.2f}  median rel err {r.median_rel_error:.4f}")
    return report


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="10000,50000,100000,200000")
    p.add_argument("--fractions", default="0.05,0.1,0.2")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("bench.csv"))
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    run(BenchConfig(sizes=[int(s) for s in args.sizes.split(",")],
                    fractions=[float(f) for f in args.fractions.split(",")],
                    repetitions=args.reps, seed=args.seed, out=args.out))


if __name__ == "__main__":
    main()
