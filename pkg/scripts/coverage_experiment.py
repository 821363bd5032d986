"""Empirical coverage of both interval kinds across sample sizes.

For each sample fraction, runs the approximate engine under many seeds on a
synthetic table and reports how often the interval contains the exact
answer, together with the mean half-width.

    python3 scripts/coverage_experiment.py --trials 1000
"""

import argparse
import random
import statistics
from dataclasses import dataclass, field

from flexaq.engine import RunConfig, run_approximate, run_exact
from flexaq.kb import KnowledgeBase, RelaxableAttribute, TrapezoidalTerm
from flexaq.query import IntervalKind, parse, rewrite_to_approximate
from flexaq.sampler import Table

QUERY = "SELECT COUNT(*), SUM(v), AVG(v) FROM T WHERE x IS high"


@dataclass
class CoverageConfig:
    population: int = 10_000
    fractions: list[float] = field(default_factory=lambda: [0.003, 0.01, 0.05, 0.2])
    confidence: float = 0.95
    trials: int = 1000
    seed: int = 0


def population(cfg: CoverageConfig):
    rng = random.Random(cfg.seed)
    rows = [(i, rng.uniform(0, 100), rng.expovariate(1 / 20)) for i in range(cfg.population)]
    table = Table("T", (("id", "numeric"), ("x", "numeric"), ("v", "numeric")), rows)
    kb = KnowledgeBase((RelaxableAttribute("T", "x", (
        TrapezoidalTerm("low", 0, 0, 30, 60), TrapezoidalTerm("high", 30, 60, 100, 100))),))
    return {"T": table}, kb


def run(cfg: CoverageConfig):
    tables, kb = population(cfg)
    q = parse(QUERY)
    truth = run_exact(q, tables, kb).rows[0].estimates
    print(f"{'fraction':>8} {'interval':<12} " + " ".join(f"{a:>22}" for a in
                                                        ("COUNT", "SUM", "AVG")))
    for fraction in cfg.fractions:
        for kind in IntervalKind:
            aq = rewrite_to_approximate(q, cfg.confidence, kind, fraction)
            hits, widths = [0, 0, 0], [[], [], []]
            for seed in range(cfg.trials):
                rows = run_approximate(aq, tables, kb, RunConfig(
                    sample_fraction=fraction, confidence=cfg.confidence,
                    interval_kind=kind, seed=seed)).rows
                if not rows:
                    continue
                for k, (e, h) in enumerate(zip(rows[0].estimates, rows[0].half_widths)):
                    hits[k] += abs(e - truth[k]) <= h
                    widths[k].append(h)
            cells = [f"{h / cfg.trials:.3f} (hw {statistics.fmean(w):9.1f})"
                     for h, w in zip(hits, widths)]
            print(f"{fraction:>8} {kind.value:<12} " + " ".join(f"{c:>22}" for c in cells))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    run(CoverageConfig(trials=args.trials, confidence=args.confidence, seed=args.seed))


if __name__ == "__main__":
    main()
