"""Regenerate the golden outputs and manifests under golden/.

The two tracking runs double as the archived pilot baselines: 100 trials
from seed 7 at N = 1e5.  Run from the repository root:

    python scripts/make_golden.py
"""

import os
import sys

from freewalk.cli import main

GOLDEN = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "golden")

RUNS = {
    "walk_drift.json": "walk drift --measure nn-uniform --steps 10000 --trials 100 --seed 7",
    "boundary_hitting.csv": "boundary hitting --measure nn-uniform --depth 2 --trials 20000 --steps 2000 --seed 7",
    "boundary_hitting_squares.csv": "boundary hitting --measure squares --depth 4 --trials 20000 --steps 2000 --seed 7",
    "track_thm3.csv": "track thm3 --measure nn-uniform --steps 100000 --germ-depth 20 --radii 0,2,...,20 --trials 100 --seed 7",
    "track_thm4.csv": "track thm4 --measure nn-uniform --steps 100000 --germ-depth 20 --radii 0,2,...,20 --T 10000 --trials 100 --seed 7",
    "track_lemma52.csv": "track lemma52 --measure nn-uniform --subgroup aa,b,abA --steps 2000 --radii 1,2 --trials 20 --seed 7",
    "subgroup_commensurable.json": "subgroup commensurable --a aa,b,abA --b a,b",
    "subgroup_fold.json": "subgroup fold --gens aa,bb",
    "coset_cesaro_kernel.json": "coset cesaro --measure nn-uniform --subgroup aa,b,abA --N 100 --radius 5",
    "coset_cesaro_squares.json": "coset cesaro --measure nn-uniform --subgroup aa,bb --N 200 --radius 30",
    "quotient_induce.json": "quotient induce --measure nn-uniform --proj a:1,b:0 --trials 2000 --cap 10000 --seed 7",
    "quotient_moments.json": "quotient moments --measure nn-uniform --proj a:1,b:0 --p 0,0.25,1 --trials 20000 --cap 10000 --seed 7",
    "quotient_stationarity.json": "quotient stationarity --measure nn-uniform --proj a:1,b:0 --depth 2 --trials 5000 --seed 7",
}


def build(only=None):
    os.makedirs(GOLDEN, exist_ok=True)
    for name, cmd in RUNS.items():
        if only and name not in only:
            continue
        out = os.path.join(GOLDEN, name)
        code = main(cmd.split() + ["--out", out])
        print(f"{name}: exit {code}")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(build(sys.argv[1:]))
