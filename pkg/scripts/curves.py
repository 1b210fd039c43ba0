"""Print the diagnostic curves behind the acceptance numbers.

    python scripts/curves.py [--trials 20000] [--seed 7]

TV lower bound against depth for the simple walk versus the walk on the
squares, tracking fraction against R, Cesàro tail mass against N for
<aa, bb>, and the survival function of the stopping time.
"""

import argparse
from dataclasses import dataclass

import numpy as np

from freewalk.boundary import empirical_cylinder_measure, tv_error_bar, tv_lower_bound
from freewalk.cosets import cesaro_coset_measure, thm3_trials, thm4_trials
from freewalk.quotient import AbelianProjection, stopping_batch, tau_tail_fit
from freewalk.stepmeasure import nn_uniform, squares
from freewalk.subgroup import fold


@dataclass
class Config:
    trials: int = 20_000
    seed: int = 7
    max_depth: int = 5
    track_steps: int = 20_000
    track_trials: int = 20
    radii: tuple[int, ...] = (0, 2, 4, 6, 8, 10, 12)
    cesaro_horizons: tuple[int, ...] = (25, 50, 100, 200)
    cesaro_radius: int = 30


def tv_curve(cfg: Config) -> None:
    nn = empirical_cylinder_measure(nn_uniform(), cfg.max_depth, cfg.trials, 1000, cfg.seed)
    sq = empirical_cylinder_measure(squares(), cfg.max_depth, cfg.trials, 1000, cfg.seed + 1)
    print("depth  tv      +-")
    for L in range(1, cfg.max_depth + 1):
        a, b = nn.truncate(L), sq.truncate(L)
        print(f"{L:>5}  {float(tv_lower_bound(a, b)):.4f}  {tv_error_bar(a, b):.4f}")


def tracking_curves(cfg: Config) -> None:
    m = nn_uniform()
    t3 = thm3_trials(m, cfg.track_steps, 20, cfg.radii, cfg.track_trials, cfg.seed)
    t4 = thm4_trials(m, cfg.track_steps, 20, cfg.radii, cfg.track_steps // 10, cfg.track_trials, cfg.seed)
    print("R    walk-side (mean, min)   geodesic-side (mean, min)")
    for i, R in enumerate(cfg.radii):
        f3 = np.array([c[i].fraction for c in t3])
        f4 = np.array([c[i].fraction for c in t4])
        print(f"{R:<4} {f3.mean():.4f} {f3.min():.4f}          {f4.mean():.4f} {f4.min():.4f}")


def cesaro_tail(cfg: Config) -> None:
    H = fold(["aa", "bb"])
    print("N     tail(r=10)  leaked      finite_support")
    for N in cfg.cesaro_horizons:
        mu = cesaro_coset_measure(nn_uniform(), H, N, cfg.cesaro_radius)
        print(f"{N:<5} {float(mu.tail_mass(10)):.6f}    {float(mu.leaked_mass):.6f}    {mu.finite_support}")


def tau_survival(cfg: Config) -> None:
    b = stopping_batch(nn_uniform(), AbelianProjection.parse("a:1,b:0"), cfg.trials, 10_000, cfg.seed)
    print("n       P(tau > n)")
    for n in (1, 3, 10, 30, 100, 300, 1000, 3000):
        print(f"{n:<7} {np.mean(b.taus > n):.5f}")
    if b.trials >= 10_000:
        fit = tau_tail_fit(b.taus, b.capped)
        print(f"slope {fit.slope:.3f} +- {fit.stderr:.3f} over {fit.window}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=Config.trials)
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    cfg = Config(trials=args.trials, seed=args.seed)
    for title, fn in [("TV vs depth", tv_curve), ("tracking vs R", tracking_curves), ("Cesàro tail", cesaro_tail), ("stopping time", tau_survival)]:
        print(f"\n== {title} ==")
        fn(cfg)


if __name__ == "__main__":
    main()
