"""Size and power of the placebo (fake treatment) check as the pre-trend grows.

For each trend slope the placebo window (two pre-policy periods) is
estimated repeatedly; the rejection rate at 5% is the share of draws in
which the fake effect is flagged.

Example:
    python scripts/placebo_power.py --reps 200 --trends 0 0.1 0.25 0.5
"""
import argparse

from semidid import DesignConfig, SimConfig, monte_carlo


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--bootstrap", type=int, default=99)
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--trends", type=float, nargs="+", default=[0.0, 0.1, 0.25, 0.5])
    p.add_argument("--anticipation", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args(argv)

    design = DesignConfig(bootstrap_reps=args.bootstrap, n_jobs=args.jobs)
    print(f"{'trend':>8} {'mean fake effect':>17} {'rejection':>10}")
    for k, trend in enumerate(args.trends):
        cfg = SimConfig(n=args.n, window="placebo", trend_violation=trend,
                        anticipation=args.anticipation, seed=args.seed + k)
        s = monte_carlo(cfg, args.reps, design)
        print(f"{trend:8.3f} {s.mean_estimate:17.4f} {s.rejection_rate:10.3f}")


if __name__ == "__main__":
    main()
