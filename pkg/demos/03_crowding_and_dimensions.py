"""Stress tests: component crowding and ambient dimension.

Three questions about robustness of the half-life:

* does splitting the daily target into K components cost capacity? (no,
  as long as the components stay separated)
* does pushing the components together cost capacity? (yes, once their
  separation chi = r / sqrt(cov_scale) drops toward the overlap regime,
  the matched-component errors blur and the half-life shortens)
* do extra ambient dimensions cost capacity? (no; with a few inert or
  slowly walking nuisance coordinates the half-life even inches up while
  the error mass shifts from the mean channel toward the covariances)

Run from the repository root:  python3 demos/03_crowding_and_dimensions.py
"""
import numpy as np

from casmem.harness import RunConfig, run_experiment, sweep
from casmem.streams import crowding_ratio, make_config


def main():
    print("component-count sweep at L = 10 (K = 1 plain drift, K >= 2 ring):")
    res = sweep(RunConfig(stream=make_config("circular")), "K", [1, 2, 3, 5, 8])
    print("  K:      " + "  ".join(f"{r['value']:>3}" for r in res.rows))
    print("  a_half: " + "  ".join(f"{r['half_life']:>3}" for r in res.rows))
    print()

    print("crowding sweep (K = 3 ring, shrinking separation):")
    print("  chi    r      a_half")
    for chi in (1.0, 1.5, 2.19, 2.92, 3.65):
        r = chi * np.sqrt(0.3)
        cfg = RunConfig(stream=make_config("crowding", r=float(r)))
        out = run_experiment(cfg)
        assert abs(crowding_ratio(cfg.stream) - chi) < 1e-12
        print(f"  {chi:>4}  {r:.3f}  {out.half_life:>4}")
    print()

    print("dimension sweep (K = 3 ring embedded in d dimensions):")
    print("  d   a_half  mean_share")
    for d in (2, 4, 8, 16):
        out = run_experiment(RunConfig(stream=make_config("embedded", d=d)))
        print(f"  {d:>2}  {out.half_life:>5}  {out.summary['mean_share']:.3f}")
    noisy = run_experiment(
        RunConfig(stream=make_config("embedded", d=16, nuisance="random_walk",
                                     speed=0.1, seed=1))
    )
    print(f"  16 with a seeded nuisance walk: a_half = {noisy.half_life}")


if __name__ == "__main__":
    main()
