"""Closed-form hop BER against Monte Carlo, one row per (scheme, N_t, SNR).

Prints analytic (exact Q), MC estimate, the ratio and its distance in binomial
standard deviations. M-QAM rows sit near ratio 2: see the README.
"""
import argparse
import math

from fso_linklab.analysis import HopBerModel, ber_hop
from fso_linklab.channel import SIGMA_X_MAX, ChannelStats
from fso_linklab.modulation import ModulationScheme
from fso_linklab.numerics import gauss_hermite
from fso_linklab.simulation import SimulationParams, simulate_hop

SCHEMES = [("OOK", 2), ("M_PAM", 4), ("M_PAM", 8), ("M_QAM", 8), ("M_QAM", 16), ("M2_QAM", 2)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2 * 10 ** 6)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--rho", type=float, default=0.3)
    args = ap.parse_args()
    print(f"{'scheme':>8} {'N_t':>3} {'SNR dB':>6} {'analytic':>11} {'MC':>11} {'ratio':>6} {'sd':>6}")
    for fam, m in SCHEMES:
        scheme = ModulationScheme(fam, m)
        for n_tx in (1, 3):
            stats = ChannelStats(SIGMA_X_MAX ** 2, 1.0, n_tx, args.rho if n_tx > 1 else 0.0)
            mdl = HopBerModel(scheme, stats, gauss_hermite(30), "exact")
            for db in range(0, 61, 10):
                a = ber_hop(10 ** (db / 10), mdl)
                if a < 1e-5:
                    break
                est = simulate_hop(scheme, stats, 10 ** (db / 10),
                                   SimulationParams(trials=args.trials, seed=args.seed + db))
                sd = (est.estimate - a) / math.sqrt(a * (1 - a) / est.trials)
                print(f"{scheme.label:>8} {n_tx:>3} {db:>6} {a:11.4e} {est.estimate:11.4e} "
                      f"{est.estimate / a:6.3f} {sd:+6.1f}")


if __name__ == "__main__":
    main()
