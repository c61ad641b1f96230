"""Empirical dissipation rate for each storage kind versus the certified one.

For a random sample of Gaussian measures the ratio rotated_cost / D bounds
the largest rate the storage supports. Scanning the storage gain shows how
conservative the certified constants are.

    python scripts/rate_scan.py --count 2000 --seed 0
"""

import argparse

from mdp_dissip import lqr


def scan(cert, kind, gains, config):
    rows = []
    key = "kappa_kl" if kind == "kl" else "kappa_w2"
    base = getattr(cert, key)
    for g in gains:
        c = cert.with_constants(**{key: g * base})
        rep = lqr.verify_dissipativity_sweep(c, kind, config)
        rows.append((g * base, rep.min_rate, c.rate(kind), rep.num_violations))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gains", type=float, nargs="+", default=[0.5, 0.75, 1.0, 1.5, 2.0, 4.0])
    args = ap.parse_args()

    cert = lqr.certify(lqr.illustration_problem())
    config = lqr.SweepConfig(count=args.count, seed=args.seed)
    for kind in ("kl", "w2"):
        print(f"[{kind}] sigma_max(M) = {cert.sigma_max_M:.5f}")
        print(f"{'kappa':>10} {'empirical rate':>15} {'certified rate':>15} {'violations':>11}")
        for kappa, emp, rate, bad in scan(cert, kind, args.gains, config):
            print(f"{kappa:10.4f} {emp:15.4f} {rate:15.4f} {bad:11d}")
        print()


if __name__ == "__main__":
    main()
