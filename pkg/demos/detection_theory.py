"""Closed-form detection probability next to a Monte-Carlo estimate.

Run: python3 demos/detection_theory.py
"""

import numpy as np

from isaclab.analysis import OperatingPoint, min_l_for_pd, pd_approx_full, pd_exact, pd_gaussian_only
from isaclab.detection import DetectorContext, mc_detect
from isaclab.units import db_to_lin


def main():
    L, pfa = 256, 1e-2
    print(f"P_D at L={L}, pfa={pfa}")
    print(" gamma_c  gamma_s   exact    approx   gaussian-only")
    for gc_db in (-20, -15, -10):
        for gs_db in (-30, -20, -15):
            op = OperatingPoint(db_to_lin(gc_db), db_to_lin(gs_db), L, pfa)
            print(f"{gc_db:7.0f}  {gs_db:7.0f}  {pd_exact(op):.4f}   {pd_approx_full(op):.4f}   "
                  f"{pd_gaussian_only(op.gamma_c, L, pfa):.4f}")

    ctx = DetectorContext.for_snrs(db_to_lin(-15), db_to_lin(-20), L, pfa, seed=1)
    res = mc_detect(ctx, trials=20_000, seed=7)
    print(f"\nMonte-Carlo at -15/-20 dB: pfa {res.pfa_hat:.4f} ({res.pfa_ci[0]:.4f}, {res.pfa_ci[1]:.4f}), "
          f"pd {res.pd_hat:.4f} ({res.pd_ci[0]:.4f}, {res.pd_ci[1]:.4f}) vs exact {pd_exact(ctx.operating_point):.4f}")

    print("\nsensing slots needed for P_D >= 0.99 at pfa=1e-3 (Gaussian echo only)")
    for gc_db in (5, 0, -5, -10):
        print(f"  {gc_db:+3d} dB -> L = {min_l_for_pd(db_to_lin(gc_db), 1e-3)}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
