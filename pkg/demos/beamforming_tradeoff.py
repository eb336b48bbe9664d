"""Detection/rate trade-off of the proposed design against the benchmarks.

Run: python3 demos/beamforming_tradeoff.py   (a few seconds)
"""

import math

from isaclab.beamforming import (benchmark_beampattern_gain, benchmark_time_switching, max_comm_snr, solve_p2,
                                 solve_p3)
from isaclab.scenario import default_config, draw_comm_channel
from isaclab.units import rate_to_sinr


def main():
    cfg = default_config()
    h = draw_comm_channel(cfg).h
    top = math.log2(1 + max_comm_snr(cfg, h))
    print(f"reference scenario: Mt={cfg.mt}, Mr={cfg.mr}, L={cfg.l_symbols}, full-power rate {top:.3f} bits/s/Hz")
    print(" rate   proposed  gaussian  beampattern  time-switch   |w|^2   tr(R0)")
    for rate in (0.0, 3.0, 6.0, 9.0, 11.0):
        g0 = float(rate_to_sinr(rate))
        p2 = solve_p2(cfg, h, gamma0=g0)
        p3 = solve_p3(cfg, h, gamma0=g0)
        bp = benchmark_beampattern_gain(cfg, h, gamma0=g0)
        _, _, ts = benchmark_time_switching(cfg, h, rate_req=rate)
        print(f"{rate:5.1f}   {p2.min_pd(cfg):.4f}    {p3.min_pd(cfg):.4f}    {bp.min_pd(cfg):.4f}      "
              f"{ts.min_pd(cfg):.4f}     {p2.power_w:.4f}  {p2.power_r0:.4f}")


if __name__ == "__main__":
    main()
