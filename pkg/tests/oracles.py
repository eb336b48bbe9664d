"""Reference implementations that share no code with the package.

They are deliberately naive (explicit loops, textbook formulas, generic
first-order methods) and serve as independent checks.
"""

import cmath
import math

import numpy as np
from scipy import stats


def steering_naive(m, spacing, angle):
    return np.array([cmath.exp(1j * 2 * math.pi * k * spacing * math.sin(angle)) for k in range(m)])


def cascade_gain_naive(f, sigma_t, d1, d2, c=299792458.0):
    eta = c * c / (64 * math.pi ** 3 * f * f)
    return eta * sigma_t / (d1 * d1 * d2 * d2)


def quad_naive(a, m):
    """``a^T M a^*`` by explicit double loop."""
    s = 0j
    for i in range(len(a)):
        for j in range(len(a)):
            s += a[i] * m[i, j] * a[j].conjugate()
    return s.real


def sensing_snrs_naive(alpha2, a, w, r0, mr, sigma2):
    aw = sum(a[i] * w[i] for i in range(len(a)))
    return alpha2 * abs(aw) ** 2 * mr / sigma2, alpha2 * quad_naive(a, r0) * mr / sigma2


def ncx2_sf(dof, nc, x):
    """scipy's non-central chi-squared survival function (different algorithm)."""
    if nc == 0:
        return float(stats.chi2.sf(x, dof))
    return float(stats.ncx2.sf(x, dof, nc))


def sample_ncx2_tail(dof, nc, x, n, rng):
    """Empirical ``Pr{X >= x}`` with X a sum of squared shifted normals.

    The shift is put on one coordinate: ``(z1 + sqrt(nc))^2 + sum_{k>1} z_k^2``;
    the central part is drawn as a chi-squared variate, which has the same law.
    """
    z = rng.standard_normal(n) + math.sqrt(nc)
    tail = rng.chisquare(dof - 1, n)
    k = int(np.count_nonzero(z * z + tail >= x))
    return k / n, math.sqrt(max(k / n * (1 - k / n), 1 / n) / n)


def grid_scan_inverse(f, p, lo, hi, n=200001):
    """Invert a decreasing function by scanning a fine grid and interpolating."""
    xs = np.linspace(lo, hi, n)
    ys = np.array([f(x) for x in xs])
    i = int(np.argmax(ys < p))
    x0, x1, y0, y1 = xs[i - 1], xs[i], ys[i - 1], ys[i]
    return x0 + (p - y0) * (x1 - x0) / (y1 - y0)


def mf_pd_gaussian(energy, gain_w2, mr, sigma2, pfa):
    """Matched-filter detection probability with a Gaussian echo treated as noise.

    The statistic ``Re sum c^* b^H y`` is linear in Gaussian data, hence
    Gaussian under both hypotheses: H0 variance ``Mr sigma2 E / 2``; H1 mean
    ``Mr E`` and variance ``(Mr^2 |g|^2 + Mr sigma2) E / 2``.
    """
    sd0 = math.sqrt(0.5 * mr * sigma2 * energy)
    sd1 = math.sqrt(0.5 * (mr * mr * gain_w2 + mr * sigma2) * energy)
    thr = stats.norm.isf(pfa) * sd0
    return float(stats.norm.sf((thr - mr * energy) / sd1))


def maxmin_spectraplex(mats, iters=4000):
    """``max_{X psd, tr X = 1} min_i tr(A_i X)`` by projected supergradient ascent.

    Projection onto the spectraplex is eigenvalue projection onto the simplex.
    Returns the best value seen.
    """
    n = mats[0].shape[0]
    x = np.eye(n, dtype=complex) / n
    best = -np.inf
    scale = max(np.linalg.norm(a, 2) for a in mats)
    for k in range(1, iters + 1):
        vals = [float(np.real(np.trace(a @ x))) for a in mats]
        i = int(np.argmin(vals))
        best = max(best, vals[i])
        g = mats[i]
        x = x + (0.5 / (scale * math.sqrt(k))) * g
        x = 0.5 * (x + x.conj().T)
        lam, v = np.linalg.eigh(x)
        x = (v * _simplex_proj(lam)) @ v.conj().T
    return best


def _simplex_proj(y):
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(y) + 1) > (css - 1))[0][-1]
    theta = (css[rho] - 1) / (rho + 1.0)
    return np.maximum(y - theta, 0)


def wilson(k, n, z):
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    r = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return c - r, c + r
