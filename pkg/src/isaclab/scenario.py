"""Physical scenario: arrays, cascade gains, the UE channel and config files.

A scenario config is a JSON document.  Powers accept ``"<x> dBm"`` /
``"<x> W"`` strings, ratios accept ``"<x> dB"``, angles are always degrees
(keys end in ``_deg``).  Bare numbers are SI / linear.  :func:`dump_config`
writes the canonical form (SI numbers, sorted keys), so
``dump_config(parse_config(json.loads(dump_config(cfg))))`` is byte-identical.

Schema (all keys optional except where noted)::

    {
      "mt": 16, "mr": 16, "l_symbols": 1024,
      "p_max": "30 dBm", "sigma2_c": "-80 dBm", "sigma2_s": "-80 dBm",
      "gamma0": "10 dB", "pfa": 1e-3,
      "f_carrier": "800 MHz", "sigma_rcs": 0.5, "d1": 300, "d2": 300,
      "grid": {"start_deg": -2.25, "stop_deg": 2.25, "points": 50,
               "theta": "identity"},          # or "mirror"
      "grid_angles_deg": [[phi, theta], ...],  # explicit alternative to "grid"
      "d_a": null,                             # metres; null -> half wavelength
      "rician_k": 1.0,                         # "inf" for pure LoS
      "pathloss": {"l0": "-30 dB", "d0": 1.0, "exponent": 2.5},
      "ue_angle_deg": 30.0, "ue_distance": 200.0,
      "rng_seed": 2024
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import constants

from .units import parse_quantity

__all__ = [
    "CommChannel",
    "ConfigError",
    "GridPoint",
    "PRNG_NAME",
    "ScenarioConfig",
    "cascade_gain",
    "default_config",
    "draw_comm_channel",
    "dump_config",
    "grid_points",
    "load_config",
    "make_rng",
    "parse_config",
    "pathloss",
    "save_config",
    "sensing_snrs",
    "steering",
]

SPEED_OF_LIGHT = constants.c
PRNG_NAME = f"numpy.random.PCG64 seeded via SeedSequence (numpy {np.__version__})"


class ConfigError(ValueError):
    """Invalid scenario configuration; message names the offending field."""


def make_rng(*key) -> np.random.Generator:
    """PCG64 generator from an integer key tuple, e.g. ``(seed, stream, index)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical constants of a bistatic ISAC scenario (SI / linear units)."""

    mt: int = 16
    mr: int = 16
    l_symbols: int = 1024
    p_max: float = 1.0
    sigma2_c: float = 1e-11
    sigma2_s: float = 1e-11
    gamma0: float = 0.0
    pfa: float = 1e-3
    f_carrier: float = 800e6
    sigma_rcs: float = 0.5
    d1: float = 300.0
    d2: float = 300.0
    grid_deg: tuple = field(default_factory=lambda: _uniform_grid(-2.25, 2.25, 50, "identity"))
    d_a: Optional[float] = None
    rician_k: float = 1.0
    pathloss_l0: float = 1e-3
    pathloss_d0: float = 1.0
    pathloss_exp: float = 2.5
    ue_angle_deg: float = 30.0
    ue_distance: float = 200.0
    rng_seed: int = 2024

    def __post_init__(self):
        for name in ("mt", "mr", "l_symbols"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {v!r}")
        for name in ("p_max", "sigma2_c", "sigma2_s", "f_carrier", "d1", "d2", "pathloss_d0",
                     "ue_distance"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name}: must be finite and > 0, got {v!r}")
        if not 0.0 < self.pfa < 1.0:
            raise ConfigError(f"pfa: must lie in (0, 1), got {self.pfa!r}")
        if self.gamma0 < 0:
            raise ConfigError(f"gamma0: must be >= 0, got {self.gamma0!r}")
        if self.sigma_rcs < 0:
            raise ConfigError(f"sigma_rcs: must be >= 0, got {self.sigma_rcs!r}")
        if self.rician_k < 0:
            raise ConfigError(f"rician_k: must be >= 0, got {self.rician_k!r}")
        if self.d_a is not None and self.d_a <= 0:
            raise ConfigError(f"d_a: must be > 0, got {self.d_a!r}")
        if len(self.grid_deg) < 1:
            raise ConfigError("grid: needs at least one sampling point")
        for pair in self.grid_deg:
            if len(pair) != 2:
                raise ConfigError(f"grid_angles_deg: entries must be [phi, theta], got {pair!r}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_carrier

    @property
    def spacing_over_lambda(self) -> float:
        return 0.5 if self.d_a is None else self.d_a / self.wavelength

    @property
    def q(self) -> int:
        return len(self.grid_deg)

    @property
    def grid_angles(self) -> np.ndarray:
        """``(Q, 2)`` array of (DoD, DoA) in radians."""
        return np.deg2rad(np.asarray(self.grid_deg, dtype=float).reshape(-1, 2))

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def _uniform_grid(start_deg, stop_deg, points, theta="identity"):
    phi = np.linspace(start_deg, stop_deg, int(points))
    if theta == "identity":
        th = phi
    elif theta == "mirror":
        th = -phi
    else:
        raise ConfigError(f"grid.theta: expected 'identity' or 'mirror', got {theta!r}")
    return tuple((float(a), float(b)) for a, b in zip(phi, th))


def default_config(**changes) -> ScenarioConfig:
    """The desk-scale replica of the reference simulation setup."""
    return ScenarioConfig(**changes)


# ---------------------------------------------------------------------------
# config I/O

_POWER_KEYS = ("p_max", "sigma2_c", "sigma2_s")
_KNOWN_KEYS = {f.name for f in fields(ScenarioConfig)} - {"grid_deg", "pathloss_l0", "pathloss_d0",
                                                           "pathloss_exp"}
_KNOWN_KEYS |= {"grid", "grid_angles_deg", "pathloss"}


def parse_config(doc: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
    kw = {}

    def q(key, kind):
        try:
            return parse_quantity(doc[key], kind)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    for key in ("mt", "mr", "l_symbols", "rng_seed"):
        if key in doc:
            v = doc[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{key}: expected an integer, got {v!r}")
            kw[key] = v
    for key in _POWER_KEYS:
        if key in doc:
            kw[key] = q(key, "power")
    if "gamma0" in doc:
        kw["gamma0"] = q("gamma0", "ratio")
    if "pfa" in doc:
        kw["pfa"] = q("pfa", "number")
    if "f_carrier" in doc:
        kw["f_carrier"] = q("f_carrier", "frequency")
    if "sigma_rcs" in doc:
        kw["sigma_rcs"] = q("sigma_rcs", "area")
    for key in ("d1", "d2", "ue_distance"):
        if key in doc:
            kw[key] = q(key, "length")
    if "d_a" in doc:
        kw["d_a"] = None if doc["d_a"] is None else q("d_a", "length")
    if "rician_k" in doc:
        v = doc["rician_k"]
        kw["rician_k"] = np.inf if v in ("inf", "Infinity") else q("rician_k", "ratio")
    if "ue_angle_deg" in doc:
        kw["ue_angle_deg"] = q("ue_angle_deg", "number")

    if "grid" in doc and "grid_angles_deg" in doc:
        raise ConfigError("grid: give either 'grid' or 'grid_angles_deg', not both")
    if "grid" in doc:
        g = doc["grid"]
        try:
            kw["grid_deg"] = _uniform_grid(float(g["start_deg"]), float(g["stop_deg"]),
                                           int(g["points"]), g.get("theta", "identity"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"grid: needs start_deg, stop_deg, points ({exc})") from None
    elif "grid_angles_deg" in doc:
        try:
            kw["grid_deg"] = tuple((float(a), float(b)) for a, b in doc["grid_angles_deg"])
        except (TypeError, ValueError):
            raise ConfigError("grid_angles_deg: expected a list of [phi, theta] pairs") from None

    if "pathloss" in doc:
        pl = doc["pathloss"]
        if not isinstance(pl, dict):
            raise ConfigError("pathloss: expected an object with l0, d0, exponent")
        try:
            if "l0" in pl:
                kw["pathloss_l0"] = parse_quantity(pl["l0"], "ratio")
            if "d0" in pl:
                kw["pathloss_d0"] = parse_quantity(pl["d0"], "length")
            if "exponent" in pl:
                kw["pathloss_exp"] = float(pl["exponent"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"pathloss: {exc}") from None
    return ScenarioConfig(**kw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "mt": cfg.mt,
        "mr": cfg.mr,
        "l_symbols": cfg.l_symbols,
        "p_max": cfg.p_max,
        "sigma2_c": cfg.sigma2_c,
        "sigma2_s": cfg.sigma2_s,
        "gamma0": cfg.gamma0,
        "pfa": cfg.pfa,
        "f_carrier": cfg.f_carrier,
        "sigma_rcs": cfg.sigma_rcs,
        "d1": cfg.d1,
        "d2": cfg.d2,
        "grid_angles_deg": [list(p) for p in cfg.grid_deg],
        "d_a": cfg.d_a,
        "rician_k": "inf" if np.isinf(cfg.rician_k) else cfg.rician_k,
        "pathloss": {"l0": cfg.pathloss_l0, "d0": cfg.pathloss_d0, "exponent": cfg.pathloss_exp},
        "ue_angle_deg": cfg.ue_angle_deg,
        "ue_distance": cfg.ue_distance,
        "rng_seed": cfg.rng_seed,
    }


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path) -> ScenarioConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


# ---------------------------------------------------------------------------
# physics

def steering(m: int, spacing_over_lambda: float, angle: float) -> np.ndarray:
    """ULA steering vector, entry ``k = exp(j 2 pi k d/lambda sin(angle))``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    k = np.arange(m)
    return np.exp(1j * 2 * np.pi * k * spacing_over_lambda * np.sin(angle))


def cascade_gain(cfg: ScenarioConfig, q: int = 0) -> float:
    """Power gain ``|alpha_q|^2`` of the BS-target-receiver link.

    ``eta * sigma_t / (d1^2 d2^2)`` with ``eta = c^2 / (64 pi^3 f^2)``.
    All sampling points share ``d1``/``d2`` in this scenario model, so ``q``
    only needs to be a valid index.
    """
    if not 0 <= q < cfg.q:
        raise IndexError(f"grid index {q} out of range for Q={cfg.q}")
    if cfg.d1 <= 0 or cfg.d2 <= 0 or cfg.f_carrier <= 0:
        raise ValueError("distances and carrier frequency must be positive")
    eta = SPEED_OF_LIGHT**2 / (64 * np.pi**3 * cfg.f_carrier**2)
    return eta * cfg.sigma_rcs / (cfg.d1**2 * cfg.d2**2)


@dataclass(frozen=True)
class GridPoint:
    """One hypothesized target location with its array signatures."""

    index: int
    phi: float
    theta: float
    alpha2: float
    a_tx: np.ndarray
    b_rx: np.ndarray
    alpha_phase: float = 0.0

    @property
    def alpha(self) -> complex:
        return np.sqrt(self.alpha2) * np.exp(1j * self.alpha_phase)


def grid_points(cfg: ScenarioConfig) -> list:
    """All :class:`GridPoint` objects of the surveillance region."""
    s = cfg.spacing_over_lambda
    pts = []
    for q, (phi, theta) in enumerate(cfg.grid_angles):
        pts.append(GridPoint(q, float(phi), float(theta), cascade_gain(cfg, q),
                             steering(cfg.mt, s, phi), steering(cfg.mr, s, theta)))
    return pts


@dataclass(frozen=True)
class CommChannel:
    """BS-to-UE channel ``h`` (path loss included) and its two components."""

    h: np.ndarray
    h_los: np.ndarray
    h_nlos: np.ndarray
    pathloss: float


def pathloss(cfg: ScenarioConfig, d: float) -> float:
    """``L0 (d / d0)^(-beta0)``."""
    return cfg.pathloss_l0 * (d / cfg.pathloss_d0) ** (-cfg.pathloss_exp)


def draw_comm_channel(cfg: ScenarioConfig, ue_angle: Optional[float] = None,
                      ue_distance: Optional[float] = None, rng=None) -> CommChannel:
    """Rician UE channel.

    The LoS component is the conjugate steering vector toward the UE, so that
    ``h^H x = a_ue^T x`` mirrors the sensing convention.  ``ue_angle`` is in
    radians and defaults to the config value.  ``rng`` defaults to a
    generator seeded from ``cfg.rng_seed``.
    """
    if ue_angle is None:
        ue_angle = np.deg2rad(cfg.ue_angle_deg)
    if ue_distance is None:
        ue_distance = cfg.ue_distance
    if rng is None:
        rng = make_rng(cfg.rng_seed, 0)
    k = cfg.rician_k
    h_los = steering(cfg.mt, cfg.spacing_over_lambda, ue_angle).conj()
    h_nlos = (rng.standard_normal(cfg.mt) + 1j * rng.standard_normal(cfg.mt)) / np.sqrt(2)
    if np.isinf(k):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(k / (k + 1)), np.sqrt(1 / (k + 1))
    pl = pathloss(cfg, ue_distance)
    h = np.sqrt(pl) * (w_los * h_los + w_nlos * h_nlos)
    return CommChannel(h, h_los, h_nlos, pl)


def sensing_snrs(g: GridPoint, w, r0, cfg: ScenarioConfig):
    """Received Gaussian and deterministic sensing SNRs at grid point ``g``.

    Returns
    -------
    gamma_c, gamma_s : float
        ``|alpha|^2 |a^T w|^2 Mr / sigma_s^2`` and
        ``|alpha|^2 a^T R0 a^* Mr / sigma_s^2``.
    """
    a = g.a_tx
    scale = g.alpha2 * cfg.mr / cfg.sigma2_s
    gamma_c = scale * abs(a @ np.asarray(w)) ** 2
    gamma_s = scale * max(0.0, float(np.real(a @ np.asarray(r0) @ a.conj())))
    return float(gamma_c), float(gamma_s)
