"""Physical link parameters to per-hop log-normal channel statistics.

Conventions used everywhere in the package:

* fade ``I = exp(2X)`` with ``X ~ Normal(-sigma_x^2, sigma_x^2)``, so ``E[I] = 1``;
* path loss is an *intensity* gain, exactly like ``I``; in IM/DD the detected
  electrical amplitude is proportional to received optical power, so the
  normalized path-loss coefficient ``beta`` is the ratio of intensity gains and
  the electrical SNR scales with ``beta**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import CovarianceFactor, sym_matrix_sqrt

#: Rytov log-amplitude variance coefficients, sigma_x^2 = c k^{7/6} Cn^2 L^{11/6}
RYTOV_COEFFICIENTS = {"plane": 0.30545, "spherical": 0.124}

#: scintillation index bound for the log-normal regime
SI_LIMIT = 0.75


@dataclass(frozen=True)
class LinkGeometry:
    hop_length: float
    total_length: float
    tx_aperture_diameter: float = 0.2
    rx_aperture_diameter: float = 0.2
    beam_divergence: float = 2e-3
    wavelength: float = 1550e-9

    def __post_init__(self):
        for name in ("hop_length", "total_length", "tx_aperture_diameter",
                     "rx_aperture_diameter", "beam_divergence", "wavelength"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if self.hop_length > self.total_length * (1 + 1e-12):
            raise ValueError("hop_length exceeds total_length")
        ratio = self.total_length / self.hop_length
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("total_length must be an integer multiple of hop_length")

    @property
    def hops(self) -> int:
        return int(round(self.total_length / self.hop_length))

    @classmethod
    def equidistant(cls, total_length, hops, **kw):
        if hops < 1:
            raise ValueError("hop count must be >= 1")
        return cls(hop_length=total_length / hops, total_length=total_length, **kw)


@dataclass(frozen=True)
class WeatherProfile:
    name: str
    attenuation_db_per_km: float
    cn2: float

    def __post_init__(self):
        if not self.attenuation_db_per_km >= 0:
            raise ValueError("attenuation must be >= 0 dB/km")
        if not self.cn2 > 0:
            raise ValueError("Cn2 must be > 0")


WEATHER_PRESETS = {
    "clear": WeatherProfile("clear", 0.43, 5e-14),
    "light_fog": WeatherProfile("light_fog", 20.0, 1.7e-14),
}


def geometric_path_gain(geometry: LinkGeometry, distance: float) -> float:
    """Far-field beam-spreading power gain (D_R / (D_T + theta_T d))^2."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return (geometry.rx_aperture_diameter
            / (geometry.tx_aperture_diameter + geometry.beam_divergence * distance)) ** 2


def atmospheric_gain(alpha_db_per_km: float, distance: float) -> float:
    """Beer-Lambert weather attenuation 10^(-alpha d_km / 10)."""
    return 10.0 ** (-alpha_db_per_km * distance / 1e3 / 10.0)


def path_gain(geometry, weather, distance):
    return geometric_path_gain(geometry, distance) * atmospheric_gain(weather.attenuation_db_per_km, distance)


def normalized_beta(geometry: LinkGeometry, weather: WeatherProfile, hops: int) -> float:
    """Hop intensity path gain relative to the direct source-destination link.

    The electrical SNR of a hop is ``beta**2`` times that of the direct link.
    """
    if hops < 1:
        raise ValueError("hop count must be >= 1")
    if hops == 1:
        return 1.0
    d_hop = geometry.total_length / hops
    return path_gain(geometry, weather, d_hop) / path_gain(geometry, weather, geometry.total_length)


def sigma_from_si(si: float) -> float:
    """Log-amplitude std from scintillation index: sigma_x = sqrt(ln(SI + 1)) / 2."""
    if not si >= 0:
        raise ValueError("scintillation index must be >= 0")
    return math.sqrt(math.log1p(si)) / 2.0


def si_from_sigma(sigma_x: float) -> float:
    return math.expm1(4.0 * sigma_x * sigma_x)


SIGMA_X_MAX = sigma_from_si(SI_LIMIT)


def rytov_log_amplitude_variance(cn2, wavelength, distance, wave="spherical"):
    """Uncapped weak-turbulence log-amplitude variance for a plane or spherical wave."""
    try:
        coef = RYTOV_COEFFICIENTS[wave]
    except KeyError:
        raise ValueError(f"unknown wave model {wave!r}") from None
    k = 2.0 * math.pi / wavelength
    return coef * k ** (7.0 / 6.0) * cn2 * distance ** (11.0 / 6.0)


def sigma_from_cn2(weather: WeatherProfile, geometry: LinkGeometry, distance: float,
                   wave="spherical", cap=SIGMA_X_MAX ** 2) -> float:
    """Log-amplitude variance sigma_x^2 over ``distance``, capped at the log-normal limit."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return min(rytov_log_amplitude_variance(weather.cn2, geometry.wavelength, distance, wave), cap)


def correlation_matrix(n_tx: int, rho: float) -> np.ndarray:
    """Exchangeable correlation matrix: unit diagonal, rho elsewhere."""
    if n_tx < 1:
        raise ValueError("n_tx must be >= 1")
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    g = np.full((n_tx, n_tx), float(rho))
    np.fill_diagonal(g, 1.0)
    return g


@dataclass(frozen=True)
class ChannelStats:
    sigma_x_sq: float
    beta: float = 1.0
    n_tx: int = 1
    rho: float = 0.0
    cov_factor: CovarianceFactor = field(default=None, compare=False)
    capped: bool = False

    def __post_init__(self):
        if not self.sigma_x_sq >= 0:
            raise ValueError("sigma_x_sq must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.cov_factor is None:
            object.__setattr__(self, "cov_factor",
                               sym_matrix_sqrt(correlation_matrix(self.n_tx, self.rho)))
        elif self.cov_factor.dimension != self.n_tx:
            raise ValueError("cov_factor dimension must equal n_tx")

    @property
    def sigma_x(self):
        return math.sqrt(self.sigma_x_sq)


def sample_fades(stats: ChannelStats, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw correlated log-normal intensity fades, shape ``(size, n_tx)`` (or ``(n_tx,)``)."""
    n = 1 if size is None else int(size)
    if stats.sigma_x_sq == 0:
        out = np.ones((n, stats.n_tx))
    else:
        z = rng.standard_normal((n, stats.n_tx))
        x = stats.sigma_x * (z @ stats.cov_factor.matrix.T) - stats.sigma_x_sq
        out = np.exp(2.0 * x)
    return out[0] if size is None else out


def aggregate_gain(fades, combining):
    """Effective amplitude gain of ``n_tx`` repetition-coded fades.

    ``"amplitude"``: equal-gain sum with power split, mean(I).
    ``"power"``: root-mean-square fade sqrt(mean(I^2)), the aggregate whose
    square the multi-transmitter closed forms average over.
    """
    fades = np.asarray(fades, dtype=float)
    if combining == "amplitude":
        return fades.mean(axis=-1)
    if combining == "power":
        return np.sqrt(np.mean(fades * fades, axis=-1))
    raise ValueError(f"unknown combining {combining!r}")
