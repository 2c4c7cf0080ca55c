"""Intensity constellations, Gray labels, ML detection and conditional BEPs.

Every conditional bit-error probability here has the shape ``F * Q(sqrt(kappa * gamma))``
for a family-dependent prefactor ``F`` and SNR coefficient ``kappa``
(see :func:`bep_parameters`). The closed-form averages in :mod:`fso_linklab.analysis`
and the noise calibration of the simulator both key off that pair.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import q_approx, q_exact

Q_MODES = ("exact", "approx")


class Family(str, enum.Enum):
    OOK = "OOK"
    M_PAM = "M_PAM"
    M_QAM = "M_QAM"
    M2_QAM = "M2_QAM"


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ModulationScheme:
    family: Family
    order: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not _is_pow2(self.order) or self.order < 2:
            raise ValueError(f"modulation order must be a power of two >= 2, got {self.order!r}")
        if self.family is Family.OOK and self.order != 2:
            raise ValueError("OOK has order 2")
        if self.family is Family.M_QAM and self.order < 4:
            raise ValueError("M-QAM needs order >= 4")

    @property
    def bits_per_symbol(self) -> int:
        k = int(math.log2(self.order))
        return 2 * k if self.family is Family.M2_QAM else k

    @property
    def n_points(self) -> int:
        return self.order ** 2 if self.family is Family.M2_QAM else self.order

    @property
    def label(self):
        names = {Family.OOK: "OOK", Family.M_PAM: f"{self.order}-PAM",
                 Family.M_QAM: f"{self.order}-QAM", Family.M2_QAM: f"{self.order}^2-QAM"}
        return names[self.family]


def bep_parameters(scheme: ModulationScheme):
    """(F, kappa) such that the conditional BEP is F * Q(sqrt(kappa * gamma))."""
    m = scheme.order
    lg = math.log2(m)
    if scheme.family is Family.OOK:
        return 1.0, 0.5
    if scheme.family is Family.M_PAM:
        return 2 * (m - 1) / (m * lg), lg / (2 * (m - 1) ** 2)
    if scheme.family is Family.M_QAM:
        return 2 * (1 - 1 / math.sqrt(m)) / lg, 3 * lg / (2 * (m - 1))
    return 2 * (m - 1) / (m * lg), lg / (4 * (m - 1) ** 2)


def _q(x, q_mode):
    if q_mode == "exact":
        return q_exact(x)
    if q_mode == "approx":
        return q_approx(x)
    raise ValueError(f"q_mode must be one of {Q_MODES}, got {q_mode!r}")


def _gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SNR must be nonnegative")
    return g


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class SnrPoint:
    gamma: float
    gamma_bar: float = None
    signal_power: float = None
    noise_variance: float = None
    bit_rate: float = None

    @classmethod
    def from_physical(cls, signal_power, noise_variance, bit_rate):
        g = snr_from_physical(signal_power, noise_variance, bit_rate)
        return cls(g, g, signal_power, noise_variance, bit_rate)


def snr_from_physical(signal_power, noise_variance, bit_rate):
    """Electrical SNR gamma = 2 P^2 / (sigma_n^2 R)."""
    if noise_variance <= 0 or bit_rate <= 0:
        raise ValueError("noise variance and bit rate must be positive")
    return 2.0 * signal_power ** 2 / (noise_variance * bit_rate)


def _qam_order_check(m):
    if not _is_pow2(m) or m < 4 or int(math.log2(m)) % 2:
        raise ValueError(f"order must be 2^k with even k, got {m!r}")


def pam_symbol_error(gamma, m):
    """Symbol error of the sqrt(M)-PAM component of square M-QAM."""
    _qam_order_check(m)
    g = _gamma(gamma)
    return _scalar(2 * (1 - 1 / math.sqrt(m)) * q_exact(np.sqrt(3 * math.log2(m) * g / (m - 1))))


def qam_symbol_error(gamma, m):
    """(exact, union upper bound) symbol error probability of square M-QAM."""
    p = pam_symbol_error(gamma, m)
    exact = 1 - (1 - np.asarray(p)) ** 2
    bound = 4 * q_exact(np.sqrt(3 * math.log2(m) * _gamma(gamma) / (m - 1)))
    return _scalar(exact), _scalar(bound)


def conditional_bep_mqam(gamma, m, q_mode="exact"):
    if m < 4:
        raise ValueError("M-QAM needs order >= 4")
    f, kappa = bep_parameters(ModulationScheme(Family.M_QAM, m))
    return _scalar(f * _q(np.sqrt(kappa * _gamma(gamma)), q_mode))


def conditional_bep_m2qam(gamma, m, q_mode="exact"):
    if m < 2:
        raise ValueError("M^2-QAM needs M >= 2")
    f, kappa = bep_parameters(ModulationScheme(Family.M2_QAM, m))
    return _scalar(f * _q(np.sqrt(kappa * _gamma(gamma)), q_mode))


def conditional_bep_mpam(gamma, m, q_mode="exact"):
    if m < 2:
        raise ValueError("M-PAM needs order >= 2")
    f, kappa = bep_parameters(ModulationScheme(Family.M_PAM, m))
    return _scalar(f * _q(np.sqrt(kappa * _gamma(gamma)), q_mode))


def conditional_bep_ook(effective_fade, gamma_bar, q_mode="exact", beta=1.0):
    """OOK BEP given the (equal-gain averaged) fade: Q(sqrt(gamma_bar / 2) * beta * fade)."""
    fade = np.asarray(effective_fade, dtype=float)
    if np.any(fade <= 0):
        raise ValueError("effective fade must be positive")
    g = _gamma(gamma_bar)
    return _scalar(_q(np.sqrt(0.5 * g) * beta * fade, q_mode))


def conditional_bep(scheme, gamma, q_mode="exact"):
    f, kappa = bep_parameters(scheme)
    return _scalar(f * _q(np.sqrt(kappa * _gamma(gamma)), q_mode))


def d_min_physical(signal_power, m, bit_rate):
    """Minimum spacing of the M^2-QAM intensity grid: P/(M-1) sqrt(2 log2 M / R)."""
    return signal_power / (m - 1) * math.sqrt(2 * math.log2(m) / bit_rate)


def esym_union_bound(signal_power, m, bit_rate, noise_variance):
    """Union-bound symbol error of M^2-QAM from physical parameters (diagnostic)."""
    rs = bit_rate / math.log2(m * m)
    arg = signal_power / (m - 1) * math.sqrt(1.0 / (4 * rs * noise_variance))
    return 4 * (m - 1) / m * q_exact(arg)


def gray(n):
    n = np.asarray(n)
    return n ^ (n >> 1)


@dataclass(frozen=True)
class Constellation:
    scheme: ModulationScheme
    points: np.ndarray      # (n_points, dim), nonnegative
    labels: np.ndarray      # labels[i] = bit pattern of symbol i
    avg_power: float
    d_min: float

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def bits_per_symbol(self):
        return self.scheme.bits_per_symbol

    @property
    def index_of_label(self):
        inv = np.empty(self.size, dtype=np.intp)
        inv[self.labels] = np.arange(self.size)
        return inv


def _ro(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def build_constellation(scheme: ModulationScheme) -> Constellation:
    """Nonnegative, Gray-labelled intensity constellation with unit mean optical power.

    Optical power of a 2-D point is the sum of its two coordinates (the two
    orthogonal intensity basis functions share one DC-biased laser).
    """
    fam, m = scheme.family, scheme.order
    if fam in (Family.OOK, Family.M_PAM):
        levels = 2.0 * np.arange(m) / (m - 1)
        pts = levels[:, None]
        labels = gray(np.arange(m))
        d = 2.0 / (m - 1)
    else:
        if fam is Family.M_QAM:
            k = int(math.log2(m))
            ki, kq = (k + 1) // 2, k // 2
        else:
            ki = kq = int(math.log2(m))
        mi, mq = 2 ** ki, 2 ** kq
        d = 2.0 / ((mi - 1) + (mq - 1))
        ii, qq = np.meshgrid(np.arange(mi), np.arange(mq), indexing="ij")
        ii, qq = ii.ravel(), qq.ravel()
        pts = d * np.column_stack([ii, qq]).astype(float)
        labels = (gray(ii) << kq) | gray(qq)
    avg = float(np.mean(pts.sum(axis=1)))
    return Constellation(scheme, _ro(pts), _ro(labels, np.intp), avg, d)


def physical_noise_std(scheme: ModulationScheme, gamma):
    """Per-dimension noise std at unit mean power and unit bit rate implied by gamma = 2P^2/(sigma_n^2 R).

    Sampling at the symbol rate R/bits gives sigma^2 = sigma_n^2 R / bits = 2 / (gamma bits).
    """
    return math.sqrt(2.0 / (gamma * scheme.bits_per_symbol))


def calibrated_noise_std(constellation: Constellation, gamma):
    """Noise std that makes half the minimum spacing equal sqrt(kappa * gamma) noise stds.

    With this calibration a noiseless-fade ML detector reproduces the
    argument of :func:`conditional_bep`. For OOK, M-PAM and M^2-QAM it
    coincides with :func:`physical_noise_std`.
    """
    if gamma == 0:
        return math.inf
    _, kappa = bep_parameters(constellation.scheme)
    return 0.5 * constellation.d_min / math.sqrt(kappa * gamma)


def ml_detect_batch(received, constellation: Constellation, channel_gain):
    """Nearest gain-scaled point for each row of ``received`` (ties go to the lower index)."""
    r = np.asarray(received, dtype=float).reshape(-1, constellation.dim)
    g = np.broadcast_to(np.asarray(channel_gain, dtype=float), (r.shape[0],))
    diff = r[:, None, :] - g[:, None, None] * constellation.points[None, :, :]
    return np.argmin(np.einsum("nmd,nmd->nm", diff, diff), axis=1)


def ml_detect(received, constellation: Constellation, channel_gain) -> int:
    if constellation.size == 0:
        raise ValueError("empty constellation")
    if channel_gain <= 0:
        raise ValueError("channel gain must be positive")
    return int(ml_detect_batch(received, constellation, channel_gain)[0])
