"""Link scenarios: JSON schema, validation, presets for the two weather figures."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .analysis import RULES, HopBerModel
from .channel import (SIGMA_X_MAX, WEATHER_PRESETS, ChannelStats, LinkGeometry, WeatherProfile,
                      RYTOV_COEFFICIENTS, normalized_beta, sigma_from_cn2, sigma_from_si,
                      rytov_log_amplitude_variance)
from .errors import ComplexityLimitError, ScenarioError
from .modulation import Q_MODES, Family, ModulationScheme
from .numerics import gauss_hermite
from .simulation import SimulationParams

SIGMA_MODES = ("from_cn2", "from_si")

DEFAULT_GEOMETRY = dict(total_length=1200.0, tx_aperture_diameter=0.2, rx_aperture_diameter=0.2,
                        beam_divergence=2e-3, wavelength=1550e-9)


@dataclass(frozen=True)
class LinkScenario:
    name: str = "scenario"
    weather: WeatherProfile = WEATHER_PRESETS["clear"]
    geometry: LinkGeometry = LinkGeometry(400.0, 1200.0)
    hops: int = 3
    n_tx: int = 1
    rho: float = 0.3
    scheme: ModulationScheme = ModulationScheme(Family.M_QAM, 8)
    sigma_mode: str = "from_cn2"
    wave_model: str = "spherical"
    si: float = 0.75
    quadrature_order: int = 20
    quadrature_rule: str = "adaptive"
    q_mode: str = "approx"
    parity_rule: bool = True
    snr_start: float = 0.0
    snr_stop: float = 80.0
    snr_step: float = 1.0
    target_ber: float = 1e-9
    mc: SimulationParams = None

    @property
    def relays(self):
        return self.hops - 1

    def validate(self):
        if not isinstance(self.hops, int) or self.hops < 1:
            raise ScenarioError("hops", "must be a positive integer")
        if abs(self.geometry.hop_length * self.hops - self.geometry.total_length) > 1e-9 * self.geometry.total_length:
            raise ScenarioError("geometry", "hop_length * hops must equal total_length")
        if not isinstance(self.n_tx, int) or self.n_tx < 1:
            raise ScenarioError("n_tx", "must be a positive integer")
        if not 0 <= self.rho < 1:
            raise ScenarioError("rho", "must lie in [0, 1)")
        if self.sigma_mode not in SIGMA_MODES:
            raise ScenarioError("sigma_mode", f"must be one of {SIGMA_MODES}")
        if self.wave_model not in RYTOV_COEFFICIENTS:
            raise ScenarioError("wave_model", f"must be one of {tuple(RYTOV_COEFFICIENTS)}")
        if not 0 <= self.si <= 0.75:
            raise ScenarioError("si", "log-normal regime needs 0 <= SI <= 0.75")
        if self.q_mode not in Q_MODES:
            raise ScenarioError("q_mode", f"must be one of {Q_MODES}")
        if self.quadrature_rule not in RULES:
            raise ScenarioError("quadrature_rule", f"must be one of {RULES}")
        if not isinstance(self.quadrature_order, int) or not 1 <= self.quadrature_order <= 128:
            raise ScenarioError("quadrature_order", "must lie in [1, 128]")
        if self.parity_rule and self.scheme.order != 2 ** self.hops:
            raise ScenarioError("scheme", f"order {self.scheme.order} != 2^hops = {2 ** self.hops} "
                                          "(disable parity_rule to allow)")
        if not (self.snr_step > 0 and self.snr_stop >= self.snr_start):
            raise ScenarioError("snr_step", "need snr_step > 0 and snr_stop >= snr_start")
        if not 0 < self.target_ber < 0.5:
            raise ScenarioError("target_ber", "must lie in (0, 0.5)")
        try:
            self.hop_model()
        except ComplexityLimitError:
            raise
        except ValueError as exc:
            raise ScenarioError("quadrature_order", str(exc)) from exc
        return self

    # derived channel quantities

    def sigma_x_sq(self):
        if self.sigma_mode == "from_si":
            return sigma_from_si(self.si) ** 2
        return sigma_from_cn2(self.weather, self.geometry, self.geometry.hop_length, self.wave_model)

    def channel_stats(self) -> ChannelStats:
        s2 = self.sigma_x_sq()
        capped = self.sigma_mode == "from_cn2" and rytov_log_amplitude_variance(
            self.weather.cn2, self.geometry.wavelength, self.geometry.hop_length,
            self.wave_model) > SIGMA_X_MAX ** 2
        beta = normalized_beta(self.geometry, self.weather, self.hops)
        return ChannelStats(s2, beta, self.n_tx, self.rho, capped=capped)

    def hop_model(self) -> HopBerModel:
        return HopBerModel(self.scheme, self.channel_stats(), gauss_hermite(self.quadrature_order),
                           self.q_mode, self.quadrature_rule)

    def snr_grid_db(self):
        n = int(math.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return self.snr_start + self.snr_step * np.arange(n)

    # serialization

    def to_dict(self):
        g = self.geometry
        return {
            "name": self.name,
            "weather": {"name": self.weather.name,
                        "attenuation_db_per_km": self.weather.attenuation_db_per_km,
                        "cn2": self.weather.cn2},
            "geometry": {"hop_length": g.hop_length, "total_length": g.total_length,
                         "tx_aperture_diameter": g.tx_aperture_diameter,
                         "rx_aperture_diameter": g.rx_aperture_diameter,
                         "beam_divergence": g.beam_divergence, "wavelength": g.wavelength},
            "hops": self.hops,
            "relays": self.relays,
            "n_tx": self.n_tx,
            "rho": self.rho,
            "scheme": {"family": self.scheme.family.value, "order": self.scheme.order},
            "sigma_mode": self.sigma_mode,
            "wave_model": self.wave_model,
            "si": self.si,
            "quadrature_order": self.quadrature_order,
            "quadrature_rule": self.quadrature_rule,
            "q_mode": self.q_mode,
            "parity_rule": self.parity_rule,
            "snr_start": self.snr_start,
            "snr_stop": self.snr_stop,
            "snr_step": self.snr_step,
            "target_ber": self.target_ber,
            "mc": None if self.mc is None else dataclasses.asdict(self.mc),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def metadata(self):
        stats = self.channel_stats()
        return {"name": self.name, "fingerprint": self.fingerprint(), "hops": self.hops,
                "n_tx": self.n_tx, "scheme": self.scheme.label, "sigma_x_sq": stats.sigma_x_sq,
                "sigma_capped": stats.capped, "beta": stats.beta}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ScenarioError("<root>", "config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)} | {"relays"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ScenarioError(unknown[0], "unknown field")
        d = dict(data)
        for name, kind in _FIELD_TYPES.items():
            if name in d and (isinstance(d[name], bool) is not (kind is bool)
                              or not isinstance(d[name], kind)):
                raise ScenarioError(name, f"expected {getattr(kind, '__name__', 'number')}")
        for name in ("snr_start", "snr_stop", "snr_step", "rho", "si", "target_ber"):
            if name in d:
                d[name] = float(d[name])
        hops = d.get("hops", cls.hops)
        if not isinstance(hops, int) or isinstance(hops, bool) or hops < 1:
            raise ScenarioError("hops", "must be a positive integer")
        if "relays" in d and d.pop("relays") != hops - 1:
            raise ScenarioError("relays", "must equal hops - 1")
        d["weather"] = _parse_weather(d.get("weather", "clear"))
        d["geometry"] = _parse_geometry(d.get("geometry", {}), hops)
        if "scheme" in d:
            d["scheme"] = _parse_scheme(d["scheme"])
        if d.get("mc") is not None:
            d["mc"] = _parse_mc(d["mc"])
        try:
            sc = cls(**d)
        except TypeError as exc:
            raise ScenarioError("<root>", str(exc)) from exc
        return sc.validate()

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def with_overrides(self, **kw):
        """Replace fields; ``hops`` rebuilds the equidistant geometry. ``None`` values are ignored."""
        kw = {k: v for k, v in kw.items() if v is not None}
        if "hops" in kw and "geometry" not in kw:
            g = self.geometry
            kw["geometry"] = dataclasses.replace(g, hop_length=g.total_length / kw["hops"])
        return dataclasses.replace(self, **kw).validate()


_NUM = (int, float)
_FIELD_TYPES = {"name": str, "hops": int, "n_tx": int, "rho": _NUM, "sigma_mode": str,
                "wave_model": str, "si": _NUM, "quadrature_order": int, "quadrature_rule": str,
                "q_mode": str, "parity_rule": bool, "snr_start": _NUM, "snr_stop": _NUM,
                "snr_step": _NUM, "target_ber": _NUM}


def _parse_weather(w):
    if isinstance(w, str):
        key = "light_fog" if w == "fog" else w
        if key not in WEATHER_PRESETS:
            raise ScenarioError("weather", f"unknown preset {w!r}")
        return WEATHER_PRESETS[key]
    if isinstance(w, dict):
        extra = set(w) - {"name", "attenuation_db_per_km", "cn2"}
        if extra:
            raise ScenarioError("weather", f"unknown field {sorted(extra)[0]!r}")
        try:
            return WeatherProfile(w.get("name", "custom"), float(w["attenuation_db_per_km"]), float(w["cn2"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("weather", str(exc)) from exc
    raise ScenarioError("weather", "must be a preset name or an object")


def _parse_geometry(g, hops):
    if not isinstance(g, dict):
        raise ScenarioError("geometry", "must be an object")
    allowed = set(DEFAULT_GEOMETRY) | {"hop_length"}
    extra = set(g) - allowed
    if extra:
        raise ScenarioError("geometry", f"unknown field {sorted(extra)[0]!r}")
    vals = {**DEFAULT_GEOMETRY, **{k: v for k, v in g.items() if k != "hop_length"}}
    hop = vals["total_length"] / hops
    if "hop_length" in g and abs(g["hop_length"] - hop) > 1e-9 * vals["total_length"]:
        raise ScenarioError("geometry", "hop_length must equal total_length / hops")
    try:
        return LinkGeometry(hop_length=hop, **vals)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("geometry", str(exc)) from exc


def _parse_scheme(s):
    if not isinstance(s, dict) or set(s) != {"family", "order"}:
        raise ScenarioError("scheme", "must be an object with 'family' and 'order'")
    try:
        return ModulationScheme(Family(s["family"]), s["order"])
    except (TypeError, ValueError) as exc:
        raise ScenarioError("scheme", str(exc)) from exc


def _parse_mc(m):
    if not isinstance(m, dict):
        raise ScenarioError("mc", "must be an object or null")
    names = {f.name for f in dataclasses.fields(SimulationParams)}
    extra = set(m) - names
    if extra:
        raise ScenarioError("mc", f"unknown field {sorted(extra)[0]!r}")
    try:
        return SimulationParams(**m)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("mc", str(exc)) from exc


# -- presets ---------------------------------------------------------------

_PRESET_SHAPES = {
    "8qam_multihop_miso": (3, 3, Family.M_QAM, 8),
    "8qam_multihop_siso": (3, 1, Family.M_QAM, 8),
    "8pam_multihop_miso": (3, 3, Family.M_PAM, 8),
    "8pam_multihop_siso": (3, 1, Family.M_PAM, 8),
    "ook_miso_rc": (1, 3, Family.OOK, 2),
    "ook_siso": (1, 1, Family.OOK, 2),
}
_PRESET_WEATHER = {"clear": "clear", "fog": "light_fog"}

PRESETS = tuple(f"{w}_{s}" for w in _PRESET_WEATHER for s in _PRESET_SHAPES)

FIGURES = {"fig_clear": "clear", "fig_fog": "fog"}

#: (summary name, better curve, reference curve)
FIGURE_COMPARISONS = (
    ("qam_over_pam_multihop_miso", "8qam_multihop_miso", "8pam_multihop_miso"),
    ("qam_over_pam_multihop_siso", "8qam_multihop_siso", "8pam_multihop_siso"),
    ("miso_over_siso_8qam", "8qam_multihop_miso", "8qam_multihop_siso"),
    ("miso_over_siso_8pam", "8pam_multihop_miso", "8pam_multihop_siso"),
    ("multihop_miso_8pam_over_miso_rc_ook", "8pam_multihop_miso", "ook_miso_rc"),
    ("multihop_siso_8pam_over_siso_ook", "8pam_multihop_siso", "ook_siso"),
)


def preset(name: str) -> LinkScenario:
    """Table-1 scenarios: 1200 m link, two relays (K=3) or direct, one or three lasers."""
    weather, _, shape = name.partition("_")
    if weather not in _PRESET_WEATHER or shape not in _PRESET_SHAPES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    hops, n_tx, fam, order = _PRESET_SHAPES[shape]
    return LinkScenario(
        name=name,
        weather=WEATHER_PRESETS[_PRESET_WEATHER[weather]],
        geometry=LinkGeometry.equidistant(1200.0, hops),
        hops=hops, n_tx=n_tx, rho=0.3,
        scheme=ModulationScheme(fam, order),
        snr_start=-80.0, snr_stop=80.0, snr_step=1.0,
    ).validate()


def figure_presets(which: str):
    if which not in FIGURES:
        raise KeyError(f"unknown figure {which!r}; choose from {', '.join(FIGURES)}")
    w = FIGURES[which]
    return {shape: preset(f"{w}_{shape}") for shape in _PRESET_SHAPES}
