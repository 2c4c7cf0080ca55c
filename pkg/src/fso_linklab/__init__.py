"""BER of FSO links over log-normal turbulence: closed-form Gauss-Hermite averages and Monte-Carlo."""
__version__ = "0.1.0"

from .analysis import (BerCurve, HopBerModel, ber_curve, ber_hop, ber_hop_m2qam, ber_hop_miso,
                       ber_hop_mqam, crossing_snr, multihop_average, multihop_upper_bound,
                       snr_gain_at_target)
from .channel import ChannelStats, LinkGeometry, WeatherProfile, WEATHER_PRESETS
from .modulation import Family, ModulationScheme, build_constellation
from .scenario import LinkScenario, preset
from .simulation import BerEstimate, SimulationParams, simulate_hop, simulate_multihop, wilson_ci
