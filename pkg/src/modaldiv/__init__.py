"""Modal transmit diversity over Kolmogorov phase-screen channels."""
from .field_core import ComplexField2D, GridMismatchError, GridSpec, inner_product, normalize, total_power
from .modes import ModeSpec, evaluate, lg_as_hg_superposition, transform_coefficient
from .turbulence import AtmosphereModel, PhaseScreen, TurbulenceParams, generate_screen
from .channel import ChannelGainSample, ModeBank, coupling_gain, crosstalk_matrix
from .link_sim import DIVERSITY, Arm, BerResult, LinkConfig, ber_monte_carlo, ber_sweep
from .experiments import ExperimentPlan, builtin_plan, distance_gain_table, run_sweep

__version__ = "0.1.0"
