"""Joint downlink beamforming and D2D power control for a sensing +
communication cell."""

__version__ = "0.1.0"

from .config import (SystemConfig, Geometry, RngStream, ConfigError,
                     default_config, from_decibels, to_decibels,
                     load_config, sample_geometry)
from .channel import (ChannelSet, RadarEnvironment, steering_vector,
                      sample_channels, build_radar_environment)
from .sensing import (TransmitCovariance, ReceiveBeamformer,
                      SensingConstraintCoeff, mvdr_weights, scnr,
                      sensing_constraint_coeff, beampattern)
from .rates import PowerAllocation, RateReport, sinr_cue, sinr_d2d, sum_rate
from .subproblem import (ExpansionPoint, SurrogateModel, SubproblemSolution,
                         build_surrogate, solve_surrogate, zf_nullspace_basis)
from .optimizer import (SCHEMES, BeamformingSolution, InfeasibleProblemError,
                        initialize, run_sca, extract_beamformers,
                        sensing_only_solution, solve_scheme)
from .harness import ExperimentSpec, ExperimentResult, run_experiment, aggregate
