"""Half-space directed polymers: exact free energies, sampling and Monte Carlo experiments."""

from .engine import (Direction, FreeEnergyQuery, Geometry, Mode, Transfer, event_probability, free_energy,
                     log_event_probability, point_to_line_free_energy, profile)
from .environment import (BOUND_PHASE, CONTROL, Constant, Environment, Exponential, Gamma, Region, WeightSpec,
                          bulk_view, load_snapshot, sample_environment, save_snapshot, truncate)
from .errors import (CapExceeded, ConfigInvalid, DegenerateSample, InadmissibleSpec, InvalidQuery, InvalidSpec,
                     IoError, LayoutInvalid, OutOfRegion, PolymerLabError, PreconditionViolated, RegionTooSmall,
                     UnsupportedEvent)
from .lattice import DirectedPath, Point, Segment, count_paths, enumerate_paths, feasible, hamiltonian
from .sampling import coalescence_summary, coupled_pair, leftmost_geodesic, rng_stream, sample_polymer

__all__ = [
    "Direction", "FreeEnergyQuery", "Geometry", "Mode", "Transfer", "event_probability", "free_energy",
    "log_event_probability", "point_to_line_free_energy", "profile", "BOUND_PHASE", "CONTROL", "Constant",
    "Environment", "Exponential", "Gamma", "Region", "WeightSpec", "bulk_view", "load_snapshot",
    "sample_environment", "save_snapshot", "truncate", "CapExceeded", "ConfigInvalid", "DegenerateSample",
    "InadmissibleSpec", "InvalidQuery", "InvalidSpec", "IoError", "LayoutInvalid", "OutOfRegion",
    "PolymerLabError", "PreconditionViolated", "RegionTooSmall", "UnsupportedEvent", "DirectedPath", "Point",
    "Segment", "count_paths", "enumerate_paths", "feasible", "hamiltonian", "coalescence_summary",
    "coupled_pair", "leftmost_geodesic", "rng_stream", "sample_polymer",
]

__version__ = "0.1.0"
