"""Resource allocation and Monte-Carlo simulation for a BS -> SUDAS -> UE
two-hop multicarrier downlink."""

from .config import SolverParams, SweepSpec, SystemConfig, load_config
from .channel import ChannelRealization, SpatialDecomposition, decompose, generate_channels
from .allocator import AllocationPolicy, alternating_optimize, weighted_throughput

__version__ = "0.1.0"
