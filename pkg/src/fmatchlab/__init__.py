"""Channel-allocation laboratory for multi-carrier multi-access channels.

Models the downlink of an M-user, N-subchannel, L-band block-fading system,
allocates subchannels by maximum f-matching on a random bipartite graph built
from 1-bit CSI, and verifies the closed-form outage analysis (saddle-point
bounds, high/low-SNR approximations, DMT/DMR curves) against Monte Carlo
simulation and brute-force oracles.
"""

from fmatchlab.channel import (
    ChannelRealization,
    ConfigError,
    CsiMatrix,
    SystemConfig,
    mutual_information,
    quantize_csi,
    sample_channel,
    subchannel_outage_prob,
    subchannel_rate,
)
from fmatchlab.graph import (
    Allocation,
    BipartiteGraph,
    FMatching,
    FProfile,
    build_rbg,
    complete_allocation,
    deficiency_witness,
    dump_graph,
    edge_count_threshold,
    expand_vertices,
    hopcroft_karp,
    load_graph,
    max_f_matching,
    sample_rbg,
)
from fmatchlab.pver2hk import PhaseTrace, pver2hk

__all__ = [
    "Allocation",
    "BipartiteGraph",
    "ChannelRealization",
    "ConfigError",
    "CsiMatrix",
    "FMatching",
    "FProfile",
    "PhaseTrace",
    "SystemConfig",
    "build_rbg",
    "complete_allocation",
    "deficiency_witness",
    "dump_graph",
    "edge_count_threshold",
    "expand_vertices",
    "hopcroft_karp",
    "load_graph",
    "max_f_matching",
    "mutual_information",
    "pver2hk",
    "quantize_csi",
    "sample_channel",
    "sample_rbg",
    "subchannel_outage_prob",
    "subchannel_rate",
]

__version__ = "0.1.0"
