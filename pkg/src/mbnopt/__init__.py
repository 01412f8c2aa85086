"""Throughput maximization in multi-band (U/L/C) fixed-grid optical networks.

Route, wavelength, and band assignment via an exact ILP at small scale and
a column-generation decomposition at large scale, with a band-aware
physical-layer capacity model and sequential-loading baseline heuristics.
"""

__version__ = "0.1.0"

from .bench import BenchResult, Lightpath, demand_order, sequential_load
from .cg import (
    CgOptions,
    CgReport,
    DualPrices,
    initialize_columns,
    pack_wavelengths,
    price_rwa,
    price_rwba,
    run_cg,
)
from .lp import LinearProgram, LpSolution, SolveOptions, solve_lp, solve_milp
from .models import (
    Instance,
    ModelSizeError,
    WavelengthConfiguration,
    build_ilp,
    build_rmp,
    make_instance,
    uniform_demand,
)
from .phy import (
    BandSpec,
    CapacityMatrix,
    ChannelGrid,
    GnParams,
    ModulationTable,
    PhyConfig,
    build_grid,
    capacity_matrix,
    load_phy_config,
    path_snr_db,
    select_modulation,
)
from .topology import CandidateRoute, NetworkTopology, load_topology, route_uses_link, yen_k_shortest
