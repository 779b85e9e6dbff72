"""Capacity of amplify-and-forward MIMO relay chains: simulation and random-matrix limits."""

from relaycap.channel import NetworkConfig, PowerAllocation, solve_power
from relaycap.errors import (
    ContractError,
    DomainError,
    NearSingularError,
    NoConvergenceError,
    NotPositiveDefiniteError,
    RelayCapError,
    ShapeError,
)
from relaycap.experiments import SweepRow, SweepSpec, capacity_sweep, point_to_point_reference
from relaycap.montecarlo import CapacityEstimate, ergodic_capacity, pooled_spectrum
from relaycap.rmt import AspectRatios, MarchenkoPastur, mp_stieltjes, product_stieltjes
from relaycap.spectrum import EmpiricalDistribution, ks_distance, shannon_transform

__version__ = "0.1.0"
