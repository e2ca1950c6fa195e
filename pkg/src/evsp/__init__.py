"""Electric vehicle scheduling by column generation and branch-and-price."""
from __future__ import annotations

from .model import (Depot, Instance, LinearCharge, PiecewiseCharge, Service, Station,
                    VehicleSpec, phi, tau_ch)

__version__ = "0.1.0"

__all__ = ["Depot", "Instance", "LinearCharge", "PiecewiseCharge", "Service", "Station",
           "VehicleSpec", "phi", "tau_ch", "__version__"]
