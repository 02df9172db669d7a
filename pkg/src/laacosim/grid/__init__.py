"""Grid model: case data, linearized models, integration."""

from ..errors import ReductionError
from .case import Area, Branch, Bus, Generator, GridCase, Load, case_from_dict, load_case, validate_case
from .integrate import DivergenceError, SimState, Stepper, simulate_descriptor, simulate_reduced, step
from .linear import (
    AdmittancePartition,
    DescriptorSystem,
    ReducedSystem,
    add_governor_lags,
    build_admittance,
    build_descriptor,
    dlaa_matrix,
    reduce,
    rowsum_diag,
    sensing_matrix,
    spectral_abscissa,
)
from .powerflow import bus_angles, power_flow_residual


def reduced_model(case: GridCase) -> ReducedSystem:
    """Reduced model of ``case``, with governor/turbine states for lagged units."""
    try:
        red = reduce(build_descriptor(case, build_admittance(case)))
    except ReductionError as exc:
        ids = tuple(case.load_buses[i] for i in exc.buses)
        raise ReductionError(f"load-bus block is singular; islanded load buses: "
                             f"{', '.join(map(str, ids)) or '(disconnected load-only island)'}",
                             buses=ids) from None
    return add_governor_lags(red, case)
