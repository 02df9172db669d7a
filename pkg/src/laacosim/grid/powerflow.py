"""Active-power balance residual at the vulnerable load buses (diagnostic only)."""

from __future__ import annotations

import numpy as np

from .case import GridCase


def bus_angles(case: GridCase, delta: np.ndarray, theta: np.ndarray) -> dict[int, float]:
    angles = {bus: float(a) for bus, a in zip(case.gen_buses, delta)}
    angles.update({bus: float(a) for bus, a in zip(case.load_buses, theta)})
    return angles


def power_flow_residual(angles: dict[int, float], case: GridCase, injections: dict[int, float],
                        altered: dict[int, float] | None = None, voltages: dict[int, float] | None = None,
                        conductance: dict[tuple[int, int], float] | None = None,
                        buses=None) -> np.ndarray:
    """``P_is + d_i - U_i sum_j U_j (G_ij cos th_ij + B_ij sin th_ij)`` for each bus.

    ``injections`` gives the scheduled power ``P_is`` leaving the network at
    bus ``i`` in the sign convention of the balance equation; voltage
    magnitudes default to a flat 1.0 pu profile and the network to lossless.
    """
    altered = altered or {}
    voltages = voltages or {}
    conductance = conductance or {}
    if buses is None:
        buses = sorted(injections)
    res = []
    for i in buses:
        U_i = voltages.get(i, 1.0)
        flow = 0.0
        for br in case.branches:
            if i not in (br.from_bus, br.to_bus):
                continue
            j = br.to_bus if br.from_bus == i else br.from_bus
            th = angles[i] - angles[j]
            G = conductance.get((min(i, j), max(i, j)), 0.0)
            flow += voltages.get(j, 1.0) * (G * np.cos(th) + br.b * np.sin(th))
        res.append(injections.get(i, 0.0) + altered.get(i, 0.0) - U_i * flow)
    return np.array(res)
