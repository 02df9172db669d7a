"""Linearized descriptor and reduced state-space models of the grid.

State ordering is ``(delta | theta | omega)`` for the descriptor form and
``(delta | omega)`` for the reduced form. ``omega`` is the frequency
deviation in Hz and ``delta`` its time integral, so the kinematic row is a
plain identity block.

All load inputs are *deviations* from the scheduled operating point; the
generator input channel carries mechanical power setpoint deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CaseError, ModelError, ParameterError, ReductionError
from .case import GridCase


def rowsum_diag(X: np.ndarray) -> np.ndarray:
    """``diag(X @ 1)`` -- the superscript-one convention of the model."""
    return np.diag(X.sum(axis=1))


@dataclass(frozen=True)
class AdmittancePartition:
    HGG: np.ndarray
    HGL: np.ndarray
    HLG: np.ndarray
    HLL: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.HGG, self.HGL], [self.HLG, self.HLL]])


@dataclass(frozen=True)
class DescriptorSystem:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    B_gen: np.ndarray
    n_gen: int
    n_load: int
    M: np.ndarray
    adm: AdmittancePartition

    @property
    def n_state(self) -> int:
        return 2 * self.n_gen + self.n_load

    def blocks(self):
        """Slices for the delta, theta and omega parts of the state."""
        g, l = self.n_gen, self.n_load
        return slice(0, g), slice(g, g + l), slice(g + l, 2 * g + l)


@dataclass(frozen=True)
class ReducedSystem:
    A: np.ndarray         # A'
    B: np.ndarray         # B' (load-deviation input)
    B_gen: np.ndarray     # generator setpoint input
    H_inv: np.ndarray
    HLG: np.ndarray
    n_gen: int
    n_load: int
    lag_gens: tuple[int, ...] = ()   # generators carrying governor/turbine states

    @property
    def n_lag(self) -> int:
        return len(self.lag_gens)

    @property
    def n_state(self) -> int:
        return 2 * self.n_gen + 2 * self.n_lag

    @property
    def omega_slice(self) -> slice:
        return slice(self.n_gen, 2 * self.n_gen)

    def theta(self, delta: np.ndarray, load_dev: np.ndarray) -> np.ndarray:
        """Load-bus angles from the algebraic constraint."""
        return self.H_inv @ (self.HLG @ delta - load_dev)


def build_admittance(case: GridCase) -> AdmittancePartition:
    """Imaginary-admittance blocks; parallel branches add, diagonals stay zero."""
    order = list(case.gen_buses) + list(case.load_buses)
    pos = {bus: i for i, bus in enumerate(order)}
    n = len(order)
    H = np.zeros((n, n))
    bad = []
    for i, br in enumerate(case.branches):
        if br.from_bus not in pos or br.to_bus not in pos:
            bad.append(f"branches[{i}]: dangling endpoint ({br.from_bus}-{br.to_bus})")
            continue
        a, b = pos[br.from_bus], pos[br.to_bus]
        H[a, b] += br.b
        H[b, a] += br.b
    if bad:
        raise CaseError(bad)
    g = case.n_gen
    return AdmittancePartition(H[:g, :g].copy(), H[:g, g:].copy(), H[g:, :g].copy(), H[g:, g:].copy())


def build_descriptor(case: GridCase, adm: AdmittancePartition | None = None) -> DescriptorSystem:
    if adm is None:
        adm = build_admittance(case)
    M = case.gen_vector("M")
    if np.any(M <= 0):
        raise ModelError("singular mass matrix: every generator needs M > 0")
    g, l = case.n_gen, case.n_load
    I_g = np.eye(g)
    Z = np.zeros
    KI = np.diag(case.gen_vector("KI"))
    KP = np.diag(case.gen_vector("KP"))
    DG = np.diag(case.gen_vector("D"))
    L_theta = rowsum_diag(adm.HLG) + rowsum_diag(adm.HLL) - adm.HLL
    A = np.block([
        [Z((g, g)), Z((g, l)), I_g],
        [-adm.HLG, L_theta, Z((l, g))],
        [KI + rowsum_diag(adm.HGG) - adm.HGG + rowsum_diag(adm.HGL), -adm.HGL, KP + DG],
    ])
    E = np.block([
        [I_g, Z((g, l)), Z((g, g))],
        [Z((l, g)), Z((l, l)), Z((l, g))],
        [Z((g, g)), Z((g, l)), -np.diag(M)],
    ])
    B = np.vstack([Z((g, l)), np.eye(l), Z((g, l))])
    # -M w' = ... - P_m  (mechanical power raises frequency)
    B_gen = np.vstack([Z((g, g)), Z((l, g)), -I_g])
    return DescriptorSystem(E, A, B, B_gen, g, l, M, adm)


def reduce(desc: DescriptorSystem) -> ReducedSystem:
    """Eliminate the load-bus angles to obtain the non-descriptor form."""
    g, l = desc.n_gen, desc.n_load
    adm = desc.adm
    L_theta = rowsum_diag(adm.HLG) + rowsum_diag(adm.HLL) - adm.HLL
    if l:
        # A load bus whose row of L_theta is zero has no path to anything.
        isolated = np.flatnonzero(np.abs(L_theta).sum(axis=1) == 0)
        rank = np.linalg.matrix_rank(L_theta) if l else 0
        if isolated.size or rank < l:
            raise ReductionError(
                "load-bus block is singular; islanded load buses: "
                + (", ".join(str(i) for i in isolated) or "(disconnected load-only island)"),
                buses=tuple(int(i) for i in isolated))
        H_inv = np.linalg.inv(L_theta)
    else:
        H_inv = np.zeros((0, 0))
    Minv = np.diag(1.0 / desc.M)
    _, _, w = desc.blocks()
    A_wd = desc.A[w, :g]           # K^I + H^GG1 - H^GG + H^GL1
    A_ww = desc.A[w, w]            # K^P + D^G
    red_sync = -A_wd + adm.HGL @ H_inv @ adm.HLG
    A_red = np.block([
        [np.zeros((g, g)), np.eye(g)],
        [Minv @ red_sync, -Minv @ A_ww],
    ])
    B_red = np.vstack([np.zeros((g, l)), -Minv @ adm.HGL @ H_inv])
    B_gen = np.vstack([np.zeros((g, g)), Minv])
    return ReducedSystem(A_red, B_red, B_gen, H_inv, adm.HLG.copy(), g, l)


def add_governor_lags(red: ReducedSystem, case: GridCase) -> ReducedSystem:
    """Append governor and turbine states for every generator with ``lag`` set.

    State becomes ``(delta | omega | p_gov | p_mech)``. For a lagged unit the
    droop response and the setpoint drive the governor, the turbine follows
    it, and only the turbine output reaches the swing equation.
    """
    idx = tuple(i for i, gen in enumerate(case.generators) if gen.lag)
    if not idx:
        return red
    g, n = red.n_gen, len(idx)
    N = 2 * g + 2 * n
    M = case.gen_vector("M")
    KP = case.gen_vector("KP")
    A = np.zeros((N, N))
    A[:2 * g, :2 * g] = red.A
    B = np.zeros((N, red.n_load))
    B[:2 * g] = red.B
    B_gen = np.zeros((N, g))
    B_gen[:2 * g] = red.B_gen
    for j, i in enumerate(idx):
        gen = case.generators[i]
        w, pg, pm = g + i, 2 * g + j, 2 * g + n + j
        A[w, w] += KP[i] / M[i]          # droop now acts through the lags
        A[w, pm] = 1.0 / M[i]
        A[pg, w] = -KP[i] / gen.T_gov
        A[pg, pg] = -1.0 / gen.T_gov
        A[pm, pg] = 1.0 / gen.T_turb
        A[pm, pm] = -1.0 / gen.T_turb
        B_gen[w, i] = 0.0
        B_gen[pg, i] = 1.0 / gen.T_gov
    return ReducedSystem(A, B, B_gen, red.H_inv, red.HLG, g, red.n_load, idx)


def sensing_matrix(k_lg: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Gain matrix mapping generator frequencies to load changes.

    Each attacked load bus ``l`` reacts with gain ``k_lg[l]`` to the
    frequency ``weights @ omega`` (e.g. centre-of-inertia weights, or a one-hot
    row for a single sensed generator).
    """
    return np.outer(np.asarray(k_lg, float), np.asarray(weights, float))


def dlaa_matrix(red: ReducedSystem, K_LG: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """System matrix with the frequency-feedback attack closed around it.

    ``K_LG`` is either an ``(n_load, n_gen)`` matrix or a per-load-bus gain
    vector combined with sensing ``weights`` (defaults to equal weights).
    """
    K = np.asarray(K_LG, dtype=float)
    if K.ndim == 1:
        if K.shape != (red.n_load,):
            raise ParameterError(f"gain vector must have {red.n_load} entries")
        w = np.full(red.n_gen, 1.0 / red.n_gen) if weights is None else weights
        K = sensing_matrix(K, w)
    if K.shape != (red.n_load, red.n_gen):
        raise ParameterError(f"gain matrix must be {red.n_load}x{red.n_gen}")
    if np.any(K < 0) or not np.all(np.isfinite(K)):
        raise ParameterError("attack gains must be finite and >= 0")
    if not K.any():
        return red.A
    feedback = np.zeros((red.n_load, red.n_state))
    feedback[:, red.omega_slice] = -K
    return red.A + red.B @ feedback


def spectral_abscissa(A: np.ndarray) -> float:
    return float(np.max(np.linalg.eigvals(A).real))
