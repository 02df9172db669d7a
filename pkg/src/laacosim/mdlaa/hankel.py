"""Block-Hankel matrices and persistency-of-excitation checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

RANK_RTOL = 1e-10


def hankel(signal, L: int) -> np.ndarray:
    """Block-Hankel matrix with ``L`` block rows.

    ``signal`` is ``(T,)`` or ``(T, m)``; block row ``i`` holds samples
    ``i .. i+T-L`` with the ``m`` channels of each sample stacked (channel-major
    within a block row), giving an ``(L*m, T-L+1)`` matrix.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T, m = x.shape
    if L < 1 or L > T:
        raise ConfigError(f"Hankel depth {L} must lie in [1, {T}]")
    cols = T - L + 1
    H = np.empty((L * m, cols))
    for i in range(L):
        H[i * m:(i + 1) * m, :] = x[i:i + cols, :].T
    return H


def numerical_rank(H: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if H.size == 0:
        return 0
    s = np.linalg.svd(H, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * rtol))


@dataclass(frozen=True)
class ExcitationCheck:
    order: int
    rank: int
    rows: int

    @property
    def persistently_exciting(self) -> bool:
        return self.rank == self.rows


def check_persistent_excitation(signal, order: int, rtol: float = RANK_RTOL) -> ExcitationCheck:
    H = hankel(signal, order)
    return ExcitationCheck(order, numerical_rank(H, rtol), H.shape[0])


@dataclass(frozen=True)
class HankelBlocks:
    P_p: np.ndarray
    P_f: np.ndarray
    W_p: np.ndarray
    W_f: np.ndarray
    n_in: int
    n_out: int
    T_ini: int
    N_ap: int

    @property
    def columns(self) -> int:
        return self.P_p.shape[1]

    @classmethod
    def from_data(cls, p_data, w_data, T_ini: int, N_ap: int) -> "HankelBlocks":
        p = np.asarray(p_data, float)
        w = np.asarray(w_data, float)
        p = p[:, None] if p.ndim == 1 else p
        w = w[:, None] if w.ndim == 1 else w
        if len(p) != len(w):
            raise ConfigError("input and output records differ in length")
        L = T_ini + N_ap
        Hp, Hw = hankel(p, L), hankel(w, L)
        m, s = p.shape[1], w.shape[1]
        return cls(Hp[:T_ini * m], Hp[T_ini * m:], Hw[:T_ini * s], Hw[T_ini * s:], m, s, T_ini, N_ap)
