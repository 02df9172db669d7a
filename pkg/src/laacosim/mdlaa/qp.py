"""Receding-horizon attack optimization over the data-driven predictor.

The decision variable is the planned attack ``p_f``. For fixed ``p_f`` the
best predictor vector ``g`` (equality rows plus the ``lambda |g|^2``
regularizer) is an affine function of ``p_f``, so the problem collapses to a
box-constrained QP in ``p_f`` that is solved by accelerated projected
gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hankel import HankelBlocks

MAX_ITER = 10_000
KKT_TOL = 1e-6
RANK_TOL = 1e-10


@dataclass(frozen=True)
class PredictorSolution:
    g: np.ndarray
    p_f: np.ndarray          # (N_ap, m)
    omega_f: np.ndarray      # (N_ap, s) predicted
    objective: float
    kkt_residual: float
    eq_residual: float
    iterations: int
    relaxed: bool


def _block_diag(W: np.ndarray, reps: int) -> np.ndarray:
    return np.kron(np.eye(reps), W)


class AttackQP:
    """Pre-factored problem for one set of Hankel blocks and weights.

    Everything that depends only on the data is computed once; each
    :meth:`solve` call only forms the linear term from the fresh ini window.
    """

    def __init__(self, blocks: HankelBlocks, Q: np.ndarray, R: np.ndarray, omega_r: float,
                 p_max: np.ndarray, reg: float = 1e-6):
        self.blocks = blocks
        b = blocks
        m, s, N = b.n_in, b.n_out, b.N_ap
        self.p_max = np.broadcast_to(np.asarray(p_max, float), (m,)).copy()
        self.box = np.tile(self.p_max, N)
        self.Qb = _block_diag(np.asarray(Q, float), N)
        self.Rb = _block_diag(np.asarray(R, float), N)
        self.r = np.full(N * s, float(omega_r))

        D = np.vstack([b.P_p, b.W_p, b.P_f])
        self.D = D
        stacked = np.vstack([D, b.W_f])
        sigma = np.linalg.norm(stacked, 2) if stacked.size else 0.0
        self.lam = reg * sigma ** 2
        self.data_norm = max(sigma, 1.0)

        U, S, Vt = np.linalg.svd(D, full_matrices=True)
        rank = int(np.sum(S > S[0] * RANK_TOL)) if S.size and S[0] > 0 else 0
        self.rank = rank
        Dpinv = (Vt[:rank].T / S[:rank]) @ U[:, :rank].T
        Nz = Vt[rank:].T
        Wf = b.W_f
        MN = Wf @ Nz
        Az = MN.T @ self.Qb @ MN + self.lam * np.eye(Nz.shape[1])
        Kz = np.linalg.solve(Az, MN.T @ self.Qb) if Nz.shape[1] else np.zeros((0, Wf.shape[0]))
        T = Dpinv - Nz @ (Kz @ (Wf @ Dpinv))
        n_ini = b.T_ini * (m + s)
        self.T_ini_map = T[:, :n_ini]
        self.G_p = T[:, n_ini:]
        self.g_r = Nz @ (Kz @ self.r)

        WG = Wf @ self.G_p
        self.WG = WG
        H = 2.0 * (WG.T @ self.Qb @ WG + self.lam * self.G_p.T @ self.G_p + self.Rb)
        self.H = 0.5 * (H + H.T)
        self.L = max(float(np.linalg.eigvalsh(self.H)[-1]), 1e-12)

    def _ini_vector(self, p_ini: np.ndarray, w_ini: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(p_ini, float).reshape(-1), np.asarray(w_ini, float).reshape(-1)])

    def objective(self, g: np.ndarray, p: np.ndarray) -> float:
        e = self.blocks.W_f @ g - self.r
        return float(e @ self.Qb @ e + p @ self.Rb @ p + self.lam * g @ g)

    def solve(self, p_ini, w_ini, warm: np.ndarray | None = None, tol: float = KKT_TOL,
              max_iter: int = MAX_ITER) -> PredictorSolution:
        b = self.blocks
        ini = self._ini_vector(p_ini, w_ini)
        g_c = self.T_ini_map @ ini + self.g_r
        f = 2.0 * (self.WG.T @ self.Qb @ (b.W_f @ g_c - self.r) + self.lam * self.G_p.T @ g_c)
        lo, hi = -self.box, self.box
        scale = max(1.0, float(np.abs(f).max(initial=0.0)))

        def grad(p):
            return self.H @ p + f

        def kkt(p):
            return float(np.abs(p - np.clip(p - grad(p), lo, hi)).max(initial=0.0)) / scale

        x = np.zeros_like(f) if warm is None else np.clip(np.asarray(warm, float).reshape(-1), lo, hi)
        y, t = x.copy(), 1.0
        step = 1.0 / self.L
        it = 0
        res = kkt(x)
        while res > tol and it < max_iter:
            x_new = np.clip(y - step * grad(y), lo, hi)
            if (y - x_new) @ (x_new - x) > 0:       # adaptive restart
                t = 1.0
                y = x.copy()
                x_new = np.clip(y - step * grad(y), lo, hi)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            x, t = x_new, t_new
            it += 1
            if it % 10 == 0 or it == max_iter:
                res = kkt(x)
        res = kkt(x)
        p = x
        g = g_c + self.G_p @ p
        rhs = np.concatenate([ini, p])
        eq = float(np.linalg.norm(self.D @ g - rhs)) / self.data_norm
        relaxed = eq > KKT_TOL
        omega_f = (b.W_f @ g).reshape(b.N_ap, b.n_out)
        return PredictorSolution(g, p.reshape(b.N_ap, b.n_in), omega_f, self.objective(g, p), res, eq, it,
                                 relaxed)


def solve_attack_qp(blocks: HankelBlocks, p_ini, w_ini, Q, R, omega_r: float, p_max,
                    reg: float = 1e-6, **kw) -> PredictorSolution:
    return AttackQP(blocks, Q, R, omega_r, p_max, reg).solve(p_ini, w_ini, **kw)
