"""Random small data-driven QP instances and an independent convex reference solve."""

import cvxpy as cp
import numpy as np
from scipy.signal import cont2discrete

from laacosim.mdlaa.hankel import HankelBlocks


def random_plant(rng, order=2, dt=0.1):
    """Stable SISO plant, discretized with zero-order hold."""
    poles = -rng.uniform(0.3, 2.0, order)
    A = np.diag(poles) + np.triu(rng.normal(scale=0.3, size=(order, order)), 1)
    B = rng.normal(size=(order, 1))
    C = rng.normal(size=(1, order))
    Ad, Bd, Cd, _, _ = cont2discrete((A, B, C, np.zeros((1, 1))), dt)
    return Ad, Bd, Cd


def simulate(plant, u, x0=None):
    Ad, Bd, Cd = plant
    x = np.zeros(Ad.shape[0]) if x0 is None else x0
    y = []
    for uk in u:
        y.append((Cd @ x).item())
        x = Ad @ x + Bd[:, 0] * uk
    return np.array(y), x


def instance(seed, T_ini=2, N_ap=3, T_a=40):
    rng = np.random.default_rng(seed)
    plant = random_plant(rng)
    u = rng.normal(size=T_a)
    y, _ = simulate(plant, u)
    blocks = HankelBlocks.from_data(u, y, T_ini, N_ap)
    u_ini = rng.normal(size=T_ini)
    x0 = rng.normal(size=plant[0].shape[0])
    y_ini, _ = simulate(plant, u_ini, x0)
    return dict(blocks=blocks, p_ini=u_ini[:, None], w_ini=y_ini[:, None],
                Q=np.eye(1), R=rng.uniform(0.01, 0.5) * np.eye(1),
                omega_r=float(rng.uniform(-2, 2)), p_max=np.array([rng.uniform(0.1, 1.0)]))


def reference_objective(inst, reg=1e-6):
    """Minimize the original problem directly over the predictor vector."""
    b = inst["blocks"]
    sigma = np.linalg.norm(np.vstack([b.P_p, b.W_p, b.P_f, b.W_f]), 2)
    lam = reg * sigma ** 2
    g = cp.Variable(b.columns)
    r = np.full(b.N_ap, inst["omega_r"])
    q, rho = inst["Q"][0, 0], inst["R"][0, 0]
    obj = q * cp.sum_squares(b.W_f @ g - r) + rho * cp.sum_squares(b.P_f @ g) + lam * cp.sum_squares(g)
    cons = [b.P_p @ g == inst["p_ini"].ravel(), b.W_p @ g == inst["w_ini"].ravel(),
            cp.abs(b.P_f @ g) <= inst["p_max"][0]]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return float(prob.value), g.value


def projected_gradient_objective(inst, reg=1e-6, iters=20_000):
    """Dual projected-gradient solve over the equality-constraint nullspace.

    With ``g = g0 + N z`` the problem is a strictly convex QP in ``z`` with
    two-sided linear bounds on ``P_f g``. Its dual lives on the nonnegative
    orthant, where projection is a clip, and strong duality makes the dual
    optimum equal to the primal one.
    """
    from scipy.linalg import null_space

    b = inst["blocks"]
    sigma = np.linalg.norm(np.vstack([b.P_p, b.W_p, b.P_f, b.W_f]), 2)
    lam = reg * sigma ** 2
    q, rho = inst["Q"][0, 0], inst["R"][0, 0]
    r = np.full(b.N_ap, inst["omega_r"])
    E = np.vstack([b.P_p, b.W_p])
    e = np.concatenate([inst["p_ini"].ravel(), inst["w_ini"].ravel()])
    g0 = np.linalg.lstsq(E, e, rcond=None)[0]
    N = null_space(E)

    def cost(g):
        return q * np.sum((b.W_f @ g - r) ** 2) + rho * np.sum((b.P_f @ g) ** 2) + lam * g @ g

    H = 2 * (q * b.W_f.T @ b.W_f + rho * b.P_f.T @ b.P_f + lam * np.eye(b.columns))
    Hz = N.T @ H @ N
    c = N.T @ (H @ g0 - 2 * q * b.W_f.T @ r)
    C = np.vstack([b.P_f @ N, -(b.P_f @ N)])
    pf0 = b.P_f @ g0
    bound = np.concatenate([inst["p_max"][0] - pf0, inst["p_max"][0] + pf0])
    Hinv = np.linalg.inv(Hz)
    G = C @ Hinv @ C.T
    step = 1.0 / np.linalg.norm(G, 2)

    def z_of(y):
        return -Hinv @ (c + C.T @ y)

    y = np.zeros(len(bound))
    v, t = y.copy(), 1.0
    for _ in range(iters):
        y_next = np.maximum(v + step * (C @ z_of(v) - bound), 0.0)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = y_next + (t - 1) / t_next * (y_next - y)
        y, t = y_next, t_next
    z = z_of(y)
    dual = cost(g0) + 0.5 * z @ Hz @ z + c @ z + y @ (C @ z - bound)
    return float(dual), g0 + N @ z
