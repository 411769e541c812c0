"""Log-barrier Newton engine shared by the primal and dual solvers.

Minimizes a smooth separable convex function subject to linear equalities
and strict linear inequalities handled by logarithmic barriers:

    min  f(z)   s.t.  A z = b,   G z + g > 0.

The Hessian of f is diagonal (separable), so each Newton step assembles
    H = diag(f'' + reg) + G' diag(mu / s^2) G
and solves the KKT system with the equality rows.  ``reg`` carries a tiny
diagonal regularization on coordinates whose smooth curvature can vanish
(portfolio-holdings style variables enter linearly), keeping the KKT
matrix nonsingular without biasing well-curved coordinates.

The barrier parameter shrinks by a factor of 10 per outer iteration and the
solve stops once the surrogate gap  (#barrier rows) * mu  falls below
``tol * (1 + |value|)``.  A backtracking line search with Armijo constant
0.01 keeps iterates strictly feasible.  The total Newton-step budget is
200; exceeding it raises NumericalFailure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

ARMIJO = 0.01
BACKTRACK = 0.5
MU_SHRINK = 10.0
MAX_NEWTON = 200
FRACTION_TO_BOUNDARY = 0.99


@dataclass
class BarrierResult:
    z: np.ndarray
    value: float                 # smooth objective at z (no barrier terms)
    barrier_multipliers: np.ndarray  # mu / slack per inequality row
    eq_multipliers: np.ndarray
    mu: float
    newton_steps: int
    surrogate_gap: float


def solve_barrier(
    smooth,
    z0: np.ndarray,
    G: np.ndarray,
    g: np.ndarray,
    A: np.ndarray | None = None,
    b: np.ndarray | None = None,
    reg: np.ndarray | None = None,
    tol: float = 1e-9,
    mu0: float = 1.0,
    max_newton: int = MAX_NEWTON,
    mu_cap: float | None = None,
) -> BarrierResult:
    """Run the barrier method from a strictly feasible ``z0``.

    ``smooth(z) -> (value, grad, hess_diag)`` evaluates the objective.
    """
    n = len(z0)
    z = np.asarray(z0, dtype=float).copy()
    if A is None or A.size == 0:
        A = np.zeros((0, n))
        b = np.zeros(0)
    if reg is None:
        reg = np.zeros(n)
    m_b = G.shape[0]
    m_e = A.shape[0]

    s = G @ z + g
    if m_b and np.min(s) <= 0.0:
        raise NumericalFailure("barrier start is not strictly feasible")
    if m_e and np.max(np.abs(A @ z - b)) > 1e-7 * (1.0 + np.max(np.abs(b))):
        raise NumericalFailure("barrier start violates equality constraints")

    mu = mu0
    steps = 0
    nu = np.zeros(m_e)
    state = {"z": z, "nu": nu, "steps": steps}

    def phi(zv, muv):
        if m_b:
            sv = G @ zv + g
            if np.min(sv) <= 0.0:
                return np.inf
        val = smooth(zv)[0]
        if not np.isfinite(val):
            return np.inf
        if m_b:
            val -= muv * float(np.sum(np.log(sv)))
        return val

    def newton_until(muv: float, inner_tol: float, detect_floor: bool = False):
        """Damped Newton on the barrier objective at fixed mu."""
        prev_dec2 = np.inf
        while True:
            zc = state["z"]
            val, grad, curv = smooth(zc)
            s = G @ zc + g if m_b else np.zeros(0)
            gphi = grad.copy()
            H = np.diag(curv + reg)
            if m_b:
                gphi -= G.T @ (muv / s)
                H += (G.T * (muv / s**2)) @ G
            for attempt in range(4):
                try:
                    if m_e:
                        K = np.zeros((n + m_e, n + m_e))
                        K[:n, :n] = H
                        K[:n, n:] = A.T
                        K[n:, :n] = A
                        rhs = np.concatenate([-gphi, b - A @ zc])
                        sol = np.linalg.solve(K, rhs)
                        dz, state["nu"] = sol[:n], sol[n:]
                    else:
                        dz = np.linalg.solve(H, -gphi)
                    break
                except np.linalg.LinAlgError:
                    H[np.diag_indices_from(H)] += 10.0 ** (attempt - 8)
            else:
                raise NumericalFailure("singular KKT system")

            dec2 = float(dz @ (H @ dz))
            if dec2 / 2.0 <= inner_tol:
                return
            if detect_floor and dec2 > 0.25 * prev_dec2:
                return  # quadratic phase exhausted; we are at the numeric floor
            prev_dec2 = dec2

            state["steps"] += 1
            if state["steps"] > max_newton:
                raise NumericalFailure(
                    f"interior point exceeded {max_newton} Newton steps"
                )
            alpha = 1.0
            if m_b:
                Gdz = G @ dz
                tight = Gdz < 0.0
                if np.any(tight):
                    alpha = min(
                        1.0,
                        FRACTION_TO_BOUNDARY * float(np.min(-s[tight] / Gdz[tight])),
                    )
            slope = float(gphi @ dz)
            base = phi(zc, muv)
            for _ in range(60):
                cand = zc + alpha * dz
                if phi(cand, muv) <= base + ARMIJO * alpha * slope:
                    state["z"] = cand
                    break
                alpha *= BACKTRACK
            else:
                raise NumericalFailure("line search stalled")

    while True:
        newton_until(mu, max(1e-3 * mu * max(m_b, 1), 1e-18))
        value = smooth(state["z"])[0]
        gap = m_b * mu
        done = gap <= tol * (1.0 + abs(value)) and (mu_cap is None or mu <= mu_cap)
        if done or m_b == 0:
            break
        mu /= MU_SHRINK

    # Tight terminal centering: the barrier multipliers mu / slack are used
    # as KKT duals downstream, and their accuracy is set by how exactly the
    # final center is hit, not by mu itself.
    newton_until(mu, 1e-16 * (1.0 + abs(value)), detect_floor=True)
    value = smooth(state["z"])[0]

    z = state["z"]
    s = G @ z + g if m_b else np.zeros(0)
    lam = mu / s if m_b else np.zeros(0)
    lam, nu = _refine_multipliers(smooth(z)[1], G, A, lam, state["nu"], mu)
    return BarrierResult(
        z=z,
        value=value,
        barrier_multipliers=lam,
        eq_multipliers=nu,
        mu=mu,
        newton_steps=state["steps"],
        surrogate_gap=m_b * mu,
    )


def _refine_multipliers(grad, G, A, lam, nu, mu):
    """Least-squares KKT fit for the near-active multipliers.

    Raw barrier multipliers mu / slack lose precision exactly where they
    matter: tiny slacks are differences of O(1) numbers.  The stationarity
    system grad = G' lam - A' nu involves only O(1) quantities, so fitting
    the large multipliers (and the equality ones) against it restores full
    accuracy; small multipliers keep their raw values, which are already
    exact to near machine precision.
    """
    m_b = G.shape[0]
    if m_b == 0:
        return lam, nu
    active = lam >= np.sqrt(mu)
    inactive = ~active
    n_act = int(np.sum(active))
    m_e = A.shape[0]
    if n_act + m_e == 0:
        return lam, nu
    rhs = grad - (G[inactive].T @ lam[inactive] if np.any(inactive) else 0.0)
    M = np.hstack([G[active].T, -A.T]) if m_e else G[active].T
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    lam = lam.copy()
    lam[active] = np.maximum(sol[:n_act], 0.0)
    if m_e:
        nu = sol[n_act:]
    return lam, nu
