"""The leading-order model: transport of the odd mode by its own tail
integral, solved exactly by characteristics.

State is the accumulated exponent A(t, R) = (1/alpha) * integral over
[0, t] of L_s(f_tau)(R) d tau, which obeys the autonomous system

    dA/dt (R) = (1/alpha) * apply_lf_kernel(f0, A)(R),      A(0) = 0.

Everything else is reconstructed from A in closed form: the transported
profile f_t through the angular flow gamma -> gamma e^A, the odd vorticity
mode Omega_2 = f_t + A/2, and the stream function mode
Psi_2 = (1/4 alpha) L_s(f_t) sin(2 theta).

Sandwich bounds. With the kernel pinched as c1 e^-a <= K(a) <= c2 e^-a
(c1 = 1, c2 = 4 in this module's convention), alpha * A is pinched between
two logarithms of the same shape:

    (2 alpha c2/c1) log(1 + (c1/(2 alpha)) t L(f0)(R))
        >= alpha A_t(R) >=
    (2 alpha / c2) log(1 + (c2/(2 alpha)) t L(f0)(R)).

The lower bound follows from dL_s/dt >= -(c2/(2 alpha)) L_s^2 (indeed
-(1/(2 alpha)) L_s^2 suffices, since |K'| <= K and the tail integral
telescopes exactly). The upper follows from the Riccati inequality for
N = integral of (f0/s) e^-A, which gives L_s <= c2 L(f0)/(1 + (c1/(2 alpha))
t L(f0)). Note the upper bound needs the factor c2/c1 in front: the
tempting tighter form 2 alpha log(1 + t L(f0)/(2 alpha)) is a lower bound,
not an upper one (K has zero slope at a = 0, so L_s cannot decay at the
c1-Riccati rate initially; numerics confirm the violation).
"""

import numpy as np

from .grids import RadialGrid, RadialProfile, Field2D
from .kernels import apply_lf_kernel, profile_tail, op_L

C1 = 1.0
C2 = 4.0


class ModelState:
    """Immutable snapshot: step() returns a new state."""

    def __init__(self, alpha, f0, A, t, kernel=None):
        self.alpha = alpha
        self.f0 = f0
        self.A = A
        self.t = t
        self.kernel = kernel


class SandwichReport:
    """Margins are raw; the violation count allows roundoff slack because
    both bounds meet the value exactly at t = 0."""

    def __init__(self, lower, value, upper):
        self.lower = lower
        self.value = value
        self.upper = upper
        self.margin_lower = float(np.min(value - lower))
        self.margin_upper = float(np.min(upper - value))
        tol = 1e-12 * np.maximum(1.0, np.abs(value))
        self.n_violations = int(np.sum((value < lower - tol) |
                                       (value > upper + tol)))


def init_state(f0, alpha, kernel=None):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1), got %g" % alpha)
    if np.any(f0.values < 0):
        raise ValueError("negative-f0: the initial profile must be nonnegative")
    nodes = f0.grid.nodes
    if np.any(f0.values[nodes < 1.0] != 0):
        raise ValueError("support-touching-origin: f0 must vanish on [0, 1)")
    if np.any(f0.values[nodes >= 0.9 * f0.grid.r_max] != 0):
        raise ValueError("f0 must vanish on the outer 10% of the grid "
                         "(tail integrals assume containment)")
    A = RadialProfile(f0.grid, np.zeros(f0.grid.n))
    return ModelState(alpha, f0, A, 0.0, kernel)


def _rhs(state, A_values):
    A = RadialProfile(state.f0.grid, A_values)
    return apply_lf_kernel(state.f0, A, kernel=state.kernel).values / state.alpha


def step(state, dt):
    """Classical 4th-order one-step advance of A at all nodes."""
    if dt <= 0:
        raise ValueError("nonpositive-dt")
    a = state.A.values
    k1 = _rhs(state, a)
    k2 = _rhs(state, a + 0.5 * dt * k1)
    k3 = _rhs(state, a + 0.5 * dt * k2)
    k4 = _rhs(state, a + dt * k3)
    a_new = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A_new = RadialProfile(state.f0.grid, a_new)
    return ModelState(state.alpha, state.f0, A_new, state.t + dt, state.kernel)


def eval_Ls(state):
    return apply_lf_kernel(state.f0, state.A, kernel=state.kernel)


def _interp_profile(profile, R):
    return np.interp(R, profile.grid.nodes, profile.values)


def eval_f(state, R, theta):
    """Pointwise f_t by characteristics; exact in theta given A.

    With gamma = tan(theta) the flow compresses gamma to gamma e^-A, so
    f_t = f0(R) * e^-A sin(2 theta) / (cos^2 theta + e^-2A sin^2 theta),
    valid on all four quadrants (the sign pattern of sin(2 theta)).
    """
    R = np.asarray(R, dtype=float)
    theta = np.asarray(theta, dtype=float)
    f0R = _interp_profile(state.f0, R)
    e = np.exp(-_interp_profile(state.A, R))
    s = np.sin(theta)
    c = np.cos(theta)
    out = f0R * e * 2.0 * s * c / (c * c + e * e * s * s)
    return out if out.ndim else float(out)


def sup_theta_f(state):
    """sup over theta of f_t(R, .), exact: the gamma e^-A = 1 characteristic
    passes through every R, so the sup equals f0(R) for all t."""
    return RadialProfile(state.f0.grid, state.f0.values.copy())


def theta_star(state):
    """Angle attaining the sup at each node: arctan(e^A)."""
    return np.arctan(np.exp(state.A.values))


def reconstruct_Omega2(state, agrid):
    """Omega_2(R, theta) = f_t + A/2 on the tensor grid (A/2 is radial)."""
    theta = agrid.nodes[None, :]
    R = state.f0.grid.nodes[:, None]
    f0R = state.f0.values[:, None]
    e = np.exp(-state.A.values)[:, None]
    s = np.sin(theta)
    c = np.cos(theta)
    f = f0R * e * 2.0 * s * c / (c * c + e * e * s * s)
    return Field2D(state.f0.grid, agrid, f + 0.5 * state.A.values[:, None])


def sup_omega2(state):
    """max over the grid of sup_theta Omega_2 = max_R (f0 + A/2), exact in
    theta, so the headline growth curve carries no angular-grid error."""
    return float(np.max(state.f0.values + 0.5 * state.A.values))


def psi2_from_state(state, agrid):
    """Psi_2 = (1/(4 alpha)) L_s(f_t)(R) sin(2 theta); the cos projection
    vanishes identically for odd data."""
    ls = eval_Ls(state).values
    values = np.outer(ls / (4.0 * state.alpha), np.sin(2.0 * agrid.nodes))
    return Field2D(state.f0.grid, agrid, values)


def closed_form_L(f0, alpha, t, R):
    """Exact solution of the comparison dynamics with kernel e^-a:
    value = L(f0)(R) / (1 + (t/2 alpha) L(f0)(R)) and its time integral
    accumulated = 2 alpha log(1 + (t/2 alpha) L(f0)(R))."""
    L0 = op_L(f0, R)
    x = 0.5 * t / alpha * L0
    return L0 / (1.0 + x), 2.0 * alpha * np.log1p(x)


def check_sandwich(state):
    """Pinch alpha * A_t(R) between the two closed-form logarithms (module
    docstring); violations are reported in the margins, never raised."""
    alpha, t = state.alpha, state.t
    L0 = profile_tail(state.f0).values
    value = alpha * state.A.values
    lower = (2.0 * alpha / C2) * np.log1p((0.5 * C2 / alpha) * t * L0)
    upper = (2.0 * alpha * C2 / C1) * np.log1p((0.5 * C1 / alpha) * t * L0)
    return SandwichReport(lower, value, upper)


def default_horizon(alpha, horizon_factor=0.1):
    """T(alpha) = horizon_factor * alpha * |log alpha|."""
    return horizon_factor * alpha * abs(np.log(alpha))


def make_bump(grid, center=2.0, width=1.0, amplitude=1.0):
    """Smooth compactly supported profile with sup = amplitude on
    (center - width, center + width), zero elsewhere."""
    u = (grid.nodes - center) / width
    vals = np.zeros(grid.n)
    inside = np.abs(u) < 1.0
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return RadialProfile(grid, vals)


def make_indicator(grid, lo, hi, amplitude=1.0):
    """Indicator of [lo, hi] sampled for trapezoid quadrature: nodes that
    land exactly on the jumps carry the half value, which restores
    second-order accuracy of the tail integrals."""
    vals = np.where((grid.nodes > lo) & (grid.nodes < hi), amplitude, 0.0)
    vals[grid.nodes == lo] = 0.5 * amplitude
    vals[grid.nodes == hi] = 0.5 * amplitude
    return RadialProfile(grid, vals)
