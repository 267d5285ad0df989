"""Time stepping for the full system on the (log R, theta) tensor grid.

The vorticity obeys an advection equation with a self-induced source:
the stream function is recovered from the vorticity by the per-mode
elliptic solves (decaying orientation), transport velocities come from
it, and the source collects the terms produced by the second-order
angular average of the flow. For a single sine mode psi = g(R) sin(2
theta) the source reduces to 2 g + O(alpha), which is what drives the
logarithmic growth: 2 g = L_s / (2 alpha) at leading order.

Products are evaluated pointwise and the tendency is truncated to the
resolved angular band (one third of the theta nodes), so solutions
started on low modes stay band-limited and the theta derivatives are
spectrally exact throughout.
"""

import numpy as np

from .errors import NumericalError, SupportEscapeError, CflViolationError
from .grids import (Field2D, r_ddr, r2_d2dr2, theta_deriv, sup_norm,
                    l2_norm, project_mode)
from .elliptic import solve_full
from .kernels import op_Ls
from . import model as _model


class FullState:
    """Immutable snapshot of the full evolution."""

    def __init__(self, alpha, omega, t):
        self.alpha = alpha
        self.omega = omega
        self.t = t


class RemainderSeries:
    """Sampled distance between the full evolution and the model, plus
    the full run's own norm history (l2, the tail value at the support
    inf, and twice the peak angular mean as the exponent proxy)."""

    def __init__(self, t, rem_sup, rem_l2, full_sup, model_sup, alpha,
                 n_steps, full_l2=None, ls_inf=None, a_proxy=None):
        self.t = np.asarray(t, dtype=float)
        self.rem_sup = np.asarray(rem_sup, dtype=float)
        self.rem_l2 = np.asarray(rem_l2, dtype=float)
        self.full_sup = np.asarray(full_sup, dtype=float)
        self.model_sup = np.asarray(model_sup, dtype=float)
        self.alpha = alpha
        self.n_steps = n_steps
        zeros = np.zeros_like(self.t)
        self.full_l2 = zeros if full_l2 is None else np.asarray(full_l2,
                                                                dtype=float)
        self.ls_inf = zeros if ls_inf is None else np.asarray(ls_inf,
                                                              dtype=float)
        self.a_proxy = zeros if a_proxy is None else np.asarray(a_proxy,
                                                                dtype=float)

    def max_rem_sup(self):
        return float(np.max(self.rem_sup))


def _band_limit(values, agrid, n_modes):
    spec = np.fft.rfft(values, axis=-1)
    spec[:, n_modes + 1:] = 0.0
    return np.fft.irfft(spec, n=agrid.n_theta, axis=-1)


def rhs_full(state, include_forcing=True, n_modes=None):
    """Tendency of the vorticity field at one instant."""
    rgrid, agrid = state.omega.rgrid, state.omega.agrid
    alpha = state.alpha
    nm = agrid.n_theta // 3 if n_modes is None else n_modes
    sol = solve_full(state.omega, alpha, n_modes=nm)
    psi = -sol.psi.values
    om = state.omega.values
    dth_psi = theta_deriv(psi, agrid)
    dx_psi = r_ddr(psi, rgrid, axis=0)
    tend = (alpha * dth_psi * r_ddr(om, rgrid, axis=0)
            - (2.0 * psi + alpha * dx_psi) * theta_deriv(om, agrid))
    if include_forcing:
        theta = agrid.nodes
        sc = (np.sin(theta) * np.cos(theta))[None, :]
        c2 = np.cos(2.0 * theta)[None, :]
        tend = tend + ((2.0 * alpha + alpha ** 2) * sc * dx_psi
                       + c2 * dth_psi
                       + alpha * c2 * r_ddr(dth_psi, rgrid, axis=0)
                       + alpha ** 2 * sc * r2_d2dr2(psi, rgrid, axis=0)
                       - sc * theta_deriv(psi, agrid, order=2))
    return Field2D(rgrid, agrid, _band_limit(tend, agrid, nm))


def transport_velocities(state, n_modes=None):
    """Grid speeds used by the time-step bound: dx/dt and dtheta/dt."""
    rgrid, agrid = state.omega.rgrid, state.omega.agrid
    nm = agrid.n_theta // 3 if n_modes is None else n_modes
    sol = solve_full(state.omega, state.alpha, n_modes=nm)
    psi = -sol.psi.values
    ux = state.alpha * theta_deriv(psi, agrid)
    ut = 2.0 * psi + state.alpha * r_ddr(psi, rgrid, axis=0)
    return ux, ut


def cfl_dt(state, cfl=0.5, n_modes=None):
    """Advective step bound; infinite for a quiescent field."""
    rgrid, agrid = state.omega.rgrid, state.omega.agrid
    ux, ut = transport_velocities(state, n_modes=n_modes)
    hx = float(np.log(rgrid.nodes[1] / rgrid.nodes[0]))
    vmax_x = float(np.max(np.abs(ux)))
    vmax_t = float(np.max(np.abs(ut)))
    dt = np.inf
    if vmax_x > 0:
        dt = min(dt, cfl * hx / vmax_x)
    if vmax_t > 0:
        dt = min(dt, cfl * agrid.dtheta / vmax_t)
    return dt


def step_full(state, dt, include_forcing=True, n_modes=None,
              enforce_cfl=True, cfl_safety=0.5, support_threshold=None):
    """One strong-stability-preserving third-order step.

    enforce_cfl rechecks the advective bound at the cost of one extra
    elliptic solve; drivers that already sized dt from cfl_dt switch it
    off. support_threshold, when given, aborts if the stepped vorticity
    reaches the outer tenth of the grid above that level."""
    if dt <= 0:
        raise ValueError("nonpositive-dt")
    if enforce_cfl:
        bound = cfl_dt(state, cfl=cfl_safety, n_modes=n_modes)
        if dt > bound * (1.0 + 1e-12):
            raise CflViolationError(
                "dt=%g exceeds the advective bound %g at t=%g"
                % (dt, bound, state.t), stage="step_full")
    om = state.omega

    def rhs_of(values, t):
        return rhs_full(FullState(state.alpha,
                                  Field2D(om.rgrid, om.agrid, values), t),
                        include_forcing=include_forcing,
                        n_modes=n_modes).values

    v0 = om.values
    v1 = v0 + dt * rhs_of(v0, state.t)
    v2 = 0.75 * v0 + 0.25 * (v1 + dt * rhs_of(v1, state.t + dt))
    v3 = (v0 + 2.0 * (v2 + dt * rhs_of(v2, state.t + 0.5 * dt))) / 3.0
    if not np.all(np.isfinite(v3)):
        raise NumericalError("non-finite vorticity after step at t=%g"
                             % (state.t + dt), stage="step_full")
    out = FullState(state.alpha, Field2D(om.rgrid, om.agrid, v3),
                    state.t + dt)
    if support_threshold is not None:
        check_support(out, support_threshold)
    return out


def check_support(state, threshold):
    """The outer tenth of the grid must stay quiet enough that the tail
    integrals and the right boundary rows remain honest. The stream
    function decays only algebraically (like R^{-2/alpha}), so the source
    deposits a genuine small tail out there; the guard flags levels that
    would pollute the solves, not the tail's existence."""
    rgrid = state.omega.rgrid
    band = rgrid.nodes >= 0.9 * rgrid.r_max
    reach = float(np.max(np.abs(state.omega.values[band, :])))
    if reach > threshold:
        raise SupportEscapeError(
            "vorticity reached the outer band at t=%g (%.3e > %.3e); "
            "enlarge r_max" % (state.t, reach, threshold))


def step_linear(state, dt):
    """Exact step of the sourced linear dynamics d omega/dt =
    L_s(omega)/(2 alpha): the source is constant in theta, so it leaves
    L_s itself invariant and a single step of any size is exact."""
    if dt <= 0:
        raise ValueError("nonpositive-dt")
    om = state.omega
    ls = op_Ls(om).values
    values = om.values + (0.5 * dt / state.alpha) * ls[:, None]
    return FullState(state.alpha, Field2D(om.rgrid, om.agrid, values),
                     state.t + dt)


def run_remainder_study(f0, alpha, agrid, t_final=None, n_samples=200,
                        cfl=0.5, model_dt_factor=0.02, n_modes=None,
                        escape_tol=1e-4):
    """March the full system and the model side by side from the same
    initial data (pure sine mode built on f0) and sample how far apart
    they drift. Returns a RemainderSeries."""
    if t_final is None:
        t_final = _model.default_horizon(alpha)
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    mstate = _model.init_state(f0, alpha)
    omega0 = _model.reconstruct_Omega2(mstate, agrid)
    state = FullState(alpha, omega0, 0.0)
    escape_threshold = escape_tol * max(sup_norm(omega0), 1.0)
    dt_model = alpha * model_dt_factor
    dt_cap = 0.05 * alpha
    times = np.linspace(0.0, t_final, n_samples)
    sup_f0 = f0.values > 0
    j0 = int(np.argmax(sup_f0)) if np.any(sup_f0) else 0
    rem_sup, rem_l2, full_sup, model_sup = [], [], [], []
    full_l2, ls_inf, a_proxy = [], [], []
    n_steps = 0
    for i, ts in enumerate(times):
        while state.t < ts - 1e-14 * t_final:
            dt = min(cfl_dt(state, cfl=cfl, n_modes=n_modes), dt_cap,
                     ts - state.t)
            if dt < 1e-12:
                raise NumericalError("time step collapsed at t=%g"
                                     % state.t, stage="remainder-study")
            # dt already honors the advective bound just computed
            state = step_full(state, dt, n_modes=n_modes, enforce_cfl=False)
            check_support(state, escape_threshold)
            n_steps += 1
        while mstate.t < ts - 1e-14 * t_final:
            mstate = _model.step(mstate, min(dt_model, ts - mstate.t))
        om_model = _model.reconstruct_Omega2(mstate, agrid)
        diff = Field2D(agrid=agrid, rgrid=f0.grid,
                       values=state.omega.values - om_model.values)
        rem_sup.append(sup_norm(diff))
        rem_l2.append(l2_norm(diff))
        full_sup.append(sup_norm(state.omega))
        model_sup.append(_model.sup_omega2(mstate))
        full_l2.append(l2_norm(state.omega))
        ls_inf.append(float(op_Ls(state.omega).values[j0]))
        a_proxy.append(2.0 * float(np.max(
            project_mode(state.omega, 0, "cos").values)))
    return RemainderSeries(times, rem_sup, rem_l2, full_sup, model_sup,
                           alpha, n_steps, full_l2=full_l2, ls_inf=ls_inf,
                           a_proxy=a_proxy)
