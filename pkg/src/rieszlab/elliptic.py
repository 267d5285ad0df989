"""Stream-function solves on the log-radial grid, one angular mode at a
time.

In x = log R each mode n obeys the constant-coefficient problem

    alpha^2 psi_xx + 4 alpha psi_x + (4 - n^2) psi = omega_n(x),

whose characteristic roots are (n - 2)/alpha and -(n + 2)/alpha. For
n >= 3 the roots straddle zero, Dirichlet rows pin each homogeneous
solution at the end where it grows, and a tridiagonal solve is stable
and second order. Mode 2 has roots 0 and -4/alpha: the solution is
constant below the support, so the left row imposes zero slope through
a ghost node. For n = 0 and n = 1 both roots are negative; a two-point
boundary solve would have to separate two decaying exponentials that are
numerically parallel across the grid and its matrix is exponentially
ill-conditioned, so those modes are computed instead by marching the
exact causal Green's convolution left to right, integrating the linear
interpolant of the data exactly on every cell.

Mode 2 also has the closed quadrature form

    psi_2(R) = -(1/(4 alpha)) [ L(omega_2)(R) + I(R) ],
    I(R) = integral_0^R (omega_2(s)/s) (s/R)^{4/alpha} ds,

split here into a principal tail part and a history remainder bounded by
sup|omega_2| / 16 uniformly in alpha; the bound survives discretization
because the history cells integrate the interpolant exactly.
"""

import numpy as np
from scipy.linalg import solve_banded
from scipy.signal import lfilter

from .errors import EllipticError
from .grids import (RadialGrid, RadialProfile, Field2D, l2_norm, trapz,
                    r_ddr, theta_deriv)
from .kernels import profile_tail


class EllipticSolution:
    """psi is the assembled field; coeffs maps (n, parity) to the solved
    radial coefficient; residual_norm is the relative l2 defect of the
    stencil-mode rows (the marched modes 0 and 1 satisfy an integral
    recurrence instead and their centered-stencil defect, second order by
    construction, is reported separately as low_mode_defect);
    truncation_norm is the L2 mass of the angular modes dropped by the
    cutoff."""

    def __init__(self, alpha, psi, coeffs, residual_norm, low_mode_defect,
                 truncation_norm):
        self.alpha = alpha
        self.psi = psi
        self.coeffs = coeffs
        self.residual_norm = residual_norm
        self.low_mode_defect = low_mode_defect
        self.truncation_norm = truncation_norm

    def mode_sup(self, n, parity):
        return float(np.max(np.abs(self.coeffs[(n, parity)].values)))


def _log_step(grid):
    if grid.spacing_kind != "geometric":
        raise ValueError("mode solves need a geometric radial grid")
    return float(np.log(grid.nodes[1] / grid.nodes[0]))


def _exp_cell_weights(lam, h):
    """Exact integral over one cell of e^{lam u} against the linear
    interpolant, u measured from the near node: returns (E, w_near, w_far)
    with E = e^{lam h}."""
    E = np.exp(lam * h)
    S = np.expm1(lam * h) / lam
    M1 = (h * E - S) / lam
    return E, S - M1 / h, M1 / h


def _causal_single(w, lam, h):
    E, w_near, w_far = _exp_cell_weights(lam, h)
    cells = w_near * w[1:] + w_far * w[:-1]
    out = np.zeros(w.size)
    out[1:] = lfilter([1.0], [1.0, -E], cells)
    return out


def _causal_double(w, lam, h):
    """Convolution with (x - y) e^{lam (x - y)} for the double root, via
    the coupled recurrences P' = E P + cell, Q' = E (Q + h P) + cell."""
    E, w_near, w_far = _exp_cell_weights(lam, h)
    S = np.expm1(lam * h) / lam
    M1 = (h * E - S) / lam
    M2 = (h * h * E - 2.0 * M1) / lam
    cp = w_near * w[1:] + w_far * w[:-1]
    cq = (M1 - M2 / h) * w[1:] + (M2 / h) * w[:-1]
    P = np.zeros(w.size)
    P[1:] = lfilter([1.0], [1.0, -E], cp)
    Q = np.zeros(w.size)
    Q[1:] = lfilter([1.0], [1.0, -E], E * h * P[:-1] + cq)
    return Q


def _solve_mode_low(omega_n, n, alpha):
    grid = omega_n.grid
    h = _log_step(grid)
    w = omega_n.values.astype(float)
    if n == 1:
        psi = (_causal_single(w, -1.0 / alpha, h)
               - _causal_single(w, -3.0 / alpha, h)) / (2.0 * alpha)
    else:
        psi = _causal_double(w, -2.0 / alpha, h) / (alpha * alpha)
    return RadialProfile(grid, psi)


def _mode_bands(grid, n, alpha):
    h = _log_step(grid)
    N = grid.n
    a2h = alpha * alpha / (h * h)
    b2h = 2.0 * alpha / h
    diag = np.full(N, -2.0 * a2h + (4.0 - n * n))
    lower = np.full(N - 1, a2h - b2h)
    upper = np.full(N - 1, a2h + b2h)
    if n == 2:
        # ghost node psi_{-1} = psi_1 encodes zero left slope and cancels
        # the first-order term in the boundary row
        diag[0] = -2.0 * a2h
        upper[0] = 2.0 * a2h
    else:
        diag[0] = 1.0
        upper[0] = 0.0
    diag[-1] = 1.0
    lower[-1] = 0.0
    return lower, diag, upper


def _check_boundary_decay(psi, n, tol):
    """The right grid end stands in for R = infinity for every mode, and
    the left end does for n >= 3 (mode 2 tends to a constant there, the
    marched modes vanish there by causality). A solved coefficient still
    carrying more than tol of its sup at a checked end means the grid
    ends inside the solution."""
    peak = float(np.max(np.abs(psi)))
    if peak == 0.0:
        return
    edge = float(np.max(np.abs(psi[-4:])))
    if n >= 3:
        edge = max(edge, float(np.max(np.abs(psi[:4]))))
    if edge > tol * peak:
        raise EllipticError(
            "unresolved-boundary: mode %d carries %.2e of its sup at the "
            "grid end; enlarge the grid" % (n, edge / peak))


def solve_mode(n, omega_n, alpha, boundary_tol=0.05, check_resolution=False):
    """Radial coefficient of psi for one angular mode, on the same grid.

    check_resolution re-solves on every other node and Richardson-
    estimates the discretization error; it exists for the self-check
    paths and is off on the hot path."""
    if n < 0 or n != int(n):
        raise ValueError("mode index must be a nonnegative integer")
    n = int(n)
    grid = omega_n.grid
    if n < 2:
        psi_prof = _solve_mode_low(omega_n, n, alpha)
        psi = psi_prof.values
    else:
        lower, diag, upper = _mode_bands(grid, n, alpha)
        rhs = omega_n.values.astype(float).copy()
        if n != 2:
            rhs[0] = 0.0
        rhs[-1] = 0.0
        ab = np.zeros((3, grid.n))
        ab[0, 1:] = upper
        ab[1, :] = diag
        ab[2, :-1] = lower
        psi = solve_banded((1, 1), ab, rhs)
        psi_prof = RadialProfile(grid, psi)
    if not np.all(np.isfinite(psi)):
        raise EllipticError("mode %d solve returned non-finite values" % n)
    if boundary_tol is not None:
        _check_boundary_decay(psi, n, boundary_tol)
    if check_resolution:
        coarse = RadialGrid(grid.nodes[::2], grid.spacing_kind)
        sub = RadialProfile(coarse, omega_n.values[::2])
        psi_c = solve_mode(n, sub, alpha, boundary_tol=None).values
        est = float(np.max(np.abs(psi[::2] - psi_c))) / 3.0
        peak = max(float(np.max(np.abs(psi))), 1e-300)
        if est > 1e-3 * peak:
            raise EllipticError(
                "grid-too-coarse: mode %d error estimate %.2e of sup %.2e"
                % (n, est, peak))
    return psi_prof


def apply_mode_operator(psi_n, n, alpha):
    """The exact matrix rows of the stencil solve applied to a coefficient,
    boundary rows included, so for n >= 2 solve-then-apply returns the
    (boundary-modified) right-hand side to machine precision."""
    grid = psi_n.grid
    lower, diag, upper = _mode_bands(grid, int(n), alpha)
    v = psi_n.values
    out = diag * v
    out[:-1] += upper * v[1:]
    out[1:] += lower * v[:-1]
    return RadialProfile(grid, out)


def mode_residual(psi_n, omega_n, n, alpha):
    """Max-norm residual of the discrete system solved by solve_mode.
    Only the stencil modes qualify: the marched modes 0 and 1 satisfy the
    stencil to truncation order, not to machine precision."""
    if n < 2:
        raise ValueError("residual is defined for the stencil modes, n >= 2")
    rhs = omega_n.values.astype(float).copy()
    if n != 2:
        rhs[0] = 0.0
    rhs[-1] = 0.0
    applied = apply_mode_operator(psi_n, n, alpha).values
    return float(np.max(np.abs(applied - rhs)))


def exact_mode2(f, alpha, R=None):
    """Quadrature form of the mode-2 solution. The history integral I is
    accumulated left to right as I_{j+1} = E_j I_j + cell_j with
    E_j = (R_j / R_{j+1})^{4/alpha} <= 1, so no large power is ever formed
    no matter how small alpha is, and each cell integrates the linear
    interpolant of f (in log R) exactly. Assumes f vanishes at and below
    the first node.

    Returns the profile on f's grid, or the value at R (interpolated in
    log R, constant below the grid where the solution is its own limit)
    when R is given."""
    grid = f.grid
    nodes = grid.nodes
    p = 4.0 / alpha
    hx = np.diff(np.log(nodes))
    E, w_near, w_far = _exp_cell_weights(-p, hx)
    cells = w_near * f.values[1:] + w_far * f.values[:-1]
    hist = np.zeros(grid.n)
    acc = 0.0
    for j in range(grid.n - 1):
        acc = E[j] * acc + cells[j]
        hist[j + 1] = acc
    tail = profile_tail(f).values
    prof = RadialProfile(grid, -(tail + hist) / (4.0 * alpha))
    if R is None:
        return prof
    if R <= 0:
        raise ValueError("R must be positive")
    return float(np.interp(np.log(R), grid.log_nodes, prof.values))


def principal_remainder_split(f, alpha):
    """psi_2 = principal + remainder with principal = -L(f)/(4 alpha);
    the remainder obeys |remainder| <= sup|f| / 16 uniformly in alpha."""
    grid = f.grid
    principal = RadialProfile(grid, -profile_tail(f).values / (4.0 * alpha))
    full = exact_mode2(f, alpha)
    remainder = RadialProfile(grid, full.values - principal.values)
    return principal, remainder


def solve_full(omega, alpha, n_modes=None):
    """Project omega on angular modes up to n_modes (default n_theta // 3,
    which also dealiases the quadratic transport terms), solve each mode,
    and assemble. Returns an EllipticSolution.

    The assembly runs in spectral space (one inverse transform instead of
    an outer product per mode) and the stencil modes solve both parities
    through a single banded call; this sits on the hot path of the time
    stepper."""
    agrid = omega.agrid
    rgrid = omega.rgrid
    if n_modes is None:
        n_modes = agrid.n_theta // 3
    if n_modes < 2:
        raise ValueError("need at least modes 0..2, got n_modes=%d" % n_modes)
    if n_modes >= agrid.n_theta // 2:
        raise ValueError("n_modes must stay below the Nyquist mode")
    N = agrid.n_theta
    nodes = rgrid.nodes
    spec = np.fft.rfft(omega.values, axis=-1)
    scale = 2.0 / N
    coeffs = {}
    psi_spec = np.zeros_like(spec)
    num2 = 0.0
    den2 = 0.0
    low2 = 0.0

    def _interior_defect(v, w, n):
        lower, diag, upper = _mode_bands(rgrid, n, alpha)
        d = diag * v
        d[:-1] += upper * v[1:]
        d[1:] += lower * v[:-1]
        d -= w
        d[0] = d[-1] = 0.0
        return d

    om0 = spec[:, 0].real / N
    p0 = _solve_mode_low(RadialProfile(rgrid, om0), 0, alpha)
    coeffs[(0, "cos")] = p0
    psi_spec[:, 0] = N * p0.values
    den2 += 2.0 * np.pi * trapz(om0 ** 2, nodes)
    low2 += 2.0 * np.pi * trapz(_interior_defect(p0.values, om0, 0) ** 2,
                                nodes)
    om1s = -scale * spec[:, 1].imag
    om1c = scale * spec[:, 1].real
    p1s = _solve_mode_low(RadialProfile(rgrid, om1s), 1, alpha)
    p1c = _solve_mode_low(RadialProfile(rgrid, om1c), 1, alpha)
    coeffs[(1, "sin")] = p1s
    coeffs[(1, "cos")] = p1c
    psi_spec[:, 1] = 0.5 * N * (p1c.values - 1j * p1s.values)
    den2 += np.pi * (trapz(om1s ** 2, nodes) + trapz(om1c ** 2, nodes))
    low2 += np.pi * (
        trapz(_interior_defect(p1s.values, om1s, 1) ** 2, nodes)
        + trapz(_interior_defect(p1c.values, om1c, 1) ** 2, nodes))
    for n in range(2, n_modes + 1):
        lower, diag, upper = _mode_bands(rgrid, n, alpha)
        om_n = np.empty((rgrid.n, 2))
        om_n[:, 0] = -scale * spec[:, n].imag
        om_n[:, 1] = scale * spec[:, n].real
        rhs = om_n.copy()
        if n != 2:
            rhs[0, :] = 0.0
        rhs[-1, :] = 0.0
        ab = np.zeros((3, rgrid.n))
        ab[0, 1:] = upper
        ab[1, :] = diag
        ab[2, :-1] = lower
        sol = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(sol)):
            raise EllipticError("mode %d solve returned non-finite values"
                                % n)
        coeffs[(n, "sin")] = RadialProfile(rgrid, sol[:, 0])
        coeffs[(n, "cos")] = RadialProfile(rgrid, sol[:, 1])
        psi_spec[:, n] = 0.5 * N * (sol[:, 1] - 1j * sol[:, 0])
        applied = diag[:, None] * sol
        applied[:-1, :] += upper[:, None] * sol[1:, :]
        applied[1:, :] += lower[:, None] * sol[:-1, :]
        resid = applied - rhs
        num2 += np.pi * (trapz(resid[:, 0] ** 2, nodes)
                         + trapz(resid[:, 1] ** 2, nodes))
        den2 += np.pi * (trapz(om_n[:, 0] ** 2, nodes)
                         + trapz(om_n[:, 1] ** 2, nodes))
    psi = Field2D(rgrid, agrid, np.fft.irfft(psi_spec, n=N, axis=-1))
    spec_trunc = spec.copy()
    spec_trunc[:, :n_modes + 1] = 0.0
    dropped = np.fft.irfft(spec_trunc, n=N, axis=-1)
    truncation = l2_norm(Field2D(rgrid, agrid, dropped))
    if den2 > 0.0:
        residual_norm = float(np.sqrt(num2 / den2))
        low_defect = float(np.sqrt(low2 / den2))
    else:
        residual_norm = 0.0
        low_defect = 0.0
    return EllipticSolution(alpha, psi, coeffs, residual_norm, low_defect,
                            truncation)


def velocity_from_psi(psi, alpha):
    """Advecting speeds of the stream function: angular speed
    2 psi + alpha R d_R psi and radial speed -alpha R d_theta psi.
    The theta derivative is spectral, the radial one is the centered
    log-grid stencil."""
    angular = 2.0 * psi.values + alpha * r_ddr(psi.values, psi.rgrid, axis=0)
    radial = -alpha * psi.rgrid.nodes[:, None] * theta_deriv(psi.values,
                                                             psi.agrid)
    return (Field2D(psi.rgrid, psi.agrid, angular),
            Field2D(psi.rgrid, psi.agrid, radial))
