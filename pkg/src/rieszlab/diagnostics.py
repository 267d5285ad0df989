"""Growth-curve fitting and norm monitors.

The headline measurement is the shape of sup_norm(t): the model grows
like c_amp * log(1 + c_rate * t / alpha) while the transport-free
baseline grows linearly, and the fits here let the two be told apart by
residual size rather than by eye. The alpha sweep study regresses the
peak model/full mismatch against alpha on log-log axes, where a square
root law shows up as slope one half.
"""

import numpy as np
from scipy.optimize import minimize_scalar

from .grids import Field2D, l2_norm, r_ddr, theta_deriv
from . import model as _model


class GrowthCurve:
    """Sampled norm history of one run: times, sup norms, l2 norms, and
    the identifying metadata (alpha, delta, kind in model|full|linear)."""

    def __init__(self, t, sup_norm, l2_norm, alpha, delta, kind):
        self.t = np.asarray(t, dtype=float)
        self.sup_norm = np.asarray(sup_norm, dtype=float)
        self.l2_norm = np.asarray(l2_norm, dtype=float)
        if self.t.ndim != 1 or self.t.size < 2:
            raise ValueError("need a 1-d time axis with at least 2 samples")
        if self.sup_norm.shape != self.t.shape or \
                self.l2_norm.shape != self.t.shape:
            raise ValueError("norm columns must match the time axis")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("samples must be strictly time-ordered")
        if np.any(self.sup_norm < 0) or np.any(self.l2_norm < 0):
            raise ValueError("norms must be nonnegative")
        if kind not in ("model", "full", "linear"):
            raise ValueError("kind must be model, full or linear")
        self.alpha = float(alpha)
        self.delta = float(delta)
        self.kind = kind

    @property
    def n_samples(self):
        return self.t.size


class FitResult:
    """Fitted growth constants. Log fits carry c_amp and c_rate for
    delta + c_amp*log(1 + c_rate*t/alpha); linear fits carry slope.
    rms is the root mean square residual of the fit; log fits also
    record the rms of the best straight line through the same data, so
    a curve that is secretly linear flags itself."""

    def __init__(self, kind, rms, c_amp=None, c_rate=None, slope=None,
                 linear_rms=None):
        self.kind = kind
        self.rms = rms
        self.c_amp = c_amp
        self.c_rate = c_rate
        self.slope = slope
        self.linear_rms = linear_rms

    @property
    def linear_preferred(self):
        """True when a straight line explains the curve at least as well
        as the log law; meaningful for log fits only."""
        if self.linear_rms is None:
            return False
        return self.linear_rms <= self.rms


def _line_rms(t, y):
    coef = np.polyfit(t, y, 1)
    return float(np.sqrt(np.mean((np.polyval(coef, t) - y) ** 2))), coef


def fit_linear_growth(curve):
    """Least-squares straight line through sup_norm(t)."""
    rms, coef = _line_rms(curve.t, curve.sup_norm)
    return FitResult("linear", rms, slope=float(coef[0]))


def fit_log_growth(curve, alpha=None):
    """Fit sup_norm(t) - sup_norm(0) to c_amp * log(1 + c_rate*t/alpha).

    For fixed c_rate the amplitude is a linear least-squares solve, so
    the search is one dimensional: a coarse sweep of c_rate over many
    decades followed by a bounded local refinement. Raises ValueError
    for fewer than 10 samples (insufficient-samples) or a curve with no
    growth to fit (degenerate-curve)."""
    if alpha is None:
        alpha = curve.alpha
    if curve.n_samples < 10:
        raise ValueError("insufficient-samples: need at least 10, got %d"
                         % curve.n_samples)
    t = curve.t
    y = curve.sup_norm - curve.sup_norm[0]
    scale = max(float(np.max(np.abs(curve.sup_norm))), 1e-300)
    if float(np.max(y)) <= 1e-13 * scale:
        raise ValueError("degenerate-curve: no growth to fit")

    t_span = float(t[-1])

    def sse_and_amp(c_rate):
        m = np.log1p(c_rate * t / alpha)
        mm = float(np.dot(m, m))
        if mm == 0.0:
            return float(np.dot(y, y)), 0.0
        amp = float(np.dot(y, m)) / mm
        r = y - amp * m
        return float(np.dot(r, r)), amp

    # sweep the dimensionless product c_rate * T / alpha over nine decades
    grid = np.logspace(-3.0, 6.0, 241) * alpha / t_span
    sses = np.array([sse_and_amp(c)[0] for c in grid])
    k = int(np.argmin(sses))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda u: sse_and_amp(np.exp(u))[0],
                          bounds=(np.log(lo), np.log(hi)), method="bounded",
                          options={"xatol": 1e-12})
    c_rate = float(np.exp(res.x))
    sse, c_amp = sse_and_amp(c_rate)
    if c_amp <= 0.0:
        raise ValueError("degenerate-curve: fitted amplitude is not positive")
    rms = float(np.sqrt(sse / t.size))
    lin_rms, _ = _line_rms(t, y)
    return FitResult("log", rms, c_amp=c_amp, c_rate=c_rate,
                     linear_rms=lin_rms)


class ScalingReport:
    """Log-log regression of peak remainder against alpha."""

    def __init__(self, alphas, values, exponent, ratios, cumulative):
        self.alphas = alphas
        self.values = values
        self.exponent = exponent
        self.ratios = ratios
        self.cumulative = cumulative

    def bound_coefficient(self, p=0.5):
        """Smallest C with values <= C * alpha**p at every entry."""
        return float(np.max(self.values / self.alphas ** p))


def alpha_scaling_study(results):
    """Fit values ~ C * alpha^p from (alpha, max remainder sup) pairs.

    Requires at least three alphas in geometric progression (so the
    per-pair ratios are comparable); reports the regression exponent,
    consecutive value ratios, and the running exponent through each
    prefix of the sweep."""
    pairs = [(float(a), float(v)) for a, v in results]
    if len(pairs) < 3:
        raise ValueError("insufficient-points: need at least 3 alphas")
    alphas = np.array([p[0] for p in pairs])
    values = np.array([p[1] for p in pairs])
    if np.any(alphas <= 0) or np.any(values <= 0):
        raise ValueError("alphas and remainder values must be positive")
    steps = alphas[1:] / alphas[:-1]
    if np.max(np.abs(steps / steps[0] - 1.0)) > 1e-9:
        raise ValueError("alphas must form a geometric progression")
    la, lv = np.log(alphas), np.log(values)
    exponent = float(np.polyfit(la, lv, 1)[0])
    ratios = values[:-1] / values[1:]
    cumulative = np.full(alphas.size, np.nan)
    for k in range(1, alphas.size):
        cumulative[k] = float(np.polyfit(la[:k + 1], lv[:k + 1], 1)[0])
    return ScalingReport(alphas, values, exponent, ratios, cumulative)


def norm_monitors(states, agrid):
    """Norm table for a sequence of model snapshots.

    Columns: sup|psi2| and the theta- and R-weighted first derivatives
    (all three should stay O(1/alpha), i.e. alpha times each is bounded
    uniformly), plus a discrete first-order Sobolev norm of the
    reconstructed vorticity and a finite-difference estimate of its
    logarithmic growth rate."""
    states = list(states)
    t = np.array([s.t for s in states])
    sup_psi = np.empty(t.size)
    sup_dth = np.empty(t.size)
    sup_rdr = np.empty(t.size)
    h1 = np.empty(t.size)
    for i, s in enumerate(states):
        ls = _model.eval_Ls(s)
        amp = ls.values / (4.0 * s.alpha)
        sup_psi[i] = float(np.max(np.abs(amp)))
        # d_theta of amp*sin(2 theta) peaks at twice the amplitude
        sup_dth[i] = 2.0 * sup_psi[i]
        sup_rdr[i] = float(np.max(np.abs(r_ddr(amp, ls.grid, axis=0))))
        om = _model.reconstruct_Omega2(s, agrid)
        h1[i] = float(np.sqrt(
            l2_norm(om) ** 2
            + l2_norm(Field2D(om.rgrid, agrid,
                              theta_deriv(om.values, agrid))) ** 2
            + l2_norm(Field2D(om.rgrid, agrid,
                              r_ddr(om.values, om.rgrid, axis=0))) ** 2))
    rate = np.full(t.size, np.nan)
    if t.size >= 2 and np.all(h1 > 0):
        rate = np.gradient(np.log(h1), t)
    return {"t": t, "sup_psi2": sup_psi, "sup_dtheta_psi2": sup_dth,
            "sup_rdr_psi2": sup_rdr, "h1_omega2": h1, "h1_rate": rate}
