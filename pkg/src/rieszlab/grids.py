"""Grids, discretized fields, and the discrete norms shared by all solvers.

Conventions. The angle theta lives on [0, 2pi), uniformly sampled, and all
stored fields are periodic in theta. The radial coordinate R is sampled
either uniformly or geometrically; geometric grids are uniform in
x = log R, which is the coordinate every radial derivative and every
elliptic solve uses. Norms use the measure dR dtheta. Radial quadrature
is the trapezoid rule on the stored nodes, with no interpolation between
nodes.

All types are plain value holders and should be treated as immutable
after construction.
"""

import numpy as np

_SPACING_KINDS = ("uniform", "geometric")


class RadialGrid:

    def __init__(self, nodes, spacing_kind):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 8:
            raise ValueError("too-few-nodes: a radial grid needs at least 8 nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("radial nodes must be finite")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("radial nodes must be strictly increasing")
        if nodes[0] < 0:
            raise ValueError("radial nodes must be nonnegative")
        if spacing_kind not in _SPACING_KINDS:
            raise ValueError("spacing_kind must be one of %s" % (_SPACING_KINDS,))
        if spacing_kind == "geometric":
            if nodes[0] <= 0:
                raise ValueError("geometric-with-zero-origin: geometric grids need r_min > 0")
            ratios = nodes[1:] / nodes[:-1]
            if np.max(ratios) - np.min(ratios) > 1e-8 * np.mean(ratios):
                raise ValueError("nodes are not geometrically spaced")
        else:
            steps = np.diff(nodes)
            if np.max(steps) - np.min(steps) > 1e-8 * np.mean(steps):
                raise ValueError("nodes are not uniformly spaced")
        self.nodes = nodes
        self.spacing_kind = spacing_kind
        self.n = nodes.size

    @property
    def r_min(self):
        return self.nodes[0]

    @property
    def r_max(self):
        return self.nodes[-1]

    @property
    def log_nodes(self):
        return np.log(self.nodes)

    def same_nodes(self, other):
        return self.n == other.n and np.array_equal(self.nodes, other.nodes)


def build_radial_grid(r_min, r_max, n, kind="geometric"):
    if not (0 <= r_min < r_max):
        raise ValueError("invalid-range: need 0 <= r_min < r_max, got [%g, %g]" % (r_min, r_max))
    if n < 8:
        raise ValueError("too-few-nodes: need n >= 8, got %d" % n)
    if kind == "uniform":
        nodes = np.linspace(r_min, r_max, n)
    elif kind == "geometric":
        if r_min <= 0:
            raise ValueError("geometric-with-zero-origin: geometric grids need r_min > 0")
        nodes = r_min * (r_max / r_min) ** (np.arange(n) / (n - 1))
        nodes[-1] = r_max
    else:
        raise ValueError("spacing_kind must be one of %s" % (_SPACING_KINDS,))
    return RadialGrid(nodes, kind)


class AngularGrid:

    def __init__(self, n_theta):
        n_theta = int(n_theta)
        if n_theta < 4 or n_theta % 4 != 0:
            raise ValueError("n_theta must be a positive multiple of 4, got %d" % n_theta)
        self.n_theta = n_theta
        self.nodes = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.dtheta = 2.0 * np.pi / n_theta


class RadialProfile:

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError("profile values must have shape (%d,)" % grid.n)
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        self.grid = grid
        self.values = values


class Field2D:

    def __init__(self, rgrid, agrid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (rgrid.n, agrid.n_theta):
            raise ValueError(
                "field values must have shape (%d, %d)" % (rgrid.n, agrid.n_theta))
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.rgrid = rgrid
        self.agrid = agrid
        self.values = values


def trapz(values, nodes):
    return float(np.sum((values[1:] + values[:-1]) * 0.5 * np.diff(nodes)))


def right_tail(values, nodes):
    """Trapezoid tail integrals: out[j] approximates the integral of the
    sampled function from nodes[j] to nodes[-1]. out[-1] is 0."""
    seg = (values[:-1] + values[1:]) * 0.5 * np.diff(nodes)
    out = np.empty_like(values)
    out[-1] = 0.0
    out[:-1] = np.cumsum(seg[::-1])[::-1]
    return out


def sup_norm(field):
    return float(np.max(np.abs(field.values)))


def l2_norm(field):
    # theta is periodic, so the trapezoid rule reduces to dtheta * sum
    per_r = field.agrid.dtheta * np.sum(field.values ** 2, axis=1)
    return float(np.sqrt(trapz(per_r, field.rgrid.nodes)))


def project_mode(field, n, parity):
    """(1/pi) integral of field * trig(n theta) over theta, per radial node.

    Trapezoid in theta, exact for band-limited fields on the uniform grid.
    For n = 0 the normalization is (1/2pi) and only cos parity is defined.
    """
    if n < 0:
        raise ValueError("mode index must be nonnegative")
    if parity not in ("sin", "cos"):
        raise ValueError("parity must be 'sin' or 'cos'")
    if n == 0 and parity == "sin":
        raise ValueError("parity-mismatch: mode 0 has no sin component")
    theta = field.agrid.nodes
    w = np.sin(n * theta) if parity == "sin" else np.cos(n * theta)
    scale = (1.0 if n == 0 else 2.0) / field.agrid.n_theta
    coeff = scale * (field.values @ w)
    return RadialProfile(field.rgrid, coeff)


def assemble_modes(rgrid, agrid, modes):
    """Inverse of project_mode: modes maps (n, parity) -> coefficient array."""
    theta = agrid.nodes
    values = np.zeros((rgrid.n, agrid.n_theta))
    for (n, parity), coeff in modes.items():
        w = np.sin(n * theta) if parity == "sin" else np.cos(n * theta)
        values += np.outer(np.asarray(coeff, dtype=float), w)
    return Field2D(rgrid, agrid, values)


def _d1_uniform(values, h, axis=0):
    return np.gradient(values, h, axis=axis, edge_order=2)


def _d2_uniform(values, h, axis=0):
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h ** 2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h ** 2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def r_ddr(values, rgrid, axis=0):
    """R dF/dR with second-order stencils; on geometric grids this is the
    x-derivative on the uniform log grid, avoiding any division by R."""
    if rgrid.spacing_kind == "geometric":
        h = np.log(rgrid.nodes[1] / rgrid.nodes[0])
        return _d1_uniform(values, h, axis=axis)
    h = rgrid.nodes[1] - rgrid.nodes[0]
    d = _d1_uniform(values, h, axis=axis)
    shape = [1] * np.ndim(values)
    shape[axis] = rgrid.n
    return d * rgrid.nodes.reshape(shape)


def r2_d2dr2(values, rgrid, axis=0):
    """R^2 d2F/dR2; equals d2/dx2 - d/dx on geometric grids."""
    if rgrid.spacing_kind == "geometric":
        h = np.log(rgrid.nodes[1] / rgrid.nodes[0])
        return _d2_uniform(values, h, axis=axis) - _d1_uniform(values, h, axis=axis)
    h = rgrid.nodes[1] - rgrid.nodes[0]
    d2 = _d2_uniform(values, h, axis=axis)
    shape = [1] * np.ndim(values)
    shape[axis] = rgrid.n
    return d2 * rgrid.nodes.reshape(shape) ** 2


def theta_deriv(values, agrid, order=1):
    """Spectral theta-derivative along the last axis of a (n_r, n_theta) array."""
    coeff = np.fft.rfft(values, axis=-1)
    k = np.arange(coeff.shape[-1])
    coeff = coeff * (1j * k) ** order
    if agrid.n_theta % 2 == 0 and order % 2 == 1:
        coeff[..., -1] = 0.0  # Nyquist mode has no well-defined odd derivative
    return np.fft.irfft(coeff, n=agrid.n_theta, axis=-1)
