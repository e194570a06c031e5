"""Deterministic first- and second-moment dynamics of the pumped laser.

The moment system is linear with a constant source, so it is written as
``dx/dt = A x + s`` over the complex state vector

    [na, nb, nc, ma, m, b, mdm, madma]

and advanced with the classical fixed-step fourth-order Runge-Kutta rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import Populations
from .errors import DivergenceError, LaserLabError

STATE_SIZE = 8
NA, NB, NC, MA, M, B, MDM, MADMA = range(STATE_SIZE)

CSV_COLUMNS = ("t", "na", "nb", "nc", "re_ma", "im_ma", "re_m", "im_m",
               "re_b", "im_b", "mdm", "madma")

#: upper bound on stored samples when the caller does not set a stride
DEFAULT_MAX_SAMPLES = 10_000


@dataclass(frozen=True)
class MomentState:
    na: float
    nb: float
    nc: float
    ma: complex = 0j
    m: complex = 0j
    b: complex = 0j
    mdm: float = 0.0
    madma: float = 0.0

    @classmethod
    def bottom(cls, n_atoms, b=0j):
        """All atoms in the bottom level, no coherence, field amplitude ``b``."""
        return cls(0.0, 0.0, float(n_atoms), b=complex(b))

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x)
        return cls(float(x[NA].real), float(x[NB].real), float(x[NC].real),
                   complex(x[MA]), complex(x[M]), complex(x[B]),
                   float(x[MDM].real), float(x[MADMA].real))

    def to_vector(self):
        return np.array([self.na, self.nb, self.nc, self.ma, self.m, self.b,
                         self.mdm, self.madma], dtype=complex)

    @property
    def populations(self):
        return Populations(self.na, self.nb, self.nc)

    def validate(self):
        vals = self.to_vector()
        if not np.all(np.isfinite(vals)):
            raise LaserLabError("moment state contains non-finite values")
        if min(self.na, self.nb, self.nc) < 0:
            raise LaserLabError("populations must be non-negative")
        if self.mdm < 0 or self.madma < 0:
            raise LaserLabError("second moments must be non-negative")


@dataclass
class Trajectory:
    """Sampled solution; ``data[i]`` is the state vector at ``times[i]``."""

    times: np.ndarray
    data: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return MomentState.from_vector(self.data[i])

    @property
    def states(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self):
        return self.state(-1)

    def column(self, name):
        idx = {"na": NA, "nb": NB, "nc": NC, "ma": MA, "m": M, "b": B,
               "mdm": MDM, "madma": MADMA}[name]
        col = self.data[:, idx]
        return col if idx in (MA, M, B) else col.real

    def rows(self):
        """Rows in CSV column order."""
        d = self.data
        for t, x in zip(self.times, d):
            yield (t, x[NA].real, x[NB].real, x[NC].real,
                   x[MA].real, x[MA].imag, x[M].real, x[M].imag,
                   x[B].real, x[B].imag, x[MDM].real, x[MADMA].real)


def moment_system(params):
    """Return the drift matrix ``A`` and constant source ``s``."""
    gc, ra, mu = params.gamma_c, params.pump_rate, params.mu
    n = params.n_atoms
    a = np.zeros((STATE_SIZE, STATE_SIZE))
    a[NA, NA], a[NA, NC] = -gc, ra
    a[NB, NB], a[NB, NA] = -gc, gc
    a[NC, NB], a[NC, NC] = gc, -ra
    a[MA, MA] = -0.5 * mu
    a[M, M], a[M, MA] = -0.5 * mu, 0.5 * mu
    a[B, B], a[B, M] = -0.5 * params.kappa, params.collective_coupling
    a[MADMA, MADMA] = -mu
    a[MDM, MDM], a[MDM, MADMA] = -mu, mu
    s = np.zeros(STATE_SIZE)
    s[MADMA] = s[MDM] = ra * n * n
    return a, s


def rk4_step(f, t, y, h):
    """One classical Runge-Kutta step of ``dy/dt = f(t, y)``."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_propagator(a, s, h):
    """Affine map ``y -> P y + c`` equal to one RK4 step of ``y' = a y + s``.

    For a linear autonomous system the four stages collapse to the Taylor
    polynomial of ``exp(h a)`` truncated at fourth order.
    """
    z = h * np.asarray(a, dtype=float)
    eye = np.eye(z.shape[0])
    z2 = z @ z
    z3 = z2 @ z
    prop = eye + z + z2 / 2.0 + z3 / 6.0 + (z3 @ z) / 24.0
    shift = h * ((eye + z / 2.0 + z2 / 6.0 + z3 / 24.0) @ np.asarray(s))
    return prop, shift


def _conserving(mat):
    # RK4 conserves na + nb + nc exactly; restore the unit column sums of the
    # population block that roundoff breaks, otherwise the total drifts
    # linearly with the step count
    pop = slice(NA, NC + 1)
    for j in range(NA, NC + 1):
        mat[j, j] = 1.0 - (mat[pop, j].sum() - mat[j, j])
    return mat


def default_dt(params):
    return 0.01 / params.max_rate()


def _integrate(params, x0, t_end, dt, sample_every, method_tag):
    if not dt > 0:
        raise LaserLabError(f"dt must be > 0, got {dt!r}")
    if not t_end >= dt:
        raise LaserLabError(f"t_end must be >= dt, got t_end={t_end!r}, dt={dt!r}")
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / n_steps
    if sample_every is None:
        sample_every = max(1, math.ceil(n_steps / DEFAULT_MAX_SAMPLES))
    a, s = moment_system(params)
    prop, shift = rk4_propagator(a, s, h)
    # homogeneous form: one RK4 step is a single matrix product, and
    # `stride` steps are its matrix power
    step_map = np.eye(STATE_SIZE + 1)
    step_map[:STATE_SIZE, :STATE_SIZE] = prop
    step_map[:STATE_SIZE, STATE_SIZE] = shift

    idx = list(range(0, n_steps + 1, sample_every))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    out = np.empty((len(idx), STATE_SIZE), dtype=complex)
    out[0] = x0
    y = np.append(np.asarray(x0, dtype=complex), 1.0)
    powers = {}
    for k in range(1, len(idx)):
        stride = idx[k] - idx[k - 1]
        if stride not in powers:
            powers[stride] = _conserving(np.linalg.matrix_power(step_map, stride))
        y = powers[stride] @ y
        if not np.all(np.isfinite(y)):
            raise DivergenceError("non-finite moment state", time=idx[k] * h)
        out[k] = y[:STATE_SIZE]
    times = np.array(idx, dtype=float) * h
    meta = {"method": method_tag, "dt": h, "n_steps": n_steps,
            "params_hash": params.digest()}
    return Trajectory(times, out, meta)


def evolve_moments(params, init=None, t_end=None, dt=None, sample_every=None):
    """Integrate the moment equations from ``init`` up to ``t_end``.

    Parameters
    ----------
    params : LaserParams
    init : MomentState, optional
        Defaults to all atoms in the bottom level with a vacuum field.
    t_end : float, optional
        Defaults to ``400 / min(gamma_c, r_a)``.
    dt : float, optional
        Step size; defaults to ``0.01 / max(kappa, mu, gamma_c, r_a)``.
        The step actually used is ``t_end / ceil(t_end / dt)``.
    sample_every : int, optional
        Store every ``sample_every``-th step (the final step is always
        stored). By default at most about 10k samples are kept.

    Returns
    -------
    Trajectory
    """
    if init is None:
        init = MomentState.bottom(params.n_atoms)
    init.validate()
    if t_end is None:
        t_end = 400.0 / min(params.gamma_c, params.pump_rate)
    if dt is None:
        dt = default_dt(params)
    return _integrate(params, init.to_vector(), t_end, dt, sample_every, "rk4")


def mean_field_trace(params, b0, t_end, dt, sample_every=None):
    """Field mean with zero atomic coherence, which decays as ``b0 exp(-kappa t/2)``."""
    init = MomentState.bottom(params.n_atoms, b=b0)
    return evolve_moments(params, init, t_end, dt, sample_every)


def exact_mean_field(params, b0, t):
    return complex(b0) * np.exp(-0.5 * params.kappa * np.asarray(t))


def rate_matrix(params):
    """Per-level population rate matrix ``Q`` with ``dn/dt = Q n``."""
    gc, ra = params.gamma_c, params.pump_rate
    return np.array([[-gc, 0.0, ra],
                     [gc, -gc, 0.0],
                     [0.0, gc, -ra]])


def steady_state_solve(params):
    """Direct linear solve of the stationary rate equations.

    The last rate equation is replaced by the completeness condition
    ``na + nb + nc = N``.

    Returns
    -------
    (Populations, mdm_ss, madma_ss)
    """
    q = rate_matrix(params)
    q[2] = 1.0
    rhs = np.array([0.0, 0.0, float(params.n_atoms)])
    try:
        pops = np.linalg.solve(q, rhs)
    except np.linalg.LinAlgError as exc:
        raise LaserLabError(f"singular steady-state system: {exc}") from exc
    n2 = float(params.n_atoms) ** 2
    madma = params.pump_rate * n2 / params.mu
    mdm = madma + params.pump_rate * n2 / params.mu
    return Populations(*pops), mdm, madma


def relaxation_time(params):
    """Slowest decay time of the moment system."""
    a, _ = moment_system(params)
    rates = -np.linalg.eigvals(a).real
    return 1.0 / rates[rates > 1e-12 * params.max_rate()].min()


def run_to_steady_state(params, init=None, dt=None, t_max=None, rtol=1e-10):
    """Integrate until the relative state change over one relaxation time
    drops below ``rtol``, or until ``t_max``.

    Returns the final :class:`MomentState` and the time reached.
    """
    if init is None:
        init = MomentState.bottom(params.n_atoms)
    tau = relaxation_time(params)
    if t_max is None:
        t_max = 400.0 * tau
    if dt is None:
        dt = default_dt(params)
    dt = min(dt, tau)
    x = init.to_vector()
    t = 0.0
    while t < t_max:
        span = min(tau, t_max - t)
        traj = _integrate(params, x, span, min(dt, span), _endpoint_stride(span, dt), "rk4")
        x_new = traj.data[-1]
        t += span
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-300)
        x = x_new
        if change < rtol:
            break
    return MomentState.from_vector(x), t


def _endpoint_stride(span, dt):
    # stride that stores only the start and end points
    return max(1, math.ceil(span / dt - 1e-9))
