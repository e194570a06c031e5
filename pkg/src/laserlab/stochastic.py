"""Monte Carlo engines for the pumped three-level laser.

* :func:`gillespie_populations` - exact event-driven simulation of N
  independent three-state atoms (a -> b -> c at rate gamma_c, c -> a at the
  pump rate), aggregated by level counts.
* :func:`langevin_ensemble` - Euler-Maruyama ensemble of the collective
  coherences ``m_a`` and ``m`` driven by complex white noise, with the field
  slaved to ``m``.
* :func:`two_time_correlation` - stationary ``<b*(t) b(t+tau)>`` with the
  field integrated alongside ``m``.
* :func:`drift_regression` - checks the second-moment drift law of ``m``
  on ensemble data.

Trajectory ensembles are split into fixed-size chunks; chunk ``k`` draws
from stream ``k`` of the seed, so results do not depend on how chunks are
scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analytic
from .errors import ConfigError, DivergenceError
from .spectral import correlation_envelope
from .streams import rng_metadata, stream

#: trajectories per random stream
CHUNK_SIZE = 1000
#: Euler-Maruyama step cap as a fraction of min(2/mu, 2/kappa)
DT_CAP_FRACTION = 0.05
MIN_BATCHES = 20


@dataclass(frozen=True)
class EnsembleEstimate:
    """Monte Carlo mean with its standard error.

    ``effective_samples`` is the number of independent draws that would give
    the same standard error, ``var / std_error**2``.
    """

    mean: complex | float
    std_error: float
    n_samples: int
    effective_samples: float

    @classmethod
    def from_samples(cls, values, point_variance=None):
        """Estimate from independent per-unit values (trajectories, batches).

        ``point_variance`` is the variance of a single raw observation, used
        only for ``effective_samples``.
        """
        values = np.asarray(values)
        n = values.size
        if n < 2:
            raise ConfigError("need at least two independent samples")
        mean = values.mean()
        var = float(np.mean(np.abs(values - mean) ** 2)) * n / (n - 1)
        se = math.sqrt(var / n)
        if point_variance is None:
            point_variance = var
        eff = point_variance / se**2 if se > 0 else float(n)
        mean = complex(mean) if np.iscomplexobj(values) else float(mean)
        return cls(mean, se, int(n), float(eff))

    def z_score(self, value):
        if self.std_error == 0:
            return 0.0 if self.mean == value else math.inf
        return abs(self.mean - value) / self.std_error

    def within(self, value, n_se=3.0):
        return self.z_score(value) <= n_se

    def scaled(self, factor):
        return EnsembleEstimate(self.mean * factor, self.std_error * abs(factor),
                                self.n_samples, self.effective_samples)

    def shifted(self, offset):
        return EnsembleEstimate(self.mean + offset, self.std_error,
                                self.n_samples, self.effective_samples)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.mean, complex):
            d["mean"] = [self.mean.real, self.mean.imag]
        return d


def estimate_record(name, est, config):
    """JSON-ready record for one estimator."""
    rec = {"estimator": name}
    rec.update(est.to_dict())
    rec["config"] = config
    return rec


# -- jump process -----------------------------------------------------------

@dataclass(frozen=True)
class JumpConfig:
    n_atoms: int
    t_end: float
    burn_in: float
    seed: int
    sample_stride: float
    n_batches: int = 40

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ConfigError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if not self.sample_stride > 0:
            raise ConfigError(f"sample_stride must be > 0, got {self.sample_stride}")
        if not 0 <= self.burn_in < self.t_end:
            raise ConfigError(
                f"need 0 <= burn_in < t_end, got burn_in={self.burn_in}, t_end={self.t_end}")
        if self.n_batches < MIN_BATCHES:
            raise ConfigError(f"n_batches must be >= {MIN_BATCHES}")


@dataclass
class GillespieResult:
    populations: analytic.Populations
    estimates: tuple
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    n_events: int
    config: JumpConfig
    metadata: dict = field(default_factory=dict)

    @property
    def fractions(self):
        n = self.config.n_atoms
        return tuple(e.scaled(1.0 / n) for e in self.estimates)


def gillespie_populations(params, cfg):
    """Simulate the atomic level populations as a continuous-time Markov chain.

    Every atom starts in the bottom level. Occupancies are time-averaged over
    ``[burn_in, t_end]``; standard errors come from ``cfg.n_batches`` equal
    time batches (batch means).

    Returns
    -------
    GillespieResult
        ``populations`` holds the time-averaged counts and ``estimates`` one
        :class:`EnsembleEstimate` per level (top, middle, bottom).
    """
    if cfg.n_atoms != params.n_atoms:
        raise ConfigError(
            f"config n_atoms={cfg.n_atoms} differs from params n_atoms={params.n_atoms}")
    rng = stream(cfg.seed, 0)
    gc, ra = params.gamma_c, params.pump_rate
    t_end, burn = cfg.t_end, cfg.burn_in
    nbat = cfg.n_batches
    width = (t_end - burn) / nbat
    edges = [burn + width * i for i in range(nbat)] + [t_end]
    acc = [[0.0, 0.0, 0.0] for _ in range(nbat)]

    na, nb, nc = 0, 0, cfg.n_atoms
    t = 0.0
    batch = 0
    n_events = 0
    snap_t = []
    snap = []
    next_snap = 0.0
    stride = cfg.sample_stride

    block = 1 << 16
    exps = rng.standard_exponential(block)
    unis = rng.random(block)
    j = 0
    while True:
        r1 = gc * na
        r2 = gc * nb
        total = r1 + r2 + ra * nc
        t_next = t + exps[j] / total
        u = unis[j] * total
        j += 1
        if j == block:
            exps = rng.standard_exponential(block)
            unis = rng.random(block)
            j = 0

        while next_snap <= t_next and next_snap <= t_end:
            snap_t.append(next_snap)
            snap.append((na, nb, nc))
            next_snap += stride

        lo = t if t > burn else burn
        hi = t_next if t_next < t_end else t_end
        while lo < hi:
            seg = edges[batch + 1]
            if hi < seg:
                seg = hi
            d = seg - lo
            row = acc[batch]
            row[0] += na * d
            row[1] += nb * d
            row[2] += nc * d
            if seg >= edges[batch + 1] and batch < nbat - 1:
                batch += 1
            lo = seg
        if t_next >= t_end:
            break

        if u < r1:
            na -= 1
            nb += 1
        elif u < r1 + r2:
            nb -= 1
            nc += 1
        else:
            nc -= 1
            na += 1
        t = t_next
        n_events += 1

    batch_means = np.array(acc) / width
    snapshots = np.array(snap, dtype=float).reshape(-1, 3)
    snap_times = np.array(snap_t)
    in_window = snap_times >= burn
    estimates = []
    for level in range(3):
        point_var = None
        if in_window.sum() > 1:
            point_var = float(np.var(snapshots[in_window, level], ddof=1))
        estimates.append(EnsembleEstimate.from_samples(batch_means[:, level], point_var))
    pops = analytic.Populations(*(e.mean for e in estimates))
    meta = {"params": params.to_dict(), "config": asdict(cfg),
            "rng": rng_metadata(cfg.seed), "n_events": n_events,
            "estimator": "time average with batch means"}
    return GillespieResult(pops, tuple(estimates), snap_times, snapshots,
                           n_events, cfg, meta)


# -- Langevin ensembles -----------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Normally ordered white-noise strengths of the coherence equations.

    ``E[dW_a* dW_a] = d_aa dt``, ``E[dW_m* dW_m] = d_mm dt`` and
    ``E[dW_a* dW_m] = d_am dt``.
    """

    d_aa: float
    d_mm: float
    d_am: float
    phase_sensitive: bool = False

    def __post_init__(self):
        if self.d_aa < 0 or self.d_mm < 0:
            raise ConfigError("noise strengths must be non-negative")
        if self.d_am**2 > self.d_aa * self.d_mm * (1 + 1e-12):
            raise ConfigError("noise covariance is not positive semi-definite")
        if self.phase_sensitive:
            raise ConfigError("phase-sensitive noise is not implemented; "
                              "phase-sensitive moments are available analytically")

    @classmethod
    def for_params(cls, params):
        """Pump-noise strengths ``r_a N**2`` with the cross strength that
        reproduces the ``<m+ m>`` drift law, ``r_a N**2 / 2``."""
        d = params.pump_rate * float(params.n_atoms) ** 2
        return cls(d, d, 0.5 * d)

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0)

    def mixing(self):
        """Lower-triangular ``L`` with ``L L^T`` equal to the 2x2 covariance."""
        l11 = math.sqrt(self.d_aa)
        l21 = self.d_am / l11 if l11 > 0 else 0.0
        l22 = math.sqrt(max(self.d_mm - l21 * l21, 0.0))
        return np.array([[l11, 0.0], [l21, l22]])


def max_langevin_dt(params):
    return DT_CAP_FRACTION * min(2.0 / params.mu, 2.0 / params.kappa)


def _check_dt(params, dt):
    cap = max_langevin_dt(params)
    if not 0 < dt <= cap * (1 + 1e-12):
        raise ConfigError(f"dt={dt!r} must lie in (0, {cap!r}]")


def _complex_noise(rng, mix, n, scale):
    """Return correlated complex increments (dW_a, dW_m) of size ``n``."""
    xi = rng.standard_normal((2, 2, n))
    re = mix @ xi[0]
    im = mix @ xi[1]
    return scale * (re[0] + 1j * im[0]), scale * (re[1] + 1j * im[1])


def _run_chunks(worker, n_traj, seed, n_workers):
    sizes = [min(CHUNK_SIZE, n_traj - k) for k in range(0, n_traj, CHUNK_SIZE)]
    jobs = [(k, size) for k, size in enumerate(sizes)]
    if n_workers and n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(lambda job: worker(stream(seed, job[0]), job[1]), jobs))
    else:
        parts = [worker(stream(seed, k), size) for k, size in jobs]
    return parts


def _steps(t, dt):
    return int(round(t / dt))


@dataclass
class LangevinResult:
    estimates: dict
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.estimates[key]

    def records(self):
        cfg = self.metadata.get("config", {})
        return [estimate_record(k, v, cfg) for k, v in self.estimates.items()]


def langevin_ensemble(params, n_traj, t_end, dt, seed, burn_in=None,
                      noise=None, sample_every=10, n_workers=None):
    """Ensemble of Langevin trajectories for the collective coherences.

    Integrates, by Euler-Maruyama from ``m_a = m = 0``,

        dm_a = -(mu/2) m_a dt + dW_a
        dm   = -(mu/2) m dt + (mu/2) m_a dt + dW_m

    and slaves the field to ``b = 2 g / (kappa sqrt(N)) m``. Each trajectory
    is time-averaged over ``[burn_in, t_end]`` (every ``sample_every``-th
    step); estimates are means over trajectories.

    Returns
    -------
    LangevinResult
        Estimators ``mdm`` (<m+ m>), ``madma``, ``bdb`` (<b+ b>),
        ``bbdag_proxy`` (<b+ b> plus the analytic commutator), ``m`` and
        ``ma`` (first moments).
    """
    _check_dt(params, dt)
    if n_traj < 2:
        raise ConfigError(f"n_traj must be >= 2, got {n_traj}")
    if burn_in is None:
        burn_in = 25.0 / params.mu
    if not 0 <= burn_in < t_end:
        raise ConfigError(f"need 0 <= burn_in < t_end, got {burn_in}, {t_end}")
    if noise is None:
        noise = NoiseModel.for_params(params)
    mix = noise.mixing()
    half_mu = 0.5 * params.mu
    n_steps = _steps(t_end, dt)
    first = _steps(burn_in, dt)
    scale = math.sqrt(dt / 2.0)

    def worker(rng, n):
        a = np.zeros(n, dtype=complex)
        m = np.zeros(n, dtype=complex)
        sums = {k: np.zeros(n) for k in ("mdm", "madma")}
        first_m = np.zeros(n, dtype=complex)
        first_a = np.zeros(n, dtype=complex)
        pooled = {"mdm": [0.0, 0.0], "madma": [0.0, 0.0]}
        count = 0
        for step in range(1, n_steps + 1):
            dwa, dwm = _complex_noise(rng, mix, n, scale)
            m = m + (half_mu * (a - m)) * dt + dwm
            a = a - (half_mu * dt) * a + dwa
            if step >= first and (step - first) % sample_every == 0:
                mm = m.real**2 + m.imag**2
                aa = a.real**2 + a.imag**2
                sums["mdm"] += mm
                sums["madma"] += aa
                first_m += m
                first_a += a
                for key, v in (("mdm", mm), ("madma", aa)):
                    pooled[key][0] += v.sum()
                    pooled[key][1] += (v * v).sum()
                count += 1
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(a))):
            raise DivergenceError("non-finite Langevin trajectory", time=t_end)
        avg = {k: v / count for k, v in sums.items()}
        avg["m"] = first_m / count
        avg["ma"] = first_a / count
        return avg, pooled, count * n

    parts = _run_chunks(worker, n_traj, seed, n_workers)
    per_traj = {k: np.concatenate([p[0][k] for p in parts]) for k in parts[0][0]}
    n_points = sum(p[2] for p in parts)
    point_var = {}
    for key in ("mdm", "madma"):
        s1 = sum(p[1][key][0] for p in parts)
        s2 = sum(p[1][key][1] for p in parts)
        point_var[key] = s2 / n_points - (s1 / n_points) ** 2

    est = {k: EnsembleEstimate.from_samples(per_traj[k], point_var.get(k))
           for k in ("mdm", "madma", "m", "ma")}
    field_scale = (2.0 * params.g / (params.kappa * math.sqrt(params.n_atoms))) ** 2
    est["bdb"] = est["mdm"].scaled(field_scale)
    commutator, _, _ = analytic.quantum_diagnostics(params)
    est["bbdag_proxy"] = est["bdb"].shifted(commutator)
    config = {"n_traj": n_traj, "t_end": t_end, "dt": dt, "burn_in": burn_in,
              "sample_every": sample_every, "seed": seed,
              "noise": asdict(noise), "chunk_size": CHUNK_SIZE}
    meta = {"params": params.to_dict(), "config": config, "rng": rng_metadata(seed),
            "method": "euler-maruyama"}
    return LangevinResult(est, meta)


@dataclass
class CorrelationResult:
    tau: np.ndarray
    estimates: list
    model: np.ndarray
    deviation: np.ndarray
    bdb_ss: float
    bdb_slaved: float
    metadata: dict = field(default_factory=dict)

    def max_deviation(self):
        return float(np.max(self.deviation))

    def rows(self):
        for tau, est, mod, dev in zip(self.tau, self.estimates, self.model, self.deviation):
            yield (tau, est.mean.real, est.mean.imag, est.std_error, mod, dev)


def cointegrated_field_intensity(params):
    """Stationary ``<b+ b>`` when the field is integrated alongside ``m``.

    Equals the slaved value times ``kappa / (kappa + mu)``; the two agree when
    the cavity decays much faster than the coherence.
    """
    return analytic.mean_photon_number(params) * params.kappa / (params.kappa + params.mu)


def two_time_correlation(params, n_traj, t_anchor, tau_grid, dt, seed,
                         n_anchors=1, anchor_spacing=None, n_workers=None):
    """Stationary two-time field correlation ``<b*(t) b(t + tau)>``.

    The coherence follows the large-time form of its equation, with the top
    level coherence eliminated: ``dm = -(mu/2) m dt + dW_a + dW_m`` with
    independent pump noises of strength ``r_a N**2`` each. The field is
    integrated alongside, ``db = -(kappa/2) b dt + (g/sqrt(N)) m dt``.

    The estimate at each lag is compared with
    ``bdb_ss * envelope(tau)`` where ``bdb_ss`` is the stationary intensity
    of this co-integrated field.

    Parameters
    ----------
    t_anchor : float
        First anchor time; must be at least ``10 / min(mu, kappa)``.
    tau_grid : sequence of float
        Non-negative, strictly increasing lags.
    n_anchors : int
        Anchors per trajectory, ``anchor_spacing`` apart (default: the
        largest lag plus ``2 / mu``). Anchor products are averaged per
        trajectory before the ensemble statistics.
    """
    _check_dt(params, dt)
    if n_traj < 2:
        raise ConfigError(f"n_traj must be >= 2, got {n_traj}")
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or np.any(tau < 0) or np.any(np.diff(tau) <= 0):
        raise ConfigError("tau_grid must be non-negative and strictly increasing")
    min_anchor = 10.0 / min(params.mu, params.kappa)
    if t_anchor < min_anchor * (1 - 1e-12):
        raise ConfigError(f"t_anchor must be >= {min_anchor!r} (burn-in)")
    if anchor_spacing is None:
        anchor_spacing = tau[-1] + 2.0 / params.mu
    lag_steps = np.array([_steps(x, dt) for x in tau])
    anchor_steps = [_steps(t_anchor + k * anchor_spacing, dt) for k in range(n_anchors)]
    targets = {}
    for ai, s0 in enumerate(anchor_steps):
        for li, ls in enumerate(lag_steps):
            targets.setdefault(s0 + ls, []).append((ai, li))
    anchor_at = {s0: ai for ai, s0 in enumerate(anchor_steps)}
    n_steps = max(targets)

    d = params.pump_rate * float(params.n_atoms) ** 2
    drive = math.sqrt(2.0 * d)
    scale = math.sqrt(dt / 2.0)
    half_mu = 0.5 * params.mu
    half_kappa = 0.5 * params.kappa
    coupling = params.collective_coupling

    def worker(rng, n):
        m = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        anchors = np.zeros((n_anchors, n), dtype=complex)
        acc = np.zeros((len(tau), n), dtype=complex)
        for step in range(1, n_steps + 1):
            xi = rng.standard_normal((2, n))
            b = b + (coupling * m - half_kappa * b) * dt
            m = m - (half_mu * dt) * m + (drive * scale) * (xi[0] + 1j * xi[1])
            if step in anchor_at:
                anchors[anchor_at[step]] = b
            hits = targets.get(step)
            if hits:
                for ai, li in hits:
                    acc[li] += np.conj(anchors[ai]) * b
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise DivergenceError("non-finite correlation trajectory", time=n_steps * dt)
        return acc / n_anchors

    parts = _run_chunks(worker, n_traj, seed, n_workers)
    per_traj = np.concatenate(parts, axis=1)
    estimates = [EnsembleEstimate.from_samples(row) for row in per_traj]
    bdb_ss = cointegrated_field_intensity(params)
    model = bdb_ss * correlation_envelope(params.kappa, params.mu, tau)
    dev = np.array([e.z_score(v) for e, v in zip(estimates, model)])
    config = {"n_traj": n_traj, "t_anchor": t_anchor, "tau_grid": tau.tolist(),
              "dt": dt, "seed": seed, "n_anchors": n_anchors,
              "anchor_spacing": anchor_spacing, "chunk_size": CHUNK_SIZE}
    meta = {"params": params.to_dict(), "config": config, "rng": rng_metadata(seed),
            "method": "euler-maruyama, field co-integrated"}
    return CorrelationResult(tau, estimates, model, dev, bdb_ss,
                             analytic.mean_photon_number(params), meta)


@dataclass
class DriftCheck:
    """Finite-difference drift of ``<m+ m>`` against the moment law.

    ``observed[k]`` is the ensemble change of ``<m+ m>`` over window ``k``
    divided by its length, ``law[k]`` the window average of
    ``-mu <m+ m> + mu <m_a+ m_a> + d_mm``; ``std_error[k]`` is the standard
    error of their difference.
    """

    t_edges: np.ndarray
    observed: np.ndarray
    law: np.ndarray
    std_error: np.ndarray
    total: EnsembleEstimate

    @property
    def z_scores(self):
        return np.abs(self.observed - self.law) / self.std_error

    def passed(self, n_se=3.0):
        return bool(np.all(self.z_scores <= n_se) and self.total.within(0.0, n_se))


def drift_regression(params, n_traj, t_end, dt, seed, noise=None, n_windows=8,
                     n_workers=None):
    """Check ``d<m+ m>/dt = -mu <m+ m> + mu <m_a+ m_a> + r_a N**2`` on an ensemble.

    ``m_a`` starts in its stationary distribution and ``m = m_a``, so the law
    holds at every instant exactly when the noise cross strength is right;
    the ensemble relaxes ``<m+ m>`` from ``<m_a+ m_a>`` towards its stationary
    value, giving a non-zero drift to test. Per trajectory, the change of
    ``|m|**2`` across each window minus the integral of the law is an
    independent residual with mean zero under the law.
    """
    _check_dt(params, dt)
    if n_traj < 2:
        raise ConfigError(f"n_traj must be >= 2, got {n_traj}")
    if noise is None:
        noise = NoiseModel.for_params(params)
    mix = noise.mixing()
    mu = params.mu
    half_mu = 0.5 * mu
    n_steps = _steps(t_end, dt)
    per = max(1, n_steps // n_windows)
    edges = [per * k for k in range(n_windows + 1)]
    scale = math.sqrt(dt / 2.0)
    sd_a = math.sqrt(noise.d_aa / mu / 2.0)
    d_mm = noise.d_mm

    def worker(rng, n):
        a = sd_a * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        m = a.copy()
        resid = np.zeros((n_windows, n))
        law_int = np.zeros((n_windows, n))
        start_mm = np.abs(m) ** 2
        w = 0
        for step in range(1, edges[-1] + 1):
            mm = m.real**2 + m.imag**2
            aa = a.real**2 + a.imag**2
            # left-point rule, matching the Euler-Maruyama increment
            law_int[w] += (-mu * mm + mu * aa + d_mm) * dt
            dwa, dwm = _complex_noise(rng, mix, n, scale)
            m = m + (half_mu * (a - m)) * dt + dwm
            a = a - (half_mu * dt) * a + dwa
            if step == edges[w + 1]:
                end_mm = m.real**2 + m.imag**2
                resid[w] = (end_mm - start_mm) - law_int[w]
                start_mm = end_mm
                w += 1
        return resid, law_int

    parts = _run_chunks(worker, n_traj, seed, n_workers)
    resid = np.concatenate([p[0] for p in parts], axis=1)
    law_int = np.concatenate([p[1] for p in parts], axis=1)
    span = per * dt
    law = law_int.mean(axis=1) / span
    observed = law + resid.mean(axis=1) / span
    se = resid.std(axis=1, ddof=1) / math.sqrt(resid.shape[1]) / span
    total = EnsembleEstimate.from_samples(resid.sum(axis=0) / (span * n_windows))
    t_edges = np.array(edges, dtype=float) * dt
    return DriftCheck(t_edges, observed, law, se, total)
