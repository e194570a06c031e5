"""Closed-form steady-state photon statistics and quadrature squeezing.

Every quantity is written in terms of ``eta = gamma_c / r_a`` and the ratio
``gamma_c / kappa``; the atom number enters linearly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvariantViolation

#: relative agreement required between the two photon-variance forms
VARIANCE_IDENTITY_RTOL = 1e-12


@dataclass(frozen=True)
class Populations:
    """Mean level occupations: top ``na``, middle ``nb``, bottom ``nc``."""

    na: float
    nb: float
    nc: float

    @property
    def total(self):
        return self.na + self.nb + self.nc

    def fractions(self):
        t = self.total
        return (self.na / t, self.nb / t, self.nc / t)

    def as_tuple(self):
        return (self.na, self.nb, self.nc)


@dataclass(frozen=True)
class StatisticsReport:
    populations: Populations
    mc: float
    nbar: float
    nvar: float
    bbdag: float
    b2: float
    var_plus: float
    var_minus: float
    var_coherent: float
    squeezing: float
    squeezing_out: float
    commutator: float
    uncertainty_bound: float

    def to_dict(self):
        d = asdict(self)
        d["populations"] = asdict(self.populations)
        return d


def steady_populations(params):
    n = params.n_atoms
    na = n / (params.eta + 2.0)
    return Populations(na, na, params.eta * na)


def coherence_mc(params):
    """Steady-state ``<m_c>``, equal to ``sqrt(<N_a><N_c>)``.

    Taken real and non-negative.
    """
    return math.sqrt(params.eta) * steady_populations(params).na


def mean_photon_number(params):
    p = steady_populations(params)
    return params.coupling_ratio * (p.na + p.nb)


def antinormal_moment(params):
    """``<b b^dagger>`` of the cavity mode."""
    p = steady_populations(params)
    return params.coupling_ratio * (p.nb + p.nc)


def anomalous_moment(params):
    """``<b^2>`` (real with the chosen phase convention)."""
    return params.coupling_ratio * coherence_mc(params)


def photon_variance_closed_form(params):
    nbar = mean_photon_number(params)
    return 0.25 * nbar**2 * (3.0 * params.eta + 2.0)


def photon_variance(params):
    """Photon-number variance of the cavity light.

    Evaluated from the Gaussian factorisation ``nbar <b b+> + <b^2>^2`` and
    checked against the closed form ``nbar^2 (3 eta + 2) / 4``.

    Raises
    ------
    InvariantViolation
        If the two forms differ by more than ``VARIANCE_IDENTITY_RTOL``.
    """
    nbar = mean_photon_number(params)
    b2 = anomalous_moment(params)
    assembled = nbar * antinormal_moment(params) + b2 * b2
    closed = photon_variance_closed_form(params)
    if abs(assembled - closed) > VARIANCE_IDENTITY_RTOL * abs(closed):
        raise InvariantViolation(
            f"photon variance forms disagree: {assembled!r} vs {closed!r}")
    return assembled


def coherent_reference_variance(params):
    return params.coupling_ratio * params.n_atoms


def quadrature_variances(params):
    """Return ``(var_plus, var_minus)`` of the quadratures ``b+ + b`` and
    ``i(b+ - b)``."""
    na = steady_populations(params).na
    cross = 2.0 * math.sqrt(params.eta) * na
    base = params.n_atoms + na
    r = params.coupling_ratio
    return r * (base + cross), r * (base - cross)


def squeezing_from_eta(eta):
    return (2.0 * math.sqrt(eta) - 1.0) / (eta + 2.0)


def quadrature_squeezing(params):
    """Return ``(S, S_out)``; the output-light squeezing equals the cavity one."""
    s = squeezing_from_eta(params.eta)
    return s, s


def quantum_diagnostics(params):
    """Return ``(commutator, bound, product)``.

    ``commutator`` is ``<[b, b+]>``, ``bound`` the right-hand side of the
    quadrature uncertainty relation and ``product`` is
    ``Delta b+ * Delta b-``.
    """
    p = steady_populations(params)
    r = params.coupling_ratio
    commutator = r * (p.nc - p.na)
    bound = r * abs(p.na - p.nc)
    vp, vm = quadrature_variances(params)
    return commutator, bound, math.sqrt(vp * vm)


def statistics_report(params):
    pops = steady_populations(params)
    vp, vm = quadrature_variances(params)
    s, s_out = quadrature_squeezing(params)
    commutator, bound, _ = quantum_diagnostics(params)
    return StatisticsReport(
        populations=pops,
        mc=coherence_mc(params),
        nbar=mean_photon_number(params),
        nvar=photon_variance(params),
        bbdag=antinormal_moment(params),
        b2=anomalous_moment(params),
        var_plus=vp,
        var_minus=vm,
        var_coherent=coherent_reference_variance(params),
        squeezing=s,
        squeezing_out=s_out,
        commutator=commutator,
        uncertainty_bound=bound,
    )
