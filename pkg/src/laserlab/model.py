"""Laser parameters, derived rate constants and operating regime.

All rates share one inverse-time unit chosen by the caller.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import numbers
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

PARAM_KEYS = ("g", "kappa", "pump_rate", "n_atoms")

#: relative band around eta == 1 treated as threshold
DEFAULT_THRESHOLD_TOL = 1e-12


class Regime(enum.Enum):
    ABOVE_THRESHOLD = "AboveThreshold"
    AT_THRESHOLD = "AtThreshold"
    BELOW_THRESHOLD = "BelowThreshold"

    def __str__(self):
        return self.value


def _check_positive(name, value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValidationError(name, f"expected a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(name, f"must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class LaserParams:
    """Immutable parameter set of the three-level cascade laser.

    Parameters
    ----------
    g : float
        Atom-cavity coupling constant.
    kappa : float
        Cavity damping constant.
    pump_rate : float
        Per-atom bottom-to-top pump rate ``r_a``.
    n_atoms : int
        Number of three-level atoms ``N``.

    Derived attributes ``gamma_c = 4 g**2 / kappa``, ``eta = gamma_c /
    pump_rate`` and ``mu = gamma_c + 2 pump_rate`` are computed once at
    construction.
    """

    g: float
    kappa: float
    pump_rate: float
    n_atoms: int
    gamma_c: float = field(init=False)
    eta: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        _check_positive("g", self.g)
        _check_positive("kappa", self.kappa)
        _check_positive("pump_rate", self.pump_rate)
        n = self.n_atoms
        if isinstance(n, bool) or not isinstance(n, numbers.Integral):
            if isinstance(n, float) and n.is_integer():
                n = int(n)
            else:
                raise ValidationError("n_atoms", f"expected an integer, got {n!r}")
        if n < 1:
            raise ValidationError("n_atoms", f"must be >= 1, got {n!r}")
        gamma_c = 4.0 * self.g**2 / self.kappa
        object.__setattr__(self, "n_atoms", int(n))
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "pump_rate", float(self.pump_rate))
        object.__setattr__(self, "gamma_c", gamma_c)
        object.__setattr__(self, "eta", gamma_c / self.pump_rate)
        object.__setattr__(self, "mu", gamma_c + 2.0 * self.pump_rate)

    @classmethod
    def from_eta(cls, eta, *, g=1.0, kappa=16.0, n_atoms=100):
        """Build parameters hitting a target ``eta`` by choosing the pump rate."""
        _check_positive("eta", eta)
        return cls(g, kappa, 4.0 * g**2 / kappa / eta, n_atoms)

    @property
    def coupling_ratio(self):
        """``gamma_c / kappa``, the photon-per-atom scale of every moment."""
        return self.gamma_c / self.kappa

    @property
    def collective_coupling(self):
        """Coupling of the field to the collective coherence, ``g / sqrt(N)``.

        The + sign is used; every squeezing quantity is sign independent.
        """
        return self.g / math.sqrt(self.n_atoms)

    def max_rate(self):
        return max(self.kappa, self.mu, self.gamma_c, self.pump_rate)

    def to_dict(self):
        return {k: getattr(self, k) for k in PARAM_KEYS}

    def derived_dict(self):
        return {"gamma_c": self.gamma_c, "eta": self.eta, "mu": self.mu}

    def digest(self):
        """Short stable hash of the inputs, used in trajectory metadata."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def derive_params(g, kappa, pump_rate, n_atoms):
    """Validate inputs and return a :class:`LaserParams`."""
    return LaserParams(g, kappa, pump_rate, n_atoms)


def classify_regime(params, tol=DEFAULT_THRESHOLD_TOL):
    """Classify the operating regime from ``eta``.

    ``|eta - 1| <= tol`` is threshold; smaller ``eta`` (more atoms on top than
    at the bottom) is above threshold, larger ``eta`` is below threshold.
    """
    if tol < 0:
        raise ValidationError("tol", f"must be >= 0, got {tol!r}")
    eta = params.eta
    if abs(eta - 1.0) <= tol:
        return Regime.AT_THRESHOLD
    return Regime.ABOVE_THRESHOLD if eta < 1.0 else Regime.BELOW_THRESHOLD


def params_from_mapping(data):
    """Construct parameters from a mapping holding exactly the four input keys."""
    missing = [k for k in PARAM_KEYS if k not in data]
    if missing:
        raise ValidationError(missing[0], "missing required key")
    extra = sorted(set(data) - set(PARAM_KEYS))
    if extra:
        raise ValidationError(extra[0], "unknown key")
    n = data["n_atoms"]
    if isinstance(n, float) or isinstance(n, bool):
        raise ValidationError("n_atoms", f"expected an integer, got {n!r}")
    return LaserParams(data["g"], data["kappa"], data["pump_rate"], n)


def load_params(path):
    """Read a JSON parameter document from ``path``."""
    with Path(path).open() as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValidationError("<root>", "expected a JSON object")
    return params_from_mapping(data)
