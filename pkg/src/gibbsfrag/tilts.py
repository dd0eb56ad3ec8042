"""Unit-mean tilts h of the positive stable law, each selecting one Poisson-Kingman
family member.  ``h`` is evaluated in log space to survive extreme arguments."""

import math

import numpy as np

from . import special
from .errors import DomainError

LABELS = ("unit", "pd_theta", "ml_lambda", "gg_zeta")


class TiltFunction:
    """A density tilt ``h(t)`` with ``E[h(T_alpha)] = 1``.

    ``sup_bound`` is the least upper bound of ``h`` when finite, else ``None``.
    """

    def __init__(self, alpha, label, params, log_eval, sup_bound):
        self.alpha = special.as_index(alpha)
        if label not in LABELS:
            raise DomainError(f"unknown tilt label {label!r}")
        self.label = label
        self.params = dict(params)
        self._log_eval = log_eval
        self.sup_bound = sup_bound

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"TiltFunction({self.label}, alpha={self.alpha}{', ' + args if args else ''})"

    def log_eval(self, t):
        return self._log_eval(np.asarray(t, dtype=float))

    def __call__(self, t):
        out = np.exp(self.log_eval(t))
        return float(out) if np.ndim(t) == 0 else out

    @property
    def bounded(self):
        return self.sup_bound is not None

    def check_normalization(self, tol=1e-6):
        """Quadrature of E[h(T_alpha)]; raises if it is not 1 within ``tol``."""
        total = special.stable_expect(self.alpha, self.__call__)
        if abs(total - 1.0) > tol:
            raise DomainError(f"{self!r} integrates to {total}, not 1")
        return total


def unit(alpha):
    return TiltFunction(alpha, "unit", {}, lambda t: np.zeros_like(t), 1.0)


def pd_theta(alpha, theta):
    """t**-theta / E[T**-theta]: the two-parameter Poisson-Dirichlet member."""
    a = special.as_index(alpha)
    if not theta > -a:
        raise DomainError("theta must exceed -alpha")
    logm = math.log(special.ml_moment_normalizer(a, theta))
    sup = 1.0 if theta == 0 else None
    return TiltFunction(a, "pd_theta", {"theta": theta},
                        lambda t: -theta * np.log(t) - logm, sup)


def ml_lambda(alpha, lam):
    """exp(-lam t**-alpha) / E_alpha(-lam): the Mittag-Leffler class."""
    a = special.as_index(alpha)
    if not lam >= 0:
        raise DomainError("lam must be nonnegative")
    loge = math.log(special.ml_function(a, lam))
    return TiltFunction(a, "ml_lambda", {"lam": lam},
                        lambda t: -lam * t ** -a - loge, math.exp(-loge))


def gg_zeta(alpha, zeta, m=0):
    """Generalized gamma tilt r^[m]: exp(zeta - zeta**(1/alpha) t), times
    zeta**(1/alpha - 1) t / alpha when m = 1."""
    a = special.as_index(alpha)
    if not zeta > 0:
        raise DomainError("zeta must be positive")
    if m not in (0, 1):
        raise DomainError("m must be 0 or 1")
    c = zeta ** (1.0 / a)
    if m == 0:
        return TiltFunction(a, "gg_zeta", {"zeta": zeta, "m": 0},
                            lambda t: zeta - c * t, math.exp(zeta))
    shift = (1.0 / a - 1.0) * math.log(zeta) - math.log(a) + zeta
    with np.errstate(divide="ignore"):
        return TiltFunction(a, "gg_zeta", {"zeta": zeta, "m": 1},
                            lambda t: shift + np.log(t) - c * t,
                            math.exp(zeta - 1.0) / (zeta * a))


def from_spec(alpha, text):
    """Parse ``unit``, ``pd_theta:0.3``, ``ml_lambda:1``, ``gg_zeta:1`` or ``gg_zeta:1:1``."""
    parts = text.split(":")
    name, vals = parts[0], [float(x) for x in parts[1:]]
    if name == "unit" and not vals:
        return unit(alpha)
    if name == "pd_theta" and len(vals) == 1:
        return pd_theta(alpha, vals[0])
    if name == "ml_lambda" and len(vals) == 1:
        return ml_lambda(alpha, vals[0])
    if name == "gg_zeta" and len(vals) in (1, 2):
        return gg_zeta(alpha, vals[0], int(vals[1]) if len(vals) == 2 else 0)
    raise DomainError(f"cannot parse tilt {text!r}")
