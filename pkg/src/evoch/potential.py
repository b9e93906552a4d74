"""Logarithmic (Flory-Huggins) potential and its C^2 quadratic regularization.

    F(r) = theta/2 * F_ln(r) + (1 - r^2)/2,
    F_ln(r) = (1+r) ln(1+r) + (1-r) ln(1-r).

With ``delta > 0`` the logarithmic part is replaced outside
``|r| <= 1 - delta`` by its second-order Taylor expansion at the knot, which
keeps F^delta in C^2 and makes phi_delta globally Lipschitz.  Everything here
is vectorized over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlog1py

from .errors import ConfigurationError, DomainError

SHARP_MARGIN = 1e-12


@dataclass(frozen=True)
class PotentialParams:
    theta: float
    delta: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ConfigurationError(f"theta must satisfy 0 < theta < 1, got {self.theta}")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigurationError(f"delta must satisfy 0 <= delta < 1, got {self.delta}")

    @property
    def sharp(self):
        return self.delta == 0.0

    def with_delta(self, delta):
        return PotentialParams(self.theta, delta)


def _check_domain(r, p, strict):
    if not p.sharp:
        return
    bad = np.abs(r) >= 1.0 if strict else np.abs(r) > 1.0
    if np.any(bad | ~np.isfinite(r)):
        worst = float(np.max(np.abs(r)))
        raise DomainError(f"sharp logarithmic potential evaluated at |r| = {worst!r}")


def _f_ln(r):
    # x*log1p(y) with the 0*log(0) = 0 convention at the endpoints
    return xlog1py(1.0 + r, r) + xlog1py(1.0 - r, -r)


def _branches(r, d):
    upper = r > 1.0 - d
    lower = r < -1.0 + d
    return upper, lower, ~(upper | lower)


def f_ln_delta(r, p):
    """Logarithmic part F_ln or its regularization, without the theta/2 factor."""
    r = np.asarray(r, dtype=float)
    if p.sharp:
        _check_domain(r, p, strict=False)
        return _f_ln(r)
    d = p.delta
    ld, l2 = np.log(d), np.log(2.0 - d)
    upper, lower, mid = _branches(r, d)
    out = np.empty_like(r)
    ru, rl, rm = r[upper], r[lower], r[mid]
    out[upper] = (1 - ru) * ld + (1 + ru) * l2 + (1 - ru) ** 2 / (2 * d) + (1 + ru) ** 2 / (2 * (2 - d)) - 1
    out[lower] = (1 + rl) * ld + (1 - rl) * l2 + (1 + rl) ** 2 / (2 * d) + (1 - rl) ** 2 / (2 * (2 - d)) - 1
    out[mid] = _f_ln(rm)
    return out


def F_value(r, p):
    r = np.asarray(r, dtype=float)
    return 0.5 * p.theta * f_ln_delta(r, p) + 0.5 * (1.0 - r * r)


def phi(r, p):
    """phi = F_ln' (sharp) or the derivative of the regularized logarithmic part."""
    r = np.asarray(r, dtype=float)
    if p.sharp:
        _check_domain(r, p, strict=True)
        return np.log1p(r) - np.log1p(-r)
    d = p.delta
    slope = np.log(2.0 - d) - np.log(d)
    upper, lower, mid = _branches(r, d)
    out = np.empty_like(r)
    ru, rl, rm = r[upper], r[lower], r[mid]
    out[upper] = slope - (1 - ru) / d + (1 + ru) / (2 - d)
    out[lower] = -slope + (1 + rl) / d - (1 - rl) / (2 - d)
    out[mid] = np.log1p(rm) - np.log1p(-rm)
    return out


def phi_prime(r, p):
    r = np.asarray(r, dtype=float)
    if p.sharp:
        _check_domain(r, p, strict=True)
        return 1.0 / (1.0 + r) + 1.0 / (1.0 - r)
    d = p.delta
    upper, lower, mid = _branches(r, d)
    out = np.full_like(r, 1.0 / d + 1.0 / (2.0 - d))
    rm = r[mid]
    out[mid] = 1.0 / (1.0 + rm) + 1.0 / (1.0 - rm)
    return out


def F_prime(r, p):
    r = np.asarray(r, dtype=float)
    return 0.5 * p.theta * phi(r, p) - r


def F_second(r, p):
    return 0.5 * p.theta * phi_prime(r, p) - 1.0


def newton_safeguard_region(p):
    """Interval on which iterates are evaluated without switching branches.

    Only used to damp Newton updates; solutions are never clipped to it.
    """
    if p.sharp:
        return (-1.0 + SHARP_MARGIN, 1.0 - SHARP_MARGIN)
    return (-1.0 + p.delta, 1.0 - p.delta)
