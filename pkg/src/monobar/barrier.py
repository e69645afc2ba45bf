"""Monomial barrier ``(w / mu) * sum(((x - r) / q) ** mu)`` and its derivatives.

Powers are guarded in the log domain so that exponents up to 2**40 never
overflow: any power whose logarithm exceeds ``log(SATURATION_CAP)`` is
replaced by the cap and reported through the ``saturated`` flag.
"""

from dataclasses import dataclass

import numpy as np

SATURATION_CAP = 1e300
_LOG_CAP = np.log(SATURATION_CAP)


@dataclass(frozen=True)
class ScaledBox:
    """Centers ``r`` and half-widths ``q`` of a box; ``z = (x - r) / q`` maps it onto [-1, 1]."""

    centers: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.half_widths, dtype=float)
        if np.any(q <= 0):
            raise ValueError("half-widths must be positive; remove fixed variables first")

    @classmethod
    def from_box(cls, box):
        return cls(box.center, box.half_width)

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.centers) / self.half_widths

    def from_unit(self, z):
        return self.centers + self.half_widths * np.asarray(z, dtype=float)


@dataclass(frozen=True)
class BarrierEval:
    value: float
    grad_term: np.ndarray
    hess_diag: np.ndarray
    saturated: bool
    penalty: float = 0.0


def _check_mu(mu):
    if int(mu) != mu or mu < 2 or int(mu) % 2:
        raise ValueError(f"mu must be an even integer >= 2, got {mu}")
    return int(mu)


def signed_power(z, k):
    """``z ** k`` for a nonnegative integer ``k``, saturating at the cap.

    Returns ``(value, saturated)`` where ``saturated`` is a boolean array.
    """
    z = np.asarray(z, dtype=float)
    k = int(k)
    if k == 0:
        return np.ones_like(z), np.zeros(z.shape, dtype=bool)
    mag = np.abs(z)
    with np.errstate(divide="ignore"):
        logmag = k * np.log(mag)
    sat = logmag > _LOG_CAP
    with np.errstate(over="ignore", under="ignore"):
        out = np.where(sat, SATURATION_CAP, np.power(mag, k))
    if k % 2:
        out = np.copysign(out, z)
        out = np.where(z == 0, 0.0, out)
    return out, sat


def safe_even_power(z, mu):
    """``z ** mu`` for even ``mu``; returns ``(value, saturated)``.

    Nonnegative and nondecreasing in ``|z|``; values that would overflow are
    clamped to ``SATURATION_CAP``.
    """
    mu = _check_mu(mu)
    val, sat = signed_power(z, mu)
    if np.ndim(val) == 0:
        return float(val), bool(sat)
    return val, sat


def _penalty_terms(z, mu, q, weight):
    mu = _check_mu(mu)
    zmu, sat_mu = signed_power(z, mu)
    zm1, sat_m1 = signed_power(z, mu - 1)
    zm2, sat_m2 = signed_power(z, mu - 2)
    with np.errstate(over="ignore", under="ignore"):
        penalty = min(weight / mu * float(np.sum(zmu)), SATURATION_CAP)
        grad = np.clip(weight / q * zm1, -SATURATION_CAP, SATURATION_CAP)
        hess = np.minimum(weight * (mu - 1) / q**2 * zm2, SATURATION_CAP)
    saturated = bool(np.any(sat_mu) or np.any(sat_m1) or np.any(sat_m2))
    return penalty, grad, hess, saturated


def barrier_eval(x, mu, sb, problem, weight=None):
    """Barrier value, gradient contribution ``e`` and Hessian diagonal ``d`` at ``x``.

    ``weight`` multiplies ``sum(z**mu) / mu``; it defaults to ``1/m``.
    The returned ``value`` includes ``f(x)``; ``grad_term`` and
    ``hess_diag`` are the barrier parts only.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    w = 1.0 / m if weight is None else float(weight)
    z = sb.to_unit(x)
    penalty, grad, hess, sat = _penalty_terms(z, mu, sb.half_widths, w)
    value = min(problem.objective(x) + penalty, SATURATION_CAP)
    return BarrierEval(value, grad, hess, sat, penalty)


def barrier_eval_scaled(z, mu, problem, weight=None):
    """Barrier on the unit box: ``problem`` is already expressed in ``z`` on [-1, 1]^m."""
    z = np.asarray(z, dtype=float)
    m = z.size
    w = 1.0 / m if weight is None else float(weight)
    penalty, grad, hess, sat = _penalty_terms(z, mu, np.ones(m), w)
    value = min(problem.objective(z) + penalty, SATURATION_CAP)
    return BarrierEval(value, grad, hess, sat, penalty)
