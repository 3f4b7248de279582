"""Bernoulli exponential-family primitives and the conjugate coupling prior.

A per-class, per-feature Bernoulli with mean v is written in natural form

    p(x) = exp(x*t - A(t)),   t = logit(v),  A(t) = log(1 + e^t),

so A'(t) = sigmoid(t) recovers the mean. The coupling prior over a natural
parameter t, centred on a reference natural parameter r with concentration
gamma > 0, is the conjugate density

    log p(t | r, gamma) = log m(r) + t*alpha(r) - gamma*A(t),
    alpha(r) = gamma*sigmoid(r),
    log m(r) = lgamma(gamma+2) - lgamma(alpha+1) - lgamma(gamma-alpha+1).

With this normalizer the density integrates to 1 over the mean parameter
v = sigmoid(t) in (0, 1); as a function of v it is Beta(alpha+1,
gamma-alpha+1). Its mode over t is exactly r, and its spread shrinks as
gamma grows, which is what makes gamma usable as a coupling strength.

Everything here accepts scalars or numpy arrays and is numerically stable
for |t| up to at least 700.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NumericError

# Mean parameters are clamped to this open interval before logit, bounding
# natural parameters to roughly [-23.03, 23.03].
MEAN_FLOOR = 1e-10

_lgamma_vec = np.vectorize(math.lgamma, otypes=[np.float64])


def _match_input(x, value):
    """Return a python float when the input was scalar, else the array."""
    if np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0):
        return float(value)
    return value


def sigmoid(x):
    """Logistic function 1/(1+e^-x), overflow-free for |x| >= 700."""
    x_arr = np.asarray(x, dtype=float)
    out = np.empty_like(x_arr)
    pos = x_arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x_arr[pos]))
    ex = np.exp(x_arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _match_input(x, out)


def logit(p):
    """Inverse of sigmoid; p must lie strictly inside (0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise DomainError(f"logit requires p in (0, 1), got {p}")
    return _match_input(p, np.log(p_arr) - np.log1p(-p_arr))


def natural_from_mean(v):
    """Mean -> natural parameter with clamping to [1e-10, 1-1e-10].

    This is the only sanctioned way to build natural parameters from
    estimated means; the clamp keeps logit finite when a count ratio
    touches 0 or 1.
    """
    v_arr = np.clip(np.asarray(v, dtype=float), MEAN_FLOOR, 1.0 - MEAN_FLOOR)
    return _match_input(v, np.log(v_arr) - np.log1p(-v_arr))


def log_partition(theta):
    """A(t) = log(1 + e^t), evaluated as max(t, 0) + log1p(e^-|t|)."""
    return _match_input(theta, np.logaddexp(0.0, np.asarray(theta, dtype=float)))


def log_partition_deriv(theta):
    """A'(t) = sigmoid(t), the mean map."""
    return sigmoid(theta)


def digamma(x):
    """Digamma psi(x) for x > 0, accurate to about 1e-12.

    Arguments below 6 are lifted with psi(x) = psi(x+1) - 1/x, then the
    asymptotic series

        psi(x) ~ ln x - 1/(2x) - u/12 + u^2/120 - u^3/252
                 + u^4/240 - u^5/132 + 691 u^6 / 32760,   u = 1/x^2,

    is applied. Raises DomainError for x <= 0.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0) or np.any(~np.isfinite(x_arr)):
        raise DomainError(f"digamma requires x > 0, got {x}")
    work = x_arr.copy().reshape(-1)
    acc = np.zeros_like(work)
    small = work < 6.0
    while np.any(small):
        acc[small] -= 1.0 / work[small]
        work[small] += 1.0
        small = work < 6.0
    u = 1.0 / (work * work)
    series = np.log(work) - 0.5 / work - u * (
        1.0 / 12.0
        - u * (1.0 / 120.0
               - u * (1.0 / 252.0
                      - u * (1.0 / 240.0
                             - u * (1.0 / 132.0 - u * (691.0 / 32760.0))))))
    return _match_input(x, (acc + series).reshape(x_arr.shape))


def _check_gamma(gamma):
    gamma = float(gamma)
    if not (gamma > 0.0) or not math.isfinite(gamma):
        raise DomainError(f"coupling concentration gamma must be finite and > 0, got {gamma}")
    return gamma


def coupling_alpha(theta, gamma):
    """alpha(r) = gamma * sigmoid(r), the prior's pseudo-count of successes."""
    return gamma * sigmoid(theta)


def beta_prior_log_density(theta_tilde, theta, gamma):
    """Log density of the conjugate coupling prior, see module docstring.

    theta_tilde is the generative natural parameter being scored, theta the
    reference (discriminative) natural parameter the prior is centred on.
    Broadcasts over arrays; gamma is a positive scalar.
    """
    gamma = _check_gamma(gamma)
    tt = np.asarray(theta_tilde, dtype=float)
    alpha = gamma * sigmoid(np.asarray(theta, dtype=float))
    logm = (math.lgamma(gamma + 2.0)
            - _lgamma_vec(alpha + 1.0)
            - _lgamma_vec(gamma - alpha + 1.0))
    out = logm + tt * alpha - gamma * np.logaddexp(0.0, tt)
    if np.isscalar(theta_tilde) and np.isscalar(theta):
        return float(out)
    return out


def beta_prior_natural_log_density(theta_tilde, theta, gamma):
    """Same kernel, normalized over the natural parameter instead.

    exp of this integrates to 1 in d(theta_tilde) over the real line; the
    normalizer is the Jacobian-corrected B(alpha, gamma-alpha). Used for
    plotting on the natural axis. Differs from beta_prior_log_density by a
    constant in theta_tilde.
    """
    gamma = _check_gamma(gamma)
    tt = np.asarray(theta_tilde, dtype=float)
    alpha = gamma * sigmoid(np.asarray(theta, dtype=float))
    log_norm = (_lgamma_vec(alpha) + _lgamma_vec(gamma - alpha)
                - _lgamma_vec(np.asarray(gamma, dtype=float)))
    out = tt * alpha - gamma * np.logaddexp(0.0, tt) - log_norm
    if np.isscalar(theta_tilde) and np.isscalar(theta):
        return float(out)
    return out


def beta_prior_mode(theta, gamma):
    """Mode over theta_tilde. Stationarity alpha - gamma*sigmoid(t) = 0
    gives sigmoid(t) = sigmoid(theta), so the mode is theta itself."""
    _check_gamma(gamma)
    return theta


def _simpson(values, h):
    """Composite Simpson rule over an odd-length uniform grid."""
    return (h / 3.0) * (values[0] + values[-1]
                        + 4.0 * values[1:-1:2].sum()
                        + 2.0 * values[2:-1:2].sum())


# Quadrature controls for the prior moments: interval [theta-50, theta+50],
# panel doubling from 2048 until the moments move by less than rel 1e-6,
# hard cap 2^16 panels.
_QUAD_HALF_WIDTH = 50.0
_QUAD_INITIAL_PANELS = 2048
_QUAD_REL_TOL = 1e-6
_QUAD_MAX_PANELS = 1 << 16


def beta_prior_moments(theta, gamma):
    """(mean, variance) of theta_tilde under the coupling prior.

    Computed by composite Simpson quadrature of the unnormalized kernel
    over theta_tilde in [theta-50, theta+50] with internal normalization,
    so the result is exact up to truncation of the (exponentially small
    for moderate gamma) tails. Raises NumericError if panel doubling
    fails to stabilize the moments.
    """
    gamma = _check_gamma(gamma)
    theta = float(theta)
    alpha = gamma * sigmoid(theta)
    lo, hi = theta - _QUAD_HALF_WIDTH, theta + _QUAD_HALF_WIDTH

    def moments(panels):
        grid = np.linspace(lo, hi, panels + 1)
        logf = grid * alpha - gamma * np.logaddexp(0.0, grid)
        f = np.exp(logf - logf.max())
        h = (hi - lo) / panels
        z = _simpson(f, h)
        m1 = _simpson(grid * f, h)
        m2 = _simpson(grid * grid * f, h)
        mean = m1 / z
        return mean, m2 / z - mean * mean

    def stable(a, b):
        return abs(a - b) <= _QUAD_REL_TOL * max(1.0, abs(b))

    panels = _QUAD_INITIAL_PANELS
    mean, var = moments(panels)
    while panels < _QUAD_MAX_PANELS:
        panels *= 2
        mean_next, var_next = moments(panels)
        if stable(mean, mean_next) and stable(var, var_next):
            return mean_next, var_next
        mean, var = mean_next, var_next
    raise NumericError(
        f"prior moment quadrature did not stabilize within {_QUAD_MAX_PANELS} panels "
        f"(theta={theta}, gamma={gamma})",
        snapshot={"mean": mean, "variance": var, "panels": panels},
    )


def beta_prior_variance(theta, gamma):
    """Variance of theta_tilde under the coupling prior (quadrature)."""
    return beta_prior_moments(theta, gamma)[1]


def matched_normal_params(theta, gamma):
    """(mean, variance) of the Normal matched to the coupling prior.

    The Normal shares the prior's mode (theta) and its quadrature variance.
    This is the natural-parameter-space Gaussian baseline; over the mean
    parameter it is the corresponding logistic-Normal.
    """
    return float(theta), beta_prior_variance(theta, gamma)


def matched_normal_log_density(theta_tilde, theta, gamma):
    """Log density at theta_tilde of the moment-matched Normal."""
    mean, var = matched_normal_params(theta, gamma)
    tt = np.asarray(theta_tilde, dtype=float)
    out = -0.5 * np.log(2.0 * np.pi * var) - (tt - mean) ** 2 / (2.0 * var)
    return _match_input(theta_tilde, out)
