"""Closed-form divergences between diagonal Gaussians.

Two divergences are provided: the Kullback-Leibler divergence and the
alpha-skew Jensen-Shannon divergence (aJSD).  The aJSD replaces the
arithmetic mixture of the plain JSD with the normalized weighted geometric
mean of the two densities, which for Gaussians is again a Gaussian; that is
what makes the closed form possible:

    aJSD(g1, g2; alpha) = (1-alpha) * KL(g1 || m_alpha) + alpha * KL(g2 || m_alpha)

with m_alpha the normalized geometric mean N(mu_alpha, var_alpha) of
``skew_mixture_params``.  All second-order quantities in this module are
variances (never standard deviations or precisions); callers holding
precisions convert at the boundary.  Diagonal covariances factorize, so
every divergence is the per-dimension sum of univariate terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DiagGaussian",
    "SkewParams",
    "kld_gaussian",
    "kld_gaussian_grad",
    "skew_mixture_params",
    "alpha_jsd",
    "alpha_jsd_grad",
    "alpha_jsd_first_order",
    "asymmetry_table",
    "format_asymmetry_table",
]


@dataclass(frozen=True)
class DiagGaussian:
    """Diagonal Gaussian: a mean vector and a per-dimension variance vector."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        variance = np.atleast_1d(np.asarray(self.variance, dtype=float))
        if mean.ndim != 1 or variance.ndim != 1:
            raise ValueError("mean and variance must be 1-d vectors")
        if mean.shape != variance.shape:
            raise ValueError(
                f"mean and variance must have equal length, got {mean.shape[0]} and {variance.shape[0]}"
            )
        if mean.size < 1:
            raise ValueError("mean and variance must have length >= 1")
        if not (np.isfinite(mean).all() and np.isfinite(variance).all()):
            raise ValueError("mean and variance must be finite")
        if not (variance > 0).all():
            raise ValueError("variance must be strictly positive in every dimension")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class SkewParams:
    """Skew weight alpha together with the geometric-mean mixture Gaussian."""

    alpha: float
    mixture: DiagGaussian

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def _check_same_dim(g1: DiagGaussian, g2: DiagGaussian) -> None:
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")


def kld_gaussian(q: DiagGaussian, p: DiagGaussian) -> float:
    """KL(q || p) between diagonal Gaussians, summed over dimensions.

    Per dimension (variances v, means m):

        0.5 * [ ln(v_p / v_q) + (v_q + (m_q - m_p)^2) / v_p - 1 ]

    Nonnegative, zero iff q == p, finite for positive variances.
    """
    _check_same_dim(q, p)
    value, _, _ = _kld_value_grad(q.mean, q.variance, p.mean, p.variance)
    return float(np.sum(value))


def kld_gaussian_grad(q: DiagGaussian, p: DiagGaussian) -> tuple[float, np.ndarray, np.ndarray]:
    """KL(q || p) plus its gradient with respect to q's mean and variance."""
    _check_same_dim(q, p)
    value, dmean, dvar = _kld_value_grad(q.mean, q.variance, p.mean, p.variance)
    return float(np.sum(value)), dmean, dvar


def _kld_value_grad(mu1, v1, mu2, v2):
    """Elementwise KL terms and gradients w.r.t. (mu1, v1); arrays broadcast."""
    delta = mu1 - mu2
    value = 0.5 * (np.log(v2 / v1) + (v1 + delta**2) / v2 - 1.0)
    dmu1 = delta / v2
    dv1 = 0.5 * (1.0 / v2 - 1.0 / v1)
    return value, dmu1, dv1


def skew_mixture_params(g1: DiagGaussian, g2: DiagGaussian, alpha: float) -> SkewParams:
    """Parameters of the normalized geometric mean g1^(1-alpha) * g2^alpha.

    Per dimension:

        var_a = ( (1-alpha)/v1 + alpha/v2 )^(-1)
        mu_a  = var_a * ( (1-alpha)*mu1/v1 + alpha*mu2/v2 )

    alpha=0 returns g1 exactly, alpha=1 returns g2 exactly.
    """
    _check_same_dim(g1, g2)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return SkewParams(alpha, g1)
    if alpha == 1.0:
        return SkewParams(alpha, g2)
    inv = (1.0 - alpha) / g1.variance + alpha / g2.variance
    var_a = 1.0 / inv
    mu_a = var_a * ((1.0 - alpha) * g1.mean / g1.variance + alpha * g2.mean / g2.variance)
    return SkewParams(alpha, DiagGaussian(mu_a, var_a))


def alpha_jsd(g1: DiagGaussian, g2: DiagGaussian, alpha: float) -> float:
    """Skew Jensen-Shannon divergence with geometric-mean intermediate.

    Requires 0 < alpha < 1; at the endpoints the divergence degenerates to
    a one-sided quantity that is identically zero, so those are rejected.
    Symmetric under (g1, g2, alpha) -> (g2, g1, 1-alpha); zero iff g1 == g2.
    """
    _check_same_dim(g1, g2)
    if not 0.0 < alpha < 1.0:
        raise ValueError(
            f"alpha must lie strictly inside (0, 1); alpha={alpha} degenerates to a one-sided divergence"
        )
    mix = skew_mixture_params(g1, g2, alpha).mixture
    return (1.0 - alpha) * kld_gaussian(g1, mix) + alpha * kld_gaussian(g2, mix)


def alpha_jsd_grad(g1: DiagGaussian, g2: DiagGaussian, alpha: float) -> tuple[float, np.ndarray, np.ndarray]:
    """alpha_jsd value plus its gradient w.r.t. g1's mean and variance."""
    _check_same_dim(g1, g2)
    if not 0.0 < alpha < 1.0:
        raise ValueError(
            f"alpha must lie strictly inside (0, 1); alpha={alpha} degenerates to a one-sided divergence"
        )
    value, dmu1, dv1 = _ajsd_value_grad(g1.mean, g1.variance, g2.mean, g2.variance, alpha)
    return float(np.sum(value)), dmu1, dv1


def _ajsd_value_grad(mu1, v1, mu2, v2, alpha):
    """Elementwise aJSD terms and reverse-mode gradients w.r.t. (mu1, v1).

    Arrays broadcast, so batched (B, d) inputs against (B, d) components
    evaluate in one shot.  The forward pass mirrors the closed form; the
    backward pass accumulates through the skew parameters step by step.
    """
    a = alpha
    b = 1.0 - alpha
    p1 = b / v1
    p2 = a / v2
    ptot = p1 + p2
    var_a = 1.0 / ptot
    s = p1 * mu1 + p2 * mu2
    mu_a = s * var_a
    d1 = mu_a - mu1
    d2 = mu_a - mu2
    quad = b * d1**2 + a * d2**2
    mix = b * v1 + a * v2
    value = 0.5 * ((quad + mix) * ptot - 1.0 + np.log(var_a) - b * np.log(v1) - a * np.log(v2))

    # reverse pass
    g_ptot = 0.5 * (quad + mix) - 0.5 * var_a  # product term + d(log var_a)
    g_d1 = ptot * b * d1
    g_d2 = ptot * a * d2
    g_mu_a = g_d1 + g_d2
    g_mu1 = -g_d1
    g_s = g_mu_a * var_a
    g_ptot = g_ptot + g_mu_a * s * (-var_a * var_a)
    g_mu1 = g_mu1 + g_s * p1
    g_p1 = g_s * mu1 + g_ptot
    g_v1 = 0.5 * ptot * b + g_p1 * (-b / v1**2) - 0.5 * b / v1
    return value, g_mu1, g_v1


def alpha_jsd_first_order(mu1, mu2, alpha: float) -> float:
    """First-order (means-only) skew divergence: variances ignored.

    Equals (1-a)(mu_a - mu1)^2 + a(mu_a - mu2)^2 summed over dimensions,
    with mu_a the plain convex combination; algebraically a(1-a)|mu1-mu2|^2.
    Strictly below the first-order KLD 0.5*|mu1-mu2|^2 whenever the means
    differ and 0 < alpha < 1.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    if mu1.shape != mu2.shape:
        raise ValueError(f"length mismatch: {mu1.shape[0]} vs {mu2.shape[0]}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mu_a = (1.0 - alpha) * mu1 + alpha * mu2
    return float(np.sum((1.0 - alpha) * (mu_a - mu1) ** 2 + alpha * (mu_a - mu2) ** 2))


def asymmetry_table(mu1: float, mu2_grid, alpha: float) -> np.ndarray:
    """KLD and aJSD between unit-variance Gaussians over a grid of means.

    Row k is (mu2_grid[k], KLD, aJSD) for N(mu1, 1) against N(mu2, 1);
    both columns vanish where mu2 == mu1 and the aJSD column stays below
    the KLD column everywhere else.
    """
    grid = np.atleast_1d(np.asarray(mu2_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("mu2 grid must be nonempty")
    one = np.ones(1)
    g1 = DiagGaussian(np.array([float(mu1)]), one)
    rows = np.empty((grid.size, 3))
    for i, mu2 in enumerate(grid):
        g2 = DiagGaussian(np.array([mu2]), one)
        rows[i] = (mu2, kld_gaussian(g1, g2), alpha_jsd(g1, g2, alpha))
    return rows


def format_asymmetry_table(rows: np.ndarray) -> str:
    """Serialize asymmetry rows as delimited text: mu2, kld, ajsd per line."""
    lines = ["\t".join(repr(float(v)) for v in row) for row in np.atleast_2d(rows)]
    return "\n".join(lines) + "\n"
