"""Moments of Gaussian and symmetric-mixture predictors conditional on the
margin variable M = alpha + X'beta, the margin density, mixture posteriors,
samplers, and the one-dimensional quadrature driver used to assemble risk
curvature matrices.

All conditional-moment formulas reduce to three matrix-valued polynomial
coefficients per mixture component in the standardized offset
z = (m - alpha - beta'mu) / ||beta||:

    E[Q(X) | M=m, component] = A + B*z + C*z**2

where Q(X) = [[1, X'], [X, XX']]. Mixture moments posterior-weight the
per-component values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import (
    Design,
    GaussianPredictors,
    MixturePredictors,
    PredictorDistribution,
    Theta,
    profile_eval,
)


class DegenerateMarginError(ValueError):
    """The margin variable has no spread (beta = 0)."""


class QuadratureError(RuntimeError):
    """Margin quadrature failed to converge within the refinement budget."""


@dataclass(frozen=True)
class BorderedMoment:
    """(p+1) x (p+1) symmetric matrix in the [[scalar, row], [col, block]]
    layout of Q(X); symmetrized on construction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError("bordered moment must be a square matrix")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


@dataclass(frozen=True)
class MarginLaw:
    """1-D mixture-of-Gaussians law of the margin M = alpha + X'beta."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        for name in ("weights", "means", "variances"):
            a = np.array(getattr(self, name), dtype=float, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("component weights must sum to 1")
        if np.any(self.variances <= 0.0):
            raise DegenerateMarginError("margin variance must be positive")

    @property
    def sds(self) -> np.ndarray:
        return np.sqrt(self.variances)


def margin_law(dist: PredictorDistribution, theta: Theta) -> MarginLaw:
    """Law of alpha + X'beta: one Gaussian per mixture component."""
    beta = theta.beta
    if theta.beta_norm() == 0.0:
        raise DegenerateMarginError("beta = 0 gives a degenerate margin")
    comps = dist.components()
    weights = np.array([w for w, _, _ in comps])
    means = np.array([theta.alpha + float(beta @ mu) for _, mu, _ in comps])
    variances = np.array([float(beta @ cov @ beta) for _, _, cov in comps])
    return MarginLaw(weights=weights, means=means, variances=variances)


def margin_density(law: MarginLaw, m) -> np.ndarray | float:
    """Mixture-of-normals density of the margin at m."""
    m = np.asarray(m, dtype=float)
    z = (m[..., None] - law.means) / law.sds
    dens = law.weights * np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * law.sds)
    out = dens.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _log_component_posterior(law: MarginLaw, m: np.ndarray) -> np.ndarray:
    """log P(component k | M=m), shape (K, len(m)); stable at extreme m."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    z = (m[None, :] - law.means[:, None]) / law.sds[:, None]
    logw = np.log(law.weights)[:, None] - 0.5 * z * z - np.log(law.sds)[:, None]
    return logw - logsumexp(logw, axis=0, keepdims=True)


def mixture_posterior(dist: MixturePredictors, theta: Theta, m) -> tuple:
    """Posterior probabilities of the +mu and -mu components given M=m."""
    if not isinstance(dist, MixturePredictors):
        raise TypeError("mixture_posterior needs a two-component mixture")
    law = margin_law(dist, theta)
    post = np.exp(_log_component_posterior(law, m))
    scalar = np.ndim(m) == 0
    w_plus, w_minus = post[0], post[1]
    if scalar:
        return float(w_plus[0]), float(w_minus[0])
    return w_plus, w_minus


def _nu_hat(theta: Theta) -> np.ndarray:
    norm = theta.beta_norm()
    if norm == 0.0:
        raise DegenerateMarginError("beta = 0 gives a degenerate margin")
    return theta.beta / norm


def conditional_mean(mean: np.ndarray, cov: np.ndarray, theta: Theta, m: float) -> np.ndarray:
    """E[X | M=m] for X ~ N(mean, cov):
    mean + ((m - alpha - mean'beta)/||beta||) * cov@nu / (nu'cov nu)."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("cov must be positive definite") from exc
    nu = _nu_hat(theta)
    s2 = float(nu @ cov @ nu)
    z = (m - theta.alpha - float(mean @ theta.beta)) / theta.beta_norm()
    return mean + (z / s2) * (cov @ nu)


def _component_q_coeffs(theta: Theta, comps) -> tuple:
    """Matrix polynomial coefficients (A, B, C) of E[Q|m, k] in the offset
    z_k = (m - alpha - beta'mu_k)/||beta||, plus the per-component beta'mu_k.

    The z**2 coefficient carries 1/(nu'cov nu)**2 and the constant term
    absorbs -cov@nu nu'cov/(nu'cov nu), which is what makes the law of total
    expectation integrate back to the unconditional second moment.
    """
    nu = _nu_hat(theta)
    d = theta.p + 1
    K = len(comps)
    A = np.zeros((K, d, d))
    B = np.zeros((K, d, d))
    C = np.zeros((K, d, d))
    btmu = np.zeros(K)
    for k, (_, mu, cov) in enumerate(comps):
        s2 = float(nu @ cov @ nu)
        cn = cov @ nu
        outer = np.outer(cn, cn)
        A[k, 0, 0] = 1.0
        A[k, 0, 1:] = mu
        A[k, 1:, 0] = mu
        A[k, 1:, 1:] = np.outer(mu, mu) + cov - outer / s2
        B[k, 0, 1:] = cn / s2
        B[k, 1:, 0] = cn / s2
        B[k, 1:, 1:] = (np.outer(cn, mu) + np.outer(mu, cn)) / s2
        C[k, 1:, 1:] = outer / (s2 * s2)
        btmu[k] = float(theta.beta @ mu)
    return A, B, C, btmu


def _q_values(dist: PredictorDistribution, theta: Theta, m: np.ndarray) -> np.ndarray:
    """E[Q(X) | M=m] for each m, shape (len(m), p+1, p+1)."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    comps = dist.components()
    A, B, C, btmu = _component_q_coeffs(theta, comps)
    law = margin_law(dist, theta)
    post = np.exp(_log_component_posterior(law, m))
    z = (m[None, :] - theta.alpha - btmu[:, None]) / theta.beta_norm()
    out = np.einsum("kn,kij->nij", post, A)
    out += np.einsum("kn,kij->nij", post * z, B)
    out += np.einsum("kn,kij->nij", post * z * z, C)
    return out


def conditional_second_moment(dist: PredictorDistribution, theta: Theta, m: float) -> BorderedMoment:
    """E[Q(X) | M=m] assembled as [[1, E[X|m]'], [E[X|m], E[XX'|m]]]."""
    return BorderedMoment(_q_values(dist, theta, np.array([float(m)]))[0])


def unconditional_second_moment(dist: PredictorDistribution) -> BorderedMoment:
    """E[Q(X)] in closed form: sum_k pi_k [[1, mu'], [mu, mu mu' + cov]]."""
    d = dist.dim + 1
    out = np.zeros((d, d))
    for w, mu, cov in dist.components():
        out[0, 0] += w
        out[0, 1:] += w * mu
        out[1:, 0] += w * mu
        out[1:, 1:] += w * (np.outer(mu, mu) + cov)
    return BorderedMoment(out)


def sample_predictors(dist: PredictorDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. predictor rows; for mixtures a fair coin picks the
    +mu or -mu component ahead of the Gaussian draws."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    p = dist.dim
    if n == 0:
        return np.empty((0, p))
    if isinstance(dist, GaussianPredictors):
        L = np.linalg.cholesky(dist.cov)
        return dist.mean + rng.standard_normal((n, p)) @ L.T
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    L = np.linalg.cholesky(dist.cov)
    return signs[:, None] * dist.mu + rng.standard_normal((n, p)) @ L.T


def sample_labels(design: Design, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw labels in {-1, +1} with P(Y=1|X) = profile(zeta + X'nu)."""
    X = np.asarray(X, dtype=float)
    probs = profile_eval(design.profile, design.zeta + X @ design.nu)
    return np.where(rng.random(X.shape[0]) < probs, 1.0, -1.0)


def _panel_nodes(a: float, b: float, n_panels: int, order: int,
                 inner_edges: tuple = ()) -> tuple:
    """Composite Gauss-Legendre nodes/weights on [a, b] with panel edges
    forced at any inner breakpoints (so piecewise-smooth integrands stay
    smooth within each panel)."""
    edges = np.linspace(a, b, n_panels + 1)
    extra = [e for e in inner_edges if a < e < b]
    if extra:
        edges = np.unique(np.concatenate([edges, np.asarray(extra, dtype=float)]))
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


_GL_ORDER = 10
_TAIL_SDS = 10.0


def integrate_over_margin(dist: PredictorDistribution, theta: Theta, values_fn,
                          breakpoints: tuple = (), n_nodes: int = 400,
                          tol: float = 1e-9, max_doublings: int = 6):
    """Integrate values_fn(m) against the margin density:

        integral of values_fn(m) * margin_density(m) dm
          = sum_k weight_k * integral of values_fn(m) * phi_k(m) dm

    with composite Gauss-Legendre panels over [mean_k - 10 sd, mean_k + 10 sd]
    per component, refined by doubling the node count until successive
    results differ by less than tol in max norm.

    values_fn maps an array of margins (n,) to values of shape (n, ...).
    """
    law = margin_law(dist, theta)
    prev = None
    nodes_now = max(n_nodes, 2 * _GL_ORDER)
    for _ in range(max_doublings + 1):
        total = None
        for wk, mean, var in zip(law.weights, law.means, law.variances):
            sd = float(np.sqrt(var))
            a, b = mean - _TAIL_SDS * sd, mean + _TAIL_SDS * sd
            n_panels = max(2, nodes_now // _GL_ORDER)
            m, w = _panel_nodes(a, b, n_panels, _GL_ORDER, breakpoints)
            phi = np.exp(-0.5 * ((m - mean) / sd) ** 2) / (np.sqrt(2.0 * np.pi) * sd)
            vals = np.asarray(values_fn(m))
            scale = (wk * w * phi).reshape((-1,) + (1,) * (vals.ndim - 1))
            part = (vals * scale).sum(axis=0)
            total = part if total is None else total + part
        if prev is not None and np.max(np.abs(total - prev)) < tol:
            return total
        prev = total
        nodes_now *= 2
    raise QuadratureError(
        f"margin quadrature did not converge below {tol} after "
        f"{max_doublings} doublings")


def expect_q_over_margin(dist: PredictorDistribution, theta: Theta, weight,
                         breakpoints: tuple = (), **kwargs) -> np.ndarray:
    """integral of E[Q(X)|M=m] * weight(m) * margin_density(m) dm."""

    def values(m):
        return _q_values(dist, theta, m) * np.asarray(weight(m))[:, None, None]

    return integrate_over_margin(dist, theta, values, breakpoints, **kwargs)
