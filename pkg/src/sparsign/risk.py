"""Loss functions, population risk minimization (the c* search), and analytic
assembly of the risk Hessian H and score covariance J for logistic and hinge
losses under Gaussian and symmetric-mixture predictor designs.

H and J are built by direct one-dimensional integration of
E[Q(X)|M=m] * weight(m) * density(m) over the margin M; a per-component
scalar-moment expansion is kept as an independent cross-check for
single-Gaussian designs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import Design, GaussianPredictors, Loss, PredictorDistribution, Theta, profile_eval
from .moments import (
    BorderedMoment,
    DegenerateMarginError,
    expect_q_over_margin,
    integrate_over_margin,
    margin_density,
    margin_law,
    sample_predictors,
    unconditional_second_moment,
)


class BracketError(RuntimeError):
    """The c* search could not bracket a minimum (risk looks unbounded)."""


class CurvatureMethod(enum.Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


def loss_eval(loss: Loss, y, s) -> np.ndarray | float:
    """Pointwise loss of predicting score s for label y in {-1, +1}.

    Logistic: -1{y=1}*s + log(1 + e^s), evaluated in log1p-stable form.
    Hinge: max(0, 1 - y*s).
    """
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if loss is Loss.LOGISTIC:
        out = np.logaddexp(0.0, s) - np.where(y > 0, s, 0.0)
    else:
        out = np.maximum(0.0, 1.0 - y * s)
    if out.ndim == 0:
        return float(out)
    return out


def empirical_risk(loss: Loss, X: np.ndarray, y: np.ndarray, t: tuple) -> float:
    """(1/n) sum_i loss(y_i, a + x_i'b); zero on empty data by convention."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y lengths disagree")
    if y.size == 0:
        return 0.0
    a, b = t
    return float(np.mean(loss_eval(loss, y, a + X @ np.asarray(b, dtype=float))))


def _conditional_risk(loss: Loss, g: np.ndarray, t: np.ndarray, c: float) -> float:
    s = c * t
    return float(np.mean(g * loss_eval(loss, np.ones_like(t), s)
                         + (1.0 - g) * loss_eval(loss, -np.ones_like(t), s)))


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def fit_cstar(design: Design, loss: Loss, mc_size: int = 1_000_000,
              rng: np.random.Generator | None = None,
              bracket_tol: float = 1e-6) -> Theta:
    """Find the scalar c* minimizing the Monte Carlo average of the risk
    conditional on X along the direction nu, and return the population
    parameter theta = (0, c*nu).

    The intercept is pinned at zero: the harness profiles satisfy
    g(r) + g(-r) = 1 and the predictor laws are symmetric about the origin,
    so the risk is symmetric in the intercept. The minimization runs a
    golden-section search on a bracket grown by doubling from [0, 4].
    """
    if mc_size < 10_000:
        raise ValueError("mc_size must be at least 10^4")
    if rng is None:
        rng = np.random.default_rng(0)
    X = sample_predictors(design.dist, mc_size, rng)
    t = X @ design.nu
    g = profile_eval(design.profile, design.zeta + t)

    def risk(c):
        return _conditional_risk(loss, g, t, c)

    lo, hi = 0.0, 4.0
    r_lo = risk(lo)
    for _ in range(40):
        if risk(hi) > min(risk(hi / 2.0), r_lo):
            break
        hi *= 2.0
    else:
        raise BracketError("no minimum bracketed within 40 doublings from [0, 4]")

    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = risk(x1), risk(x2)
    while b - a > bracket_tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = risk(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = risk(x2)
    cstar = 0.5 * (a + b)
    return Theta(alpha=0.0, beta=cstar * design.nu, loss=loss, cstar=cstar)


def _margin_cstar(design: Design, theta: Theta) -> float:
    """Signed scalar c with beta = c * nu, needed to map M back to X'nu."""
    if theta.cstar is not None:
        c = float(theta.cstar)
    else:
        c = float(design.nu @ theta.beta)
    if c == 0.0:
        raise DegenerateMarginError("beta = 0: margin does not determine X'nu")
    if np.max(np.abs(theta.beta - c * design.nu)) > 1e-8 * max(1.0, abs(c)):
        raise ValueError("beta is not aligned with the design direction nu; "
                         "the response would depend on X beyond the margin")
    return c


def _prob_given_margin(design: Design, theta: Theta):
    """m -> P(Y=1 | M=m), using X'nu = (m - alpha)/c* under the single-index
    response."""
    c = _margin_cstar(design, theta)

    def prob(m):
        return profile_eval(design.profile, design.zeta + (np.asarray(m) - theta.alpha) / c)

    return prob


def _logistic_weight(m):
    s = expit(np.asarray(m))
    return s * (1.0 - s)


def hessian_logistic(design: Design, theta: Theta, **kwargs) -> BorderedMoment:
    """Logistic risk Hessian: E[Q(X) * e^M/(1+e^M)^2], computed as a margin
    quadrature. Does not depend on the response distribution; beta = 0 is
    admitted (the margin degenerates to the constant alpha)."""
    if theta.beta_norm() == 0.0:
        w = float(_logistic_weight(theta.alpha))
        return BorderedMoment(unconditional_second_moment(design.dist).matrix * w)
    return BorderedMoment(expect_q_over_margin(design.dist, theta, _logistic_weight, **kwargs))


def hessian_svm(design: Design, theta: Theta) -> BorderedMoment:
    """Hinge risk Hessian: exact two-point sum over the elbows M = +1, -1:

        E[Q|M=1] P(Y=1|M=1) f(1) + E[Q|M=-1] P(Y=-1|M=-1) f(-1).
    """
    if theta.beta_norm() == 0.0:
        raise DegenerateMarginError("hinge Hessian needs beta != 0")
    from .moments import conditional_second_moment

    prob = _prob_given_margin(design, theta)
    law = margin_law(design.dist, theta)
    h = (conditional_second_moment(design.dist, theta, 1.0).matrix
         * float(prob(1.0)) * margin_density(law, 1.0))
    h = h + (conditional_second_moment(design.dist, theta, -1.0).matrix
             * (1.0 - float(prob(-1.0))) * margin_density(law, -1.0))
    return BorderedMoment(h)


def score_cov_logistic(design: Design, theta: Theta, **kwargs) -> BorderedMoment:
    """Logistic score covariance J = E[Q(X) (p - 2 p s + s^2)] with
    s = e^M/(1+e^M), as a margin quadrature."""
    prob = _prob_given_margin(design, theta)

    def weight(m):
        s = expit(np.asarray(m))
        g = np.asarray(prob(m))
        return g - 2.0 * g * s + s * s

    return BorderedMoment(expect_q_over_margin(design.dist, theta, weight, **kwargs))


def score_cov_hinge(design: Design, theta: Theta, **kwargs) -> BorderedMoment:
    """Hinge score covariance
    J = E[(p(X) 1{M<=1} + (1-p(X)) 1{M>=-1}) Q(X)], with the quadrature
    domain split at the elbows so each piece is smooth."""
    prob = _prob_given_margin(design, theta)
    return BorderedMoment(_score_cov_hinge_impl(design.dist, theta, prob, **kwargs))


def _score_cov_hinge_impl(dist: PredictorDistribution, theta: Theta, prob, **kwargs):
    def weight(m):
        m = np.asarray(m)
        g = np.broadcast_to(np.asarray(prob(m), dtype=float), m.shape)
        return g * (m <= 1.0) + (1.0 - g) * (m >= -1.0)

    return expect_q_over_margin(dist, theta, weight, breakpoints=(-1.0, 1.0), **kwargs)


def _kappa_assemble(mu: np.ndarray, cov: np.ndarray, nu: np.ndarray,
                    k0: float, k1: float, k2c: float) -> np.ndarray:
    """Bordered Hessian from the scalar moments k_j = integral of
    z^j-style weights: k0 (constant), k1 (linear in z) and k2c (quadratic,
    centered as z^2 - nu'cov nu)."""
    d = mu.shape[0] + 1
    s2 = float(nu @ cov @ nu)
    cn = cov @ nu
    h = np.zeros((d, d))
    h[0, 0] = k0
    h[0, 1:] = k0 * mu + (k1 / s2) * cn
    h[1:, 0] = h[0, 1:]
    h[1:, 1:] = (k0 * (np.outer(mu, mu) + cov)
                 + (k1 / s2) * (np.outer(cn, mu) + np.outer(mu, cn))
                 + (k2c / s2 ** 2) * np.outer(cn, cn))
    return h


def hessian_kappa(design: Design, theta: Theta, loss: Loss, **kwargs) -> BorderedMoment:
    """Cross-check route: assemble the Hessian from three scalar moments of
    the margin law instead of integrating the full conditional matrix.
    Single-Gaussian designs only."""
    if not isinstance(design.dist, GaussianPredictors):
        raise ValueError("scalar-moment assembly is implemented for single "
                         "Gaussian designs only")
    if theta.beta_norm() == 0.0:
        raise DegenerateMarginError("scalar-moment assembly needs beta != 0")
    mu, cov = design.dist.mean, design.dist.cov
    nu = theta.beta / theta.beta_norm()
    s2 = float(nu @ cov @ nu)
    btmu = float(theta.beta @ mu)

    def z_of(m):
        return (np.asarray(m) - theta.alpha - btmu) / theta.beta_norm()

    if loss is Loss.LOGISTIC:
        def values(m):
            z = z_of(m)
            w = _logistic_weight(m)
            return np.stack([w, z * w, (z * z - s2) * w], axis=-1)

        k0, k1, k2c = integrate_over_margin(design.dist, theta, values, **kwargs)
    else:
        prob = _prob_given_margin(design, theta)
        law = margin_law(design.dist, theta)
        w_pos = float(prob(1.0)) * margin_density(law, 1.0)
        w_neg = (1.0 - float(prob(-1.0))) * margin_density(law, -1.0)
        z_pos, z_neg = float(z_of(1.0)), float(z_of(-1.0))
        k0 = w_pos + w_neg
        k1 = z_pos * w_pos + z_neg * w_neg
        k2c = (z_pos ** 2 - s2) * w_pos + (z_neg ** 2 - s2) * w_neg
    return BorderedMoment(_kappa_assemble(mu, cov, nu, float(k0), float(k1), float(k2c)))


@dataclass(frozen=True)
class RiskCurvature:
    """Analytic curvature pair (H, J) of a risk at a parameter theta."""

    hessian: BorderedMoment
    score_cov: BorderedMoment
    theta: Theta
    method: CurvatureMethod = CurvatureMethod.QUADRATURE

    def to_json(self) -> str:
        return json.dumps({
            "theta": {
                "alpha": self.theta.alpha,
                "beta": self.theta.beta.tolist(),
                "loss": self.theta.loss.value,
                "cstar": self.theta.cstar,
            },
            "hessian": self.hessian.matrix.tolist(),
            "score_cov": self.score_cov.matrix.tolist(),
            "method": self.method.value,
        }, indent=2)

    @staticmethod
    def from_json(text: str) -> "RiskCurvature":
        doc = json.loads(text)
        th = doc["theta"]
        theta = Theta(alpha=float(th["alpha"]), beta=np.asarray(th["beta"]),
                      loss=Loss(th["loss"]),
                      cstar=None if th["cstar"] is None else float(th["cstar"]))
        return RiskCurvature(
            hessian=BorderedMoment(np.asarray(doc["hessian"])),
            score_cov=BorderedMoment(np.asarray(doc["score_cov"])),
            theta=theta,
            method=CurvatureMethod(doc["method"]),
        )


def risk_curvature(design: Design, theta: Theta) -> RiskCurvature:
    """Hessian and score covariance for theta's loss at theta."""
    if theta.loss is Loss.LOGISTIC:
        h = hessian_logistic(design, theta)
        j = score_cov_logistic(design, theta)
    else:
        h = hessian_svm(design, theta)
        j = score_cov_hinge(design, theta)
    return RiskCurvature(hessian=h, score_cov=j, theta=theta)
