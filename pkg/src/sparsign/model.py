"""Domain vocabulary: probability profiles, predictor distributions, designs,
fitted parameters and active-set partitions.

Everything here is immutable after construction and safe to share across
threads. Arrays handed to constructors are copied and marked read-only.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class ProbabilityProfile(enum.Enum):
    """Conditional class-probability curve g with P(Y=1|X) = g(zeta + X'nu)."""

    LOGISTIC = "logistic"
    BLIP = "blip"


class Loss(enum.Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"


def profile_eval(profile: ProbabilityProfile, r) -> np.ndarray | float:
    """Evaluate a probability profile at (an array of) real margins.

    The logistic curve is e^r/(1+e^r); the blip curve is
    (1/2)*(1 + r*exp((1-r^2)/2)), which attains 0 and 1 exactly at r = -1, +1
    and decays back to 1/2 in both tails. Both satisfy g(r) + g(-r) = 1.
    """
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("profile argument must be finite")
    if profile is ProbabilityProfile.LOGISTIC:
        out = expit(arr)
    elif profile is ProbabilityProfile.BLIP:
        # r*r may overflow to inf for huge finite r; exp(-inf) = 0 keeps the
        # product finite because r itself is finite.
        with np.errstate(over="ignore"):
            out = 0.5 * (1.0 + arr * np.exp((1.0 - arr * arr) / 2.0))
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown profile {profile!r}")
    if arr.ndim == 0:
        return float(out)
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _cholesky_or_raise(cov: np.ndarray, what: str) -> None:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise ValueError(f"{what} must be symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{what} must be positive definite") from exc


@dataclass(frozen=True)
class GaussianPredictors:
    """Multivariate Gaussian predictor family N(mean, cov)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(np.atleast_1d(self.mean)))
        object.__setattr__(self, "cov", _readonly(self.cov))
        _cholesky_or_raise(self.cov, "cov")
        if self.mean.shape != (self.cov.shape[0],):
            raise ValueError("mean and cov dimensions disagree")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def components(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """(weight, mean, cov) triples; a plain Gaussian is one component."""
        return [(1.0, self.mean, self.cov)]


@dataclass(frozen=True)
class MixturePredictors:
    """Equal-weight two-component Gaussian mixture with means +mu and -mu
    and common covariance. This is the only mixture family supported at
    construction; the moment machinery itself runs over component lists."""

    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _readonly(np.atleast_1d(self.mu)))
        object.__setattr__(self, "cov", _readonly(self.cov))
        _cholesky_or_raise(self.cov, "cov")
        if self.mu.shape != (self.cov.shape[0],):
            raise ValueError("mu and cov dimensions disagree")

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def components(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        return [(0.5, self.mu, self.cov), (0.5, -self.mu, self.cov)]


PredictorDistribution = GaussianPredictors | MixturePredictors


@dataclass(frozen=True)
class Design:
    """Joint distribution of (Y, X): P(Y=1|X) = profile(zeta + X'nu) with a
    unit normal direction nu supported on the first q coordinates."""

    p: int
    q: int
    nu: np.ndarray
    sigma: float
    profile: ProbabilityProfile
    dist: PredictorDistribution
    zeta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nu", _readonly(np.atleast_1d(self.nu)))
        if not (1 <= self.q <= self.p):
            raise ValueError("need 1 <= q <= p")
        if self.nu.shape != (self.p,):
            raise ValueError("nu must have length p")
        if self.dist.dim != self.p:
            raise ValueError("dist dimension must equal p")
        if abs(np.linalg.norm(self.nu) - 1.0) > 1e-10:
            raise ValueError("nu must be a unit vector")
        if np.any(self.nu[self.q:] != 0.0):
            raise ValueError("nu must vanish beyond the first q coordinates")
        if np.any(self.nu[: self.q] == 0.0):
            raise ValueError("nu must be nonzero on the first q coordinates")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def to_json(self) -> str:
        doc = {
            "p": self.p,
            "q": self.q,
            "nu": self.nu.tolist(),
            "sigma": self.sigma,
            "profile": self.profile.value,
        }
        if isinstance(self.dist, GaussianPredictors):
            doc["dist"] = {
                "variant": "gaussian",
                "mean": self.dist.mean.tolist(),
                "cov": self.dist.cov.tolist(),
            }
        else:
            doc["dist"] = {
                "variant": "mixture",
                "mu": self.dist.mu.tolist(),
                "cov": self.dist.cov.tolist(),
            }
        if self.zeta != 0.0:
            doc["zeta"] = self.zeta
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "Design":
        doc = json.loads(text)
        d = doc["dist"]
        if d["variant"] == "gaussian":
            dist = GaussianPredictors(np.asarray(d["mean"]), np.asarray(d["cov"]))
        elif d["variant"] == "mixture":
            dist = MixturePredictors(np.asarray(d["mu"]), np.asarray(d["cov"]))
        else:
            raise ValueError(f"unknown dist variant {d['variant']!r}")
        return Design(
            p=int(doc["p"]),
            q=int(doc["q"]),
            nu=np.asarray(doc["nu"]),
            sigma=float(doc["sigma"]),
            profile=ProbabilityProfile(doc["profile"]),
            dist=dist,
            zeta=float(doc.get("zeta", 0.0)),
        )


@dataclass(frozen=True)
class Theta:
    """Population risk minimizer (alpha, beta) for a given loss.

    When produced by the c* finder, beta = cstar * nu for the design's
    direction nu and cstar records the scalar.
    """

    alpha: float
    beta: np.ndarray
    loss: Loss
    cstar: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(np.atleast_1d(self.beta)))
        if not np.isfinite(self.alpha) or not np.all(np.isfinite(self.beta)):
            raise ValueError("theta must be finite")

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta))


def default_zero_tol(beta: np.ndarray) -> float:
    """Round-off guard for deciding when an estimated coefficient is zero."""
    beta = np.asarray(beta, dtype=float)
    scale = float(np.max(np.abs(beta))) if beta.size else 0.0
    return 1e-8 * max(1.0, scale)


@dataclass(frozen=True)
class ActivePartition:
    """Index partition A = {j: beta_j != 0} with the signs over A."""

    active: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    inactive: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    sign_active: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __post_init__(self):
        for name in ("active", "inactive"):
            a = np.array(getattr(self, name), dtype=int, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        s = np.array(self.sign_active, dtype=int, copy=True)
        s.setflags(write=False)
        object.__setattr__(self, "sign_active", s)
        if self.sign_active.shape != self.active.shape:
            raise ValueError("sign_active must align with active")
        if np.intersect1d(self.active, self.inactive).size:
            raise ValueError("active and inactive sets overlap")

    @property
    def p(self) -> int:
        return self.active.size + self.inactive.size


def partition_from_beta(beta: np.ndarray, zero_tol: float | None = None) -> ActivePartition:
    """Split coordinates into active/inactive by |beta_j| > zero_tol."""
    beta = np.asarray(beta, dtype=float)
    if zero_tol is None:
        zero_tol = default_zero_tol(beta)
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    active = np.flatnonzero(np.abs(beta) > zero_tol)
    inactive = np.setdiff1d(np.arange(beta.size), active)
    signs = np.sign(beta[active]).astype(int)
    return ActivePartition(active=active, inactive=inactive, sign_active=signs)


def sign_vector(v: np.ndarray) -> np.ndarray:
    """Componentwise three-valued sign with sign(0) = 0."""
    return np.sign(np.asarray(v, dtype=float)).astype(int)
