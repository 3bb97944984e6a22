"""Generalized-irrepresentability index: the quantity

    eta = 1 - || H_{Ac,A} [H_{A,A} - H_{A,0} H_{0,0}^{-1} H_{0,A}]^{-1} sign(beta_A) ||_inf

computed from any bordered risk Hessian, plus the second-moment shortcut
valid for zero-mean Gaussian predictors. eta > 0 certifies that some
regularization schedule recovers all coefficient signs with probability
approaching one; eta < 0 rules that out.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import ActivePartition, GaussianPredictors, Loss, PredictorDistribution
from .moments import BorderedMoment

_MAX_CONDITION = 1e12


class SingularBlockError(RuntimeError):
    """The active-block Schur complement is numerically singular."""


class Verdict(enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    BORDERLINE = "borderline"


def _solve_checked(block: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    eigs = np.linalg.eigvalsh(block)
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > _MAX_CONDITION:
        raise SingularBlockError(
            f"{what} has condition {eigs[-1] / max(eigs[0], 0.0):.3g} "
            f"(min eigenvalue {eigs[0]:.3g})")
    return cho_solve(cho_factor(block, lower=True), rhs)


def gi_index(H: BorderedMoment, partition: ActivePartition) -> float:
    """GI index from a bordered Hessian and the population sign pattern.

    The matrix is partitioned by (intercept, active, inactive); the active
    block is corrected for the unpenalized intercept before inversion.
    Returns exactly 1.0 when the inactive set is empty.
    """
    mat = H.matrix
    if partition.p + 1 != mat.shape[0]:
        raise ValueError("partition and Hessian dimensions disagree")
    if partition.active.size == 0:
        raise ValueError("active set must be nonempty")
    act = partition.active + 1
    inact = partition.inactive + 1
    h00 = mat[0, 0]
    if h00 <= 0.0:
        raise SingularBlockError("intercept curvature is not positive")
    schur = mat[np.ix_(act, act)] - np.outer(mat[act, 0], mat[0, act]) / h00
    z = _solve_checked(schur, partition.sign_active.astype(float),
                       "intercept-corrected active block")
    if inact.size == 0:
        return 1.0
    return 1.0 - float(np.max(np.abs(mat[np.ix_(inact, act)] @ z)))


def gi_index_second_moment(dist: PredictorDistribution, partition: ActivePartition) -> float:
    """GI index straight from predictor second moments:
    1 - ||E[X_Ac X_A'] E[X_A X_A']^{-1} sign(beta_A)||_inf.

    Valid for zero-mean Gaussian predictors only, where it coincides with the
    Hessian-based index for any margin-weighted risk."""
    if not isinstance(dist, GaussianPredictors):
        raise ValueError("second-moment shortcut requires Gaussian predictors")
    if np.any(dist.mean != 0.0):
        raise ValueError("second-moment shortcut requires zero-mean predictors")
    if partition.active.size == 0:
        raise ValueError("active set must be nonempty")
    act, inact = partition.active, partition.inactive
    cov = dist.cov
    z = _solve_checked(cov[np.ix_(act, act)], partition.sign_active.astype(float),
                       "active second-moment block")
    if inact.size == 0:
        return 1.0
    return 1.0 - float(np.max(np.abs(cov[np.ix_(inact, act)] @ z)))


def classify(eta: float, margin: float = 1e-3) -> Verdict:
    """Three-way verdict with a dead zone of half-width margin around 0."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if eta > margin:
        return Verdict.CONSISTENT
    if eta < -margin:
        return Verdict.INCONSISTENT
    return Verdict.BORDERLINE


GI_CSV_HEADER = ["design_id", "eta_logistic", "eta_svm", "eta_second_moment", "verdict"]


@dataclass(frozen=True)
class GiReport:
    """GI indices for one design by every available route, with the verdict
    of the leading route (logistic Hessian when supplied, then hinge, then
    the second-moment shortcut)."""

    design_id: str
    eta_by_loss: dict = field(default_factory=dict)
    eta_second_moment: float | None = None
    margin: float = 1e-3

    @property
    def verdict(self) -> Verdict:
        for loss in (Loss.LOGISTIC, Loss.HINGE):
            if loss in self.eta_by_loss:
                return classify(self.eta_by_loss[loss], self.margin)
        if self.eta_second_moment is not None:
            return classify(self.eta_second_moment, self.margin)
        raise ValueError("report carries no eta value")

    def csv_row(self) -> list:
        def fmt(x):
            return "" if x is None else format(x, ".17g")

        return [
            self.design_id,
            fmt(self.eta_by_loss.get(Loss.LOGISTIC)),
            fmt(self.eta_by_loss.get(Loss.HINGE)),
            fmt(self.eta_second_moment),
            self.verdict.value,
        ]
