"""Learning-curve fitting: loss = alpha * n^(-beta) + gamma.

The floor gamma is the quantity of interest: with the test distribution
held fixed, differences in gamma between training datasets isolate the
transfer gap. Fitting happens in log space by default because losses span
orders of magnitude; the solver profiles gamma on a grid (each candidate
reduces to a closed-form log-log regression for alpha and beta), narrows
it by golden-section search, then polishes all three parameters with a
bounded least-squares step that is only accepted if it improves the
objective.
"""

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import ValidationError

GAMMA_GRID_POINTS = 64
GAMMA_EPS = 1e-6
BOOTSTRAP_RESAMPLES = 1000


class Split(Enum):
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True)
class LearningCurvePoint:
    n_tracks: int
    loss: float
    split_label: Split
    dataset_label: str

    def __post_init__(self) -> None:
        if self.n_tracks < 1:
            raise ValidationError("n_tracks must be >= 1")
        if not (math.isfinite(self.loss) and self.loss > 0):
            raise ValidationError("loss must be finite and positive")


@dataclass(frozen=True)
class LearningCurveFit:
    alpha: float
    beta: float
    gamma: float
    rmse_log: float
    n_points: int
    dataset_label: str = ""
    split_label: Split | None = None
    points: tuple[LearningCurvePoint, ...] = ()

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0 and self.gamma >= 0):
            raise ValidationError(
                f"fit constraints violated: alpha={self.alpha} beta={self.beta} "
                f"gamma={self.gamma}"
            )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_label,
            "split": self.split_label.value if self.split_label else None,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "rmse_log": self.rmse_log,
            "n_points": self.n_points,
        }


def predict_loss(fit: LearningCurveFit, n: float) -> float:
    """Model loss at training size n; decreasing in n with infimum gamma."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    return fit.alpha * n ** (-fit.beta) + fit.gamma


def _objective(log_n, log_loss, alpha, beta, gamma, log_space):
    pred = alpha * np.exp(-beta * log_n) + gamma
    if log_space:
        residual = log_loss - np.log(pred)
    else:
        residual = np.exp(log_loss) - pred
    return float(np.dot(residual, residual))


def _profile_alpha_beta(log_n, log_loss, loss, gamma, log_space):
    """Closed-form (alpha, beta) for a fixed gamma via log-log regression."""
    y = np.log(loss - gamma)
    x = log_n
    xm, ym = x.mean(), y.mean()
    var = float(np.dot(x - xm, x - xm))
    slope = float(np.dot(x - xm, y - ym)) / var
    beta = max(-slope, 1e-12)
    intercept = ym + beta * xm  # regression with the clamped slope
    alpha = float(np.exp(intercept))
    return alpha, beta, _objective(log_n, log_loss, alpha, beta, gamma, log_space)


def _golden_section(fun, lo, hi, iterations=60):
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    return (a + b) / 2


def fit_learning_curve(
    points: Sequence[LearningCurvePoint],
    log_space: bool = True,
    warm_start: tuple[float, float, float] | None = None,
) -> LearningCurveFit:
    """Fit (alpha, beta, gamma) to measured (n, loss) points.

    Requires at least 4 points over at least 3 distinct n values. The fit
    is deterministic. ``warm_start`` skips the gamma profiling stage and
    goes straight to the local polish (used by the bootstrap).
    """
    if len(points) < 4:
        raise ValidationError("need at least 4 points to fit a learning curve")
    n_values = np.array([p.n_tracks for p in points], dtype=float)
    losses = np.array([p.loss for p in points], dtype=float)
    if len(set(n_values.tolist())) < 3:
        raise ValidationError("need at least 3 distinct n values")
    datasets = {p.dataset_label for p in points}
    splits = {p.split_label for p in points}
    if len(datasets) > 1 or len(splits) > 1:
        raise ValidationError("fit one (dataset, split) pair at a time")

    log_n = np.log(n_values)
    log_loss = np.log(losses)
    min_loss = float(losses.min())

    candidates: list[tuple[float, float, float, float]] = []  # (obj, a, b, g)

    if warm_start is None:
        gammas = np.concatenate((
            [0.0],
            np.geomspace(GAMMA_EPS * min_loss, min_loss * (1 - GAMMA_EPS),
                         GAMMA_GRID_POINTS),
        ))
        profiled = []
        for gamma in gammas:
            alpha, beta, obj = _profile_alpha_beta(log_n, log_loss, losses, gamma,
                                                   log_space)
            profiled.append((obj, alpha, beta, float(gamma)))
        profiled.sort(key=lambda t: t[0])
        candidates.append(profiled[0])

        # golden-section refinement of gamma between the grid neighbours of
        # the winner (the profile objective is well-behaved near the optimum)
        best_gamma = profiled[0][3]
        order = np.searchsorted(gammas, best_gamma)
        lo = float(gammas[max(order - 1, 0)])
        hi = float(gammas[min(order + 1, len(gammas) - 1)])
        if hi > lo:
            def profile_obj(gamma):
                return _profile_alpha_beta(log_n, log_loss, losses, gamma,
                                           log_space)[2]

            gamma_star = _golden_section(profile_obj, lo, hi)
            alpha, beta, obj = _profile_alpha_beta(log_n, log_loss, losses,
                                                   gamma_star, log_space)
            candidates.append((obj, alpha, beta, gamma_star))
    else:
        alpha0, beta0, gamma0 = warm_start
        obj0 = _objective(log_n, log_loss, alpha0, beta0, gamma0, log_space)
        candidates.append((obj0, alpha0, beta0, gamma0))

    # local polish of all three parameters; keep only if it improves
    best = min(candidates, key=lambda t: t[0])
    _, alpha0, beta0, gamma0 = best

    def residuals(params):
        alpha, beta, gamma = np.exp(params[0]), np.exp(params[1]), params[2]
        pred = alpha * np.exp(-beta * log_n) + gamma
        if log_space:
            return log_loss - np.log(pred)
        return losses - pred

    x0 = np.array([math.log(alpha0), math.log(max(beta0, 1e-12)), gamma0])
    try:
        result = least_squares(
            residuals, x0,
            bounds=([-np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf]),
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        alpha_r, beta_r = float(np.exp(result.x[0])), float(np.exp(result.x[1]))
        gamma_r = float(result.x[2])
        obj_r = _objective(log_n, log_loss, alpha_r, beta_r, gamma_r, log_space)
        candidates.append((obj_r, alpha_r, beta_r, gamma_r))
    except Exception:
        pass  # keep the profiled solution

    obj, alpha, beta, gamma = min(candidates, key=lambda t: t[0])
    log_rmse = math.sqrt(
        _objective(log_n, log_loss, alpha, beta, gamma, True) / len(points)
    )
    return LearningCurveFit(
        alpha=alpha, beta=beta, gamma=max(gamma, 0.0), rmse_log=log_rmse,
        n_points=len(points),
        dataset_label=next(iter(datasets)),
        split_label=next(iter(splits)),
        points=tuple(points),
    )


@dataclass(frozen=True)
class GapEntry:
    dataset_label: str
    gamma: float
    ci_low: float
    ci_high: float
    tied_with_previous: bool

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_label,
            "gamma": self.gamma,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "tied_with_previous": self.tied_with_previous,
        }


def bootstrap_gamma_ci(
    fit: LearningCurveFit,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
    confidence: float = 0.95,
) -> tuple[float, float]:
    """Residual-bootstrap confidence interval for gamma.

    Log-space residuals are resampled with replacement around the fitted
    curve; each resample is refit from the point estimate (warm start).
    Substreams are seeded per resample, so any execution order gives the
    same interval.
    """
    if not fit.points:
        raise ValidationError("fit carries no points; cannot bootstrap")
    n_values = np.array([p.n_tracks for p in fit.points], dtype=float)
    log_pred = np.log([predict_loss(fit, n) for n in n_values])
    log_obs = np.log([p.loss for p in fit.points])
    residuals = log_obs - log_pred
    seeds = np.random.SeedSequence(seed).spawn(n_resamples)
    gammas = np.empty(n_resamples)
    template = list(fit.points)
    for k in range(n_resamples):
        rng = np.random.default_rng(seeds[k])
        resampled = rng.choice(residuals, size=len(residuals), replace=True)
        synthetic = [
            LearningCurvePoint(p.n_tracks, float(np.exp(lp + r)), p.split_label,
                               p.dataset_label)
            for p, lp, r in zip(template, log_pred, resampled)
        ]
        refit = fit_learning_curve(
            synthetic, warm_start=(fit.alpha, fit.beta, fit.gamma)
        )
        gammas[k] = refit.gamma
    tail = (1 - confidence) / 2 * 100
    lo, hi = np.percentile(gammas, [tail, 100 - tail])
    return float(lo), float(hi)


def compare_gaps(
    fits: Mapping[str, LearningCurveFit],
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
) -> list[GapEntry]:
    """Rank datasets by ascending loss floor, with bootstrap intervals.

    All fits must target the same split. Adjacent entries whose intervals
    overlap are flagged as statistically tied.
    """
    if not fits:
        raise ValidationError("no fits to compare")
    splits = {fit.split_label for fit in fits.values()}
    if len(splits) != 1:
        raise ValidationError(f"mismatched split labels: {sorted(s.value for s in splits if s)}")
    scored = []
    for label in sorted(fits):
        fit = fits[label]
        ci_low, ci_high = bootstrap_gamma_ci(fit, n_resamples=n_resamples, seed=seed)
        scored.append((fit.gamma, label, ci_low, ci_high))
    scored.sort()
    ranking: list[GapEntry] = []
    for i, (gamma, label, ci_low, ci_high) in enumerate(scored):
        tied = bool(i > 0 and scored[i - 1][3] >= ci_low)
        ranking.append(GapEntry(label, gamma, ci_low, ci_high, tied))
    return ranking


def read_points_csv(path: str | Path) -> list[LearningCurvePoint]:
    """Read measured losses from a ``dataset,split,n_tracks,loss`` CSV."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        expected = ["dataset", "split", "n_tracks", "loss"]
        if reader.fieldnames != expected:
            raise ValidationError(
                f"{path}: expected header {','.join(expected)}, "
                f"got {','.join(reader.fieldnames or [])}"
            )
        points = []
        for row_number, row in enumerate(reader, start=2):
            try:
                points.append(
                    LearningCurvePoint(
                        n_tracks=int(row["n_tracks"]),
                        loss=float(row["loss"]),
                        split_label=Split(row["split"].strip().lower()),
                        dataset_label=row["dataset"].strip(),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise ValidationError(f"{path}:{row_number}: {exc}") from exc
    if not points:
        raise ValidationError(f"{path}: no data rows")
    return points


def group_points(
    points: Iterable[LearningCurvePoint],
) -> dict[tuple[str, Split], list[LearningCurvePoint]]:
    groups: dict[tuple[str, Split], list[LearningCurvePoint]] = {}
    for point in points:
        groups.setdefault((point.dataset_label, point.split_label), []).append(point)
    return groups
