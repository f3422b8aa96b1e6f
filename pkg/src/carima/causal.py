"""Counterfactual effect estimation and testing.

Fit a model on pre-intervention data, forecast the post-period under no
intervention, and read point / cumulative / temporal-average effects off the
observed-minus-forecast gap.  Under the no-effect null each estimator is a
finite moving average of future innovations, which yields exact Gaussian
test distributions; a residual bootstrap provides empirical critical values
when normality is in doubt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    EmptyPostPeriod,
    TooFewResiduals,
)
from .sarima import FittedModel, forecast_adjusted, psi_weights
from .series import (
    TimeSeries,
    difference,
    difference_matrix,
    expand_diff_polynomial,
    invert_diff_polynomial,
)

ESTIMANDS = ("point", "cumulative", "average")
SIGNIFICANCE_LADDER = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))


@dataclass(frozen=True)
class TreatmentPath:
    """Binary assignment path with a single persistent intervention at t_star.

    ``t_star`` counts the untreated prefix: w[i] = 0 for i < t_star.
    """

    w: np.ndarray
    t_star: int

    def __init__(self, w, t_star: int):
        w = np.asarray(w, dtype=int)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t_star", int(t_star))


def validate_treatment(path: TreatmentPath) -> list:
    """Check the single-persistent-intervention contract.

    Returns a list of machine-readable violation dicts; empty means ok.
    """
    violations = []
    w, t_star = path.w, path.t_star
    if not (0 < t_star <= w.size):
        violations.append({"code": "bad_t_star", "detail": f"t_star={t_star} outside 1..{w.size}"})
        return violations
    bad = np.nonzero(w[:t_star] != 0)[0]
    if bad.size:
        violations.append(
            {"code": "anticipated_treatment", "detail": f"treatment before t_star at index {bad[0]}"}
        )
    post = w[t_star:]
    if post.size and not (post == post[0]).all():
        violations.append({"code": "non_persistent", "detail": "post-period assignment toggles"})
    if ((w != 0) & (w != 1)).any():
        violations.append({"code": "non_binary", "detail": "assignment values outside {0,1}"})
    return violations


@dataclass(frozen=True)
class EffectPath:
    """Point, cumulative and running-average effect estimates over a horizon.

    ``delta_hat[j] = sum_{h<=j} tau_hat[h]`` over observed indices and
    ``tau_bar_hat[j] = delta_hat[j] / n_observed[j]``; with complete data the
    divisor is j+1.  ``var_*`` arrays hold the null variances of the three
    estimators at each horizon.
    """

    scale: str
    horizon: int
    tau_hat: np.ndarray
    delta_hat: np.ndarray
    tau_bar_hat: np.ndarray
    missing: np.ndarray
    n_observed: np.ndarray
    var_tau: np.ndarray
    var_delta: np.ndarray
    var_tau_bar: np.ndarray
    sigma2: float
    psi: np.ndarray


@dataclass(frozen=True)
class EffectTest:
    """A two-sided test of one estimand at one horizon."""

    estimand: str
    scale: str
    k: int
    estimate: float
    std_error: float
    statistic: float
    p_value: float
    interval: tuple
    alpha: float
    method: str
    n_boot: Optional[int] = None

    @property
    def stars(self) -> str:
        for cutoff, mark in SIGNIFICANCE_LADDER:
            if self.p_value < cutoff:
                return mark
        return ""


@dataclass(frozen=True)
class CausalReport:
    """Full output of one counterfactual analysis run."""

    model: FittedModel
    paths: dict
    tests: tuple
    counterfactual: np.ndarray
    counterfactual_variance: np.ndarray
    observed_post: np.ndarray
    horizons: tuple
    t_star: int
    alpha: float
    log_scale: bool
    multiplicative_summary: Optional[dict]
    notes: tuple

    def tests_for(self, estimand: str, scale: str = "original"):
        return [t for t in self.tests if t.estimand == estimand and t.scale == scale]


# ---------------------------------------------------------------------------
# effect paths


def _null_weight_matrix(psi: np.ndarray, observed: np.ndarray) -> np.ndarray:
    """Running innovation weights of the observed-index cumulative effect.

    Entry [j-1, k-1] is the weight on eps_{t*+j} in sum_{h<=k, h observed}
    tau_hat_{t*+h} under the null; with everything observed, column k holds
    the reversed cumulative psi sums of the cumulative-effect variance.
    """
    k = psi.size
    # rows j = 1..k, columns h = 1..k: o_h * psi_{h-j} for h >= j
    tri = np.zeros((k, k))
    for j in range(k):
        tri[j, j:] = psi[: k - j] * observed[j:]
    return np.cumsum(tri, axis=1)


def _effect_path(
    tau: np.ndarray,
    missing: np.ndarray,
    psi: np.ndarray,
    sigma2: float,
    scale: str,
) -> EffectPath:
    k = tau.size
    observed = (~missing).astype(float)
    tau_filled = np.where(missing, 0.0, tau)
    delta = np.cumsum(tau_filled)
    n_obs = np.cumsum(observed)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau_bar = np.where(n_obs > 0, delta / np.maximum(n_obs, 1), np.nan)
    var_tau = sigma2 * np.cumsum(psi**2)
    var_tau = np.where(missing, np.nan, var_tau)
    W = _null_weight_matrix(psi, observed)
    var_delta = sigma2 * (W**2).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        var_tau_bar = np.where(n_obs > 0, var_delta / np.maximum(n_obs, 1) ** 2, np.nan)
    return EffectPath(
        scale=scale,
        horizon=k,
        tau_hat=np.where(missing, np.nan, tau),
        delta_hat=delta,
        tau_bar_hat=tau_bar,
        missing=missing.copy(),
        n_observed=n_obs.astype(int),
        var_tau=var_tau,
        var_delta=var_delta,
        var_tau_bar=var_tau_bar,
        sigma2=sigma2,
        psi=psi,
    )

def _post_design(model: FittedModel, k: int, X_post) -> Optional[np.ndarray]:
    """Regressor rows for the post period, validated against the model."""
    has_const = "const" in model.regressor_names
    m_user = len(model.regressor_names) - (1 if has_const else 0)
    if m_user == 0:
        if X_post is not None and np.size(X_post):
            raise DimensionMismatch("model has no regressors but X_post was supplied")
        return np.ones((k, 1)) if has_const else None
    if X_post is None:
        raise DimensionMismatch(f"model has {m_user} regressors; X_post is required")
    Xp = np.asarray(X_post, dtype=float)
    if Xp.ndim == 1:
        Xp = Xp[:, None]
    if Xp.shape != (k, m_user):
        raise DimensionMismatch(f"X_post must be {k} x {m_user}, got {Xp.shape}")
    return np.column_stack([np.ones(k), Xp]) if has_const else Xp


def estimate_effects_transformed(model: FittedModel, y_post: TimeSeries, X_post=None) -> EffectPath:
    """Effects on the stationarity-transformed, regression-adjusted scale.

    The observed transformed series minus its forecast gives the point
    effects; cumulative and average paths follow by the exact running-sum
    identities.  Variances plug in the fitted sigma2 and psi weights;
    missing post observations are skipped and the running divisors count
    observed indices only.
    """
    k = len(y_post)
    if k == 0:
        raise EmptyPostPeriod("post period is empty")
    Xp = _post_design(model, k, X_post)
    diff = model.order.diff
    # difference across the pre/post boundary so early windows use pre values
    tail = model.y.slice(len(model.y) - diff.total_lags, len(model.y)) if diff.total_lags else None
    if tail is not None:
        full_vals = np.concatenate([tail.values, y_post.values])
        full_miss = np.concatenate([tail.missing, y_post.missing])
        dy_post = difference(TimeSeries(full_vals, full_miss), diff)
    else:
        dy_post = y_post
    if Xp is not None:
        if diff.total_lags:
            stacked = np.vstack([model.X[-diff.total_lags :], Xp])
            DXp = difference_matrix(stacked, diff)[-k:]
        else:
            DXp = Xp
        reg = DXp @ model.params.beta
        reg_missing = np.isnan(DXp).any(axis=1)
    else:
        reg = np.zeros(k)
        reg_missing = np.zeros(k, dtype=bool)
    s_obs = dy_post.values - reg
    missing = dy_post.missing | reg_missing
    s_hat = forecast_adjusted(model, k)
    tau = np.where(missing, np.nan, s_obs - s_hat)
    psi = psi_weights(model.params, model.order, k)
    return _effect_path(tau, missing, psi, model.params.sigma2, scale="transformed")


def estimate_effects_original(model: FittedModel, y_post: TimeSeries, X_post=None) -> EffectPath:
    """Effects on the original (undifferenced) scale.

    Computed as observed level minus the integrated counterfactual forecast;
    on complete data this is cross-checked against the inverse-differencing
    convolution of the transformed effects (they are algebraically
    identical) to 1e-8.
    """
    k = len(y_post)
    if k == 0:
        raise EmptyPostPeriod("post period is empty")
    diff = model.order.diff
    transformed = estimate_effects_transformed(model, y_post, X_post)
    if diff.is_identity:
        return EffectPath(
            scale="original",
            horizon=transformed.horizon,
            tau_hat=transformed.tau_hat,
            delta_hat=transformed.delta_hat,
            tau_bar_hat=transformed.tau_bar_hat,
            missing=transformed.missing,
            n_observed=transformed.n_observed,
            var_tau=transformed.var_tau,
            var_delta=transformed.var_delta,
            var_tau_bar=transformed.var_tau_bar,
            sigma2=transformed.sigma2,
            psi=transformed.psi,
        )
    from .sarima import forecast as sarima_forecast

    Xp_user = X_post
    fc = sarima_forecast(model, k, Xp_user, scale="original")
    tau_direct = y_post.values - fc.mean
    missing = y_post.missing.copy()
    a = expand_diff_polynomial(diff)
    b = invert_diff_polynomial(a, k).b
    if not transformed.missing.any() and not missing.any():
        tau_conv = np.convolve(b, np.where(transformed.missing, 0.0, transformed.tau_hat))[:k]
        gap = np.nanmax(np.abs(tau_conv - tau_direct)) if k else 0.0
        if gap > 1e-8 * max(1.0, float(np.nanmax(np.abs(tau_direct)))):
            raise AssertionError(
                f"original-scale effect routes disagree by {gap}; "
                "b-convolution and counterfactual subtraction should be identical"
            )
    psi_y = fc.psi
    tau = np.where(missing, np.nan, tau_direct)
    return _effect_path(tau, missing, psi_y, model.params.sigma2, scale="original")


# ---------------------------------------------------------------------------
# hypothesis tests


def _estimate_and_variance(path: EffectPath, estimand: str, k: int):
    if estimand not in ESTIMANDS:
        raise ValueError(f"estimand must be one of {ESTIMANDS}, got {estimand!r}")
    if not (1 <= k <= path.horizon):
        raise DimensionMismatch(f"horizon {k} outside effect path of length {path.horizon}")
    i = k - 1
    if estimand == "point":
        return float(path.tau_hat[i]), float(path.var_tau[i])
    if estimand == "cumulative":
        return float(path.delta_hat[i]), float(path.var_delta[i])
    return float(path.tau_bar_hat[i]), float(path.var_tau_bar[i])


def gaussian_test(path: EffectPath, estimand: str, k: int, alpha: float = 0.05) -> EffectTest:
    """Two-sided test using the exact Gaussian null distribution."""
    est, var = _estimate_and_variance(path, estimand, k)
    if not np.isfinite(var) or var <= 0:
        raise DegenerateVariance(f"variance {var} at horizon {k} for {estimand}")
    if not np.isfinite(est):
        raise DegenerateVariance(f"{estimand} estimate missing at horizon {k}")
    se = float(np.sqrt(var))
    z = est / se
    p = float(2.0 * norm.sf(abs(z)))
    zq = float(norm.ppf(1.0 - alpha / 2.0))
    return EffectTest(
        estimand=estimand,
        scale=path.scale,
        k=k,
        estimate=est,
        std_error=se,
        statistic=z,
        p_value=p,
        interval=(est - zq * se, est + zq * se),
        alpha=alpha,
        method="gaussian",
    )


def _null_draws(path: EffectPath, estimand: str, k: int, eps_star: np.ndarray) -> np.ndarray:
    """Simulate the estimator under the null from resampled innovations.

    ``eps_star`` is (B, k); returns B draws of the chosen estimator.
    """
    psi = path.psi[:k]
    observed = (~path.missing[:k]).astype(float)
    if estimand == "point":
        return eps_star @ psi[::-1]
    W = _null_weight_matrix(psi, observed)
    w_k = W[:, k - 1]
    draws = eps_star @ w_k
    if estimand == "cumulative":
        return draws
    return draws / max(int(path.n_observed[k - 1]), 1)


def bootstrap_test(
    model: FittedModel,
    path: EffectPath,
    estimand: str,
    k: int,
    alpha: float = 0.05,
    n_boot: int = 2000,
    seed: Optional[int] = None,
) -> EffectTest:
    """Residual-bootstrap test with empirical critical values.

    B null paths of the estimator are simulated from its moving-average
    representation with innovations resampled i.i.d. (with replacement)
    from the centered raw model residuals.  Two-sided p-value uses the
    add-one convention; the interval comes from the empirical null
    quantiles around the estimate.  Deterministic under a given seed.
    """
    if n_boot < 199:
        raise ValueError("n_boot must be at least 199")
    resid = model.raw_residuals
    resid = resid[np.isfinite(resid)]
    if resid.size < 20:
        raise TooFewResiduals(f"only {resid.size} residuals available")
    est, _ = _estimate_and_variance(path, estimand, k)
    if not np.isfinite(est):
        raise DegenerateVariance(f"{estimand} estimate missing at horizon {k}")
    centered = resid - resid.mean()
    rng = np.random.default_rng(seed)
    eps_star = rng.choice(centered, size=(n_boot, k), replace=True)
    draws = _null_draws(path, estimand, k, eps_star)
    p = float((1.0 + np.sum(np.abs(draws) >= abs(est))) / (n_boot + 1.0))
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0])
    se = float(draws.std(ddof=1))
    stat = est / se if se > 0 else np.inf
    return EffectTest(
        estimand=estimand,
        scale=path.scale,
        k=k,
        estimate=est,
        std_error=se,
        statistic=float(stat),
        p_value=p,
        interval=(est + float(lo), est + float(hi)),
        alpha=alpha,
        method="bootstrap",
        n_boot=n_boot,
    )


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class AnalysisConfig:
    """Configuration of one counterfactual analysis run.

    ``intervention`` is either the integer count of pre-intervention
    observations or an ISO date (the last untreated day).  ``order`` is
    "auto" for BIC selection or an explicit (p, q, P, Q).  ``seed`` is
    mandatory so bootstrap results are reproducible.
    """

    series: str
    intervention: object
    horizons: tuple
    seed: int
    regressors: tuple = ()
    order: object = "auto"
    diff: tuple = (0, 0, 1)
    log_transform: bool = False
    test: str = "gaussian"
    alpha: float = 0.05
    n_boot: int = 2000

    def __post_init__(self):
        if self.test not in ("gaussian", "bootstrap", "both"):
            raise ValueError(f"test must be gaussian|bootstrap|both, got {self.test!r}")
        if not self.horizons:
            raise ValueError("at least one horizon is required")
        if self.seed is None:
            raise ValueError("seed is mandatory")
        object.__setattr__(self, "horizons", tuple(sorted(int(h) for h in self.horizons)))
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "diff", tuple(int(v) for v in self.diff))
        if self.order != "auto":
            object.__setattr__(self, "order", tuple(int(v) for v in self.order))

    def to_dict(self) -> dict:
        return {
            "series": self.series,
            "intervention": self.intervention,
            "horizons": list(self.horizons),
            "seed": self.seed,
            "regressors": list(self.regressors),
            "order": "auto" if self.order == "auto" else list(self.order),
            "diff": list(self.diff),
            "log_transform": self.log_transform,
            "test": self.test,
            "alpha": self.alpha,
            "n_boot": self.n_boot,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        d = dict(d)
        order = d.get("order", "auto")
        return cls(
            series=d["series"],
            intervention=d["intervention"],
            horizons=tuple(d["horizons"]),
            seed=d["seed"],
            regressors=tuple(d.get("regressors", ())),
            order="auto" if order == "auto" else tuple(order),
            diff=tuple(d.get("diff", (0, 0, 1))),
            log_transform=bool(d.get("log_transform", False)),
            test=d.get("test", "gaussian"),
            alpha=float(d.get("alpha", 0.05)),
            n_boot=int(d.get("n_boot", 2000)),
        )


def _resolve_t_star(intervention, dates) -> int:
    """Count of pre-intervention observations.

    An integer is taken as that count directly; a date string marks the
    last untreated calendar day.
    """
    if isinstance(intervention, (int, np.integer)):
        return int(intervention)
    from datetime import date as _date

    target = _date.fromisoformat(str(intervention))
    if dates is None:
        raise DimensionMismatch("intervention given as a date but the data has no calendar")
    for i, d in enumerate(dates):
        if d == target:
            return i + 1
    raise DimensionMismatch(f"intervention date {target} not found in the data calendar")


def run_carima(config: AnalysisConfig, data: dict, dates=None) -> CausalReport:
    """Run the full counterfactual pipeline on named series.

    Fits the model on the pre-intervention period only, forecasts the
    post period under no intervention, derives effect paths on both the
    transformed and original scales, and tests every requested estimand at
    every horizon.  With ``log_transform`` the target is log-ed first,
    effects stay on the log scale and exp(tau_bar)-1 is reported as the
    multiplicative summary.
    """
    from .sarima import ModelOrder, fit as sarima_fit, forecast as sarima_forecast, select_order
    from .series import DiffSpec

    if config.series not in data:
        raise DimensionMismatch(f"series column {config.series!r} not in data")
    y_full = data[config.series]
    if dates is None and y_full.dates is not None:
        dates = y_full.dates
    t_star = _resolve_t_star(config.intervention, dates)
    n = len(y_full)
    if not (0 < t_star < n):
        raise EmptyPostPeriod(f"intervention index {t_star} leaves no post period (n={n})")
    notes = [
        "test variances plug in estimated sigma2 and psi weights; "
        "parameter estimation error (including beta) is ignored",
        "cumulative and average effects over a horizon use observed indices "
        "only; divisors count observed post points",
    ]
    if config.log_transform:
        vals = y_full.values.copy()
        if np.nanmin(vals) <= 0:
            raise ValueError("log transform requires strictly positive observations")
        y_full = TimeSeries(np.log(vals), y_full.missing, y_full.start_index, y_full.dates)

    Xcols = []
    for name in config.regressors:
        if name not in data:
            raise DimensionMismatch(f"regressor column {name!r} not in data")
        Xcols.append(data[name].values)
    X_full = np.column_stack(Xcols) if Xcols else None

    y_pre = y_full.slice(0, t_star)
    y_post = y_full.slice(t_star, n)
    X_pre = X_full[:t_star] if X_full is not None else None
    X_post = X_full[t_star:] if X_full is not None else None
    k_post = len(y_post)
    horizons = tuple(h for h in config.horizons)
    for h in horizons:
        if h > k_post:
            raise DimensionMismatch(f"horizon {h} exceeds post period of {k_post} observations")

    d, D, s = config.diff
    diff = DiffSpec(d=d, D=D, s=s)
    names = list(config.regressors)
    if config.order == "auto":
        model = select_order(y_pre, X_pre, diff=diff, regressor_names=names or None)
    else:
        p, q, P, Q = config.order
        model = sarima_fit(y_pre, X_pre, ModelOrder(p, q, P, Q, diff), regressor_names=names or None)

    paths = {
        "transformed": estimate_effects_transformed(model, y_post, X_post),
        "original": estimate_effects_original(model, y_post, X_post),
    }
    fc = sarima_forecast(model, k_post, X_post, scale="original")

    methods = ("gaussian", "bootstrap") if config.test == "both" else (config.test,)
    seeds = np.random.SeedSequence(config.seed).generate_state(
        len(horizons) * len(ESTIMANDS) * 2 * 2
    )
    tests = []
    i_seed = 0
    for k in horizons:
        for scale in ("transformed", "original"):
            for estimand in ESTIMANDS:
                for method in methods:
                    seed = int(seeds[i_seed])
                    i_seed += 1
                    if method == "gaussian":
                        tests.append(gaussian_test(paths[scale], estimand, k, config.alpha))
                    else:
                        tests.append(
                            bootstrap_test(
                                model,
                                paths[scale],
                                estimand,
                                k,
                                config.alpha,
                                config.n_boot,
                                seed=seed,
                            )
                        )
    multiplicative = None
    if config.log_transform:
        rows = {}
        for k in horizons:
            t = next(
                t for t in tests if t.estimand == "average" and t.scale == "original" and t.k == k
            )
            rows[k] = {
                "estimate": float(np.expm1(t.estimate)),
                "interval": (float(np.expm1(t.interval[0])), float(np.expm1(t.interval[1]))),
            }
        multiplicative = rows
        notes.append("multiplicative summary is exp(average log effect) - 1 per horizon")
    return CausalReport(
        model=model,
        paths=paths,
        tests=tuple(tests),
        counterfactual=fc.mean,
        counterfactual_variance=fc.error_variance,
        observed_post=y_post.values,
        horizons=horizons,
        t_star=t_star,
        alpha=config.alpha,
        log_scale=config.log_transform,
        multiplicative_summary=multiplicative,
        notes=tuple(notes),
    )
