"""Seasonal ARIMA with exogenous regressors.

Exact Gaussian likelihood (state-space / banded-Cholesky, cross-checked),
maximum-likelihood fitting over an unconstrained partial-autocorrelation
parameterization, psi-weight computation, forecasting, and BIC-based
stepwise order selection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _arma
from .errors import (
    AllFitsFailed,
    DimensionMismatch,
    NonInvertible,
    NonStationary,
    OptimizerDiverged,
    TooFewObservations,
)
from .series import DiffSpec, TimeSeries, difference, difference_matrix, undifference

# finite stand-in for an undefined likelihood so numeric gradients stay clean
_BAD_OBJECTIVE = 1e15


@dataclass(frozen=True)
class ModelOrder:
    """(p, q)(P, Q) orders plus the differencing spec (which carries s)."""

    p: int
    q: int
    P: int = 0
    Q: int = 0
    diff: DiffSpec = DiffSpec()

    def __post_init__(self):
        if not (0 <= self.p <= 5 and 0 <= self.q <= 5):
            raise ValueError(f"nonseasonal orders must be in 0..5, got p={self.p}, q={self.q}")
        if not (0 <= self.P <= 2 and 0 <= self.Q <= 2):
            raise ValueError(f"seasonal orders must be in 0..2, got P={self.P}, Q={self.Q}")
        if (self.P > 0 or self.Q > 0) and self.diff.s < 2:
            raise ValueError("seasonal AR/MA terms require a seasonal period s >= 2")

    @property
    def s(self) -> int:
        return self.diff.s

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    def label(self) -> str:
        base = f"({self.p},{self.diff.d},{self.q})"
        if self.s > 1:
            return base + f"({self.P},{self.diff.D},{self.Q})_{self.s}"
        return base


@dataclass(frozen=True)
class SarimaParams:
    """Parameter vector (phi, theta, Phi, Theta, beta, sigma2).

    AR blocks must be stationary and MA blocks invertible; both are checked
    at construction.  The intercept, when used, is just a constant column of
    the regressor set with its coefficient inside ``beta``.
    """

    phi: np.ndarray
    theta: np.ndarray
    Phi: np.ndarray
    Theta: np.ndarray
    beta: np.ndarray
    sigma2: float

    def __init__(self, phi=(), theta=(), Phi=(), Theta=(), beta=(), sigma2=1.0):
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        Phi = np.atleast_1d(np.asarray(Phi, dtype=float))
        Theta = np.atleast_1d(np.asarray(Theta, dtype=float))
        beta = np.atleast_1d(np.asarray(beta, dtype=float)) if np.size(beta) else np.zeros(0)
        _arma.check_stationary(phi, "AR")
        _arma.check_stationary(Phi, "seasonal AR")
        _arma.check_invertible(theta, "MA")
        _arma.check_invertible(Theta, "seasonal MA")
        if not (np.isfinite(sigma2) and sigma2 > 0):
            raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")
        for arr in (phi, theta, Phi, Theta, beta):
            arr.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Theta", Theta)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", float(sigma2))

    def expanded(self, s: int):
        """Full (pi, vartheta) polynomials of the multiplicative model."""
        return _arma.expand_sarma(self.phi, self.theta, self.Phi, self.Theta, s)


@dataclass(frozen=True)
class Forecast:
    """Point forecasts with exact MA(k-1) error variances.

    error_variance[j] = sigma2 * sum_{i<=j} psi_i^2, nondecreasing in j.
    """

    mean: np.ndarray
    error_variance: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class FittedModel:
    """An estimated SARIMA-with-regressors model.

    ``residuals`` holds one-step standardized innovations on the differenced
    time axis (missing where no observation).  ``raw_residuals`` are the
    innovation prediction errors in data units at observed points, the pool
    the residual bootstrap resamples from.
    """

    order: ModelOrder
    params: SarimaParams
    loglik: float
    bic: float
    residuals: TimeSeries
    n_obs: int
    regressor_names: tuple
    converged: bool
    raw_residuals: np.ndarray
    cov_beta: np.ndarray
    y: TimeSeries = field(repr=False)
    X: Optional[np.ndarray] = field(repr=False, default=None)
    _final_state: np.ndarray = field(repr=False, default=None)
    _kalman: object = field(repr=False, default=None)

    @property
    def n_free_params(self) -> int:
        return self.order.n_arma + self.params.beta.size + 1

    def psi(self, k: int) -> np.ndarray:
        return psi_weights(self.params, self.order, k)


# ---------------------------------------------------------------------------


def psi_weights(params: SarimaParams, order: ModelOrder, k: int) -> np.ndarray:
    """First k MA(inf) weights psi_0..psi_{k-1} of the expanded ARMA.

    psi_0 = 1; the k-step forecast error of the model is
    sum_{i<k} psi_i eps_{t+k-i}, so these drive every test variance.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pi, th = params.expanded(order.s)
    return _arma.psi_from_poly(pi, th, k)


def _design_matrix(y: TimeSeries, X, include_intercept: bool, diff: DiffSpec, names):
    n = len(y)
    cols = []
    used_names = []
    if include_intercept:
        if diff.total_lags > 0:
            warnings.warn(
                "intercept dropped: differencing annihilates a constant regressor",
                stacklevel=3,
            )
        else:
            cols.append(np.ones(n))
            used_names.append("const")
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != n:
            raise DimensionMismatch(f"regressor rows {X.shape[0]} != series length {n}")
        cols.extend(X.T)
        if names is None:
            names = [f"x{i + 1}" for i in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise DimensionMismatch("regressor_names length differs from X columns")
        used_names.extend(names)
    Xfull = np.column_stack(cols) if cols else None
    return Xfull, tuple(used_names)


def _prepare(y: TimeSeries, Xfull, diff: DiffSpec):
    """Difference target and regressors; return data matrix and observation mask."""
    dy = difference(y, diff)
    data = dy.values[:, None]
    observed = ~dy.missing
    if Xfull is not None:
        DX = difference_matrix(Xfull, diff)
        observed = observed & ~np.isnan(DX).any(axis=1)
        data = np.column_stack([dy.values, DX])
    data = data.copy()
    data[~observed, :] = 0.0
    return dy, data, observed


def _filter_data(pi, th, data, observed, complete: bool):
    """Dispatch to the banded (complete-data) or Kalman likelihood engine."""
    if complete:
        bf = _arma.BandedArmaFilter(pi, th, data.shape[0])
        return bf.logdet, bf.standardize(data)
    kf = _arma.KalmanArma(pi, th)
    logdet, U, _, _ = kf.filter(data, observed)
    return logdet, U


def log_likelihood(order: ModelOrder, params: SarimaParams, y: TimeSeries, X=None) -> float:
    """Exact Gaussian log-likelihood of the model at the given parameters.

    ``y`` and ``X`` are on the original scale; the differencing in
    ``order.diff`` is applied to both before evaluation.  Missing
    observations contribute nothing (the filter performs a time update
    only).
    """
    Xarr = None
    if X is not None:
        Xarr = np.asarray(X, dtype=float)
        if Xarr.ndim == 1:
            Xarr = Xarr[:, None]
        if Xarr.shape[0] != len(y):
            raise DimensionMismatch("regressor rows differ from series length")
        if params.beta.size != Xarr.shape[1]:
            raise DimensionMismatch(
                f"beta has {params.beta.size} entries for {Xarr.shape[1]} regressor columns"
            )
    elif params.beta.size:
        raise DimensionMismatch("beta supplied without regressors")
    _, data, observed = _prepare(y, Xarr, order.diff)
    pi, th = params.expanded(order.s)
    logdet, U = _filter_data(pi, th, data, observed, bool(observed.all()))
    return _arma.loglik_at(logdet, U, params.beta, params.sigma2)


def _blocks_from_x(x, order: ModelOrder):
    sizes = (order.p, order.q, order.P, order.Q)
    blocks = _arma.unconstrained_to_blocks(np.asarray(x, dtype=float), sizes)
    phi, theta_raw, Phi, Theta_raw = blocks
    return phi, -theta_raw, Phi, -Theta_raw


def _x_from_params(params: SarimaParams, order: ModelOrder) -> np.ndarray:
    """Unconstrained start vector from params, adapted to the target order.

    The PACF parameterization nests lower orders, so each block is padded
    with zeros or truncated to the requested size.
    """
    parts = []
    for block, size in zip(
        (params.phi, -params.theta, params.Phi, -params.Theta),
        (order.p, order.q, order.P, order.Q),
    ):
        r = _arma.coef_to_pacf(block)
        if r.size < size:
            r = np.concatenate([r, np.zeros(size - r.size)])
        parts.append(np.arctanh(np.clip(r[:size], -1 + 1e-10, 1 - 1e-10)))
    return np.concatenate(parts) if parts else np.zeros(0)


def _css_objective(order: ModelOrder, data, observed, s: int, skip: int = 0):
    """Conditional-sum-of-squares objective over the ARMA blocks.

    The filtered residual is linear in the regression coefficients, so
    beta is concentrated out by least squares inside every evaluation.
    Missing rows are zero-filled; ``skip`` drops the filter's startup
    window from the sum of squares (use a common window across candidate
    orders to keep their conditional criteria comparable).
    """
    from scipy.signal import lfilter

    work = data.copy()
    work[~observed, :] = 0.0
    keep = observed.copy()
    keep[:skip] = False

    def css(x):
        try:
            phi, theta, Phi, Theta = _blocks_from_x(x, order)
            pi, th = _arma.expand_sarma(phi, theta, Phi, Theta, s)
            E = lfilter(pi, th, work, axis=0)[keep]
            if E.shape[1] > 1:
                beta, *_ = np.linalg.lstsq(E[:, 1:], E[:, 0], rcond=None)
                resid = E[:, 0] - E[:, 1:] @ beta
            else:
                resid = E[:, 0]
            val = float(resid @ resid)
        except (np.linalg.LinAlgError, ValueError):
            return _BAD_OBJECTIVE
        return val if np.isfinite(val) else _BAD_OBJECTIVE

    return css


def _css_start(order: ModelOrder, data, observed, s: int, max_evals: int) -> np.ndarray:
    css = _css_objective(order, data, observed, s)
    res = minimize(
        css,
        np.zeros(order.n_arma),
        method="Nelder-Mead",
        options={"maxfev": min(max_evals, 120 * order.n_arma), "xatol": 1e-3, "fatol": 1e-6},
    )
    return res.x if np.isfinite(res.fun) else np.zeros(order.n_arma)


def _css_bic(y: TimeSeries, X, order: ModelOrder, include_intercept, regressor_names,
             max_evals: int, skip: int = 0):
    """Conditional-likelihood BIC used to rank candidates during search.

    The conditional (zero-presample) likelihood with a common startup
    window dropped is the standard fast surrogate in stepwise order
    selection; the chosen model is refitted with the exact likelihood
    afterwards.
    """
    Xfull, _ = _design_matrix(y, X, include_intercept, order.diff, regressor_names)
    _, data, observed = _prepare(y, Xfull, order.diff)
    n_eff = int(observed[skip:].sum())
    n_free = order.n_arma + (Xfull.shape[1] if Xfull is not None else 0) + 1
    if n_eff <= n_free + 5:
        raise TooFewObservations(
            f"effective sample size {n_eff} too small for {n_free} free parameters"
        )
    css = _css_objective(order, data, observed, order.s, skip=skip)
    x = np.zeros(order.n_arma)
    if order.n_arma:
        res = minimize(
            css,
            x,
            method="Nelder-Mead",
            options={"maxfev": min(max_evals, 150 * order.n_arma), "xatol": 1e-4,
                     "fatol": 1e-8},
        )
        best_x, best_f = res.x, res.fun
        polish = minimize(
            css,
            best_x,
            method="L-BFGS-B",
            options={"maxfun": max_evals, "ftol": 1e-12, "gtol": 1e-8},
        )
        if polish.fun < best_f:
            best_x, best_f = polish.x, polish.fun
        x, sse = best_x, best_f
    else:
        sse = css(x)
    if sse >= _BAD_OBJECTIVE or sse <= 0:
        raise OptimizerDiverged("conditional objective not usable")
    sigma2 = sse / n_eff
    ll = -0.5 * n_eff * (np.log(2.0 * np.pi * sigma2) + 1.0)
    return float(-2.0 * ll + n_free * np.log(n_eff))


def fit(
    y: TimeSeries,
    X=None,
    order: ModelOrder = None,
    *,
    regressor_names: Optional[Sequence[str]] = None,
    include_intercept: bool = True,
    start_params: Optional[SarimaParams] = None,
    max_evals: int = 1000,
) -> FittedModel:
    """Maximum-likelihood fit of a SARIMA-with-regressors model.

    Optimizes the exact likelihood over tanh-mapped partial autocorrelations
    of the four ARMA blocks (stationarity and invertibility hold by
    construction); the regression coefficients and innovation variance are
    concentrated out in closed form.  Derivative-free simplex search with a
    restart, then quasi-Newton polish.

    Raises
    ------
    TooFewObservations
        If the effective (differenced, observed) sample size is not larger
        than the free parameter count plus five.
    OptimizerDiverged
        If no finite-likelihood point was found.
    """
    if order is None:
        raise ValueError("order is required")
    Xfull, names = _design_matrix(y, X, include_intercept, order.diff, regressor_names)
    dy, data, observed = _prepare(y, Xfull, order.diff)
    n_eff = int(observed.sum())
    n_free = order.n_arma + (Xfull.shape[1] if Xfull is not None else 0) + 1
    if n_eff <= n_free + 5:
        raise TooFewObservations(
            f"effective sample size {n_eff} too small for {n_free} free parameters"
        )
    complete = bool(observed.all())
    s = order.s

    def objective(x):
        try:
            phi, theta, Phi, Theta = _blocks_from_x(x, order)
            pi, th = _arma.expand_sarma(phi, theta, Phi, Theta, s)
            logdet, U = _filter_data(pi, th, data, observed, complete)
            ll, _, _, _ = _arma.profile_concentrated(logdet, U)
        except (np.linalg.LinAlgError, ValueError, NonStationary, NonInvertible):
            return _BAD_OBJECTIVE
        return -ll if np.isfinite(ll) else _BAD_OBJECTIVE

    converged = True
    if order.n_arma == 0:
        best_x = np.zeros(0)
    else:
        if start_params is not None:
            x0 = _x_from_params(start_params, order)
        else:
            x0 = _css_start(order, data, observed, s, max_evals)
        # the simplex stage only needs to land in the right basin; the
        # quasi-Newton polish below brings the loglik to 1e-8
        nm_opts = {"maxfev": max_evals, "fatol": 1e-6, "xatol": 1e-4}
        res = minimize(objective, x0, method="Nelder-Mead", options=nm_opts)
        best_x, best_f = res.x, res.fun
        if best_f >= _BAD_OBJECTIVE:
            res = minimize(objective, x0 + 0.1, method="Nelder-Mead", options=nm_opts)
            best_x, best_f = res.x, res.fun
            converged = res.success
        polish = minimize(
            objective,
            best_x,
            method="L-BFGS-B",
            options={"maxfun": max_evals, "ftol": 1e-12, "gtol": 1e-8},
        )
        if polish.fun < best_f:
            best_x, best_f = polish.x, polish.fun
        if best_f >= _BAD_OBJECTIVE or not np.isfinite(best_f):
            raise OptimizerDiverged("no finite-likelihood parameter point found")

    phi, theta, Phi, Theta = _blocks_from_x(best_x, order)
    pi, th = _arma.expand_sarma(phi, theta, Phi, Theta, s)
    logdet, U = _filter_data(pi, th, data, observed, complete)
    ll, beta, sigma2, xtx_inv = _arma.profile_concentrated(logdet, U)
    if not np.isfinite(ll):
        raise OptimizerDiverged("likelihood not finite at optimum")
    params = SarimaParams(phi, theta, Phi, Theta, beta, sigma2)

    # one Kalman pass for residuals and the forecasting state
    kf = _arma.KalmanArma(pi, th)
    _, U_k, ftilde, final = kf.filter(data, observed)
    u_s = U_k[:, 0] - (U_k[:, 1:] @ beta if beta.size else 0.0)
    raw = u_s * np.sqrt(ftilde)
    std_vals = np.full(len(dy), np.nan)
    std_vals[observed] = u_s / np.sqrt(sigma2)
    residuals = TimeSeries(std_vals, start_index=dy.start_index)
    state = final[:, 0:1] - (final[:, 1:] @ beta)[:, None] if beta.size else final[:, 0:1]

    bic = -2.0 * ll + n_free * np.log(n_eff)
    cov_beta = sigma2 * xtx_inv if xtx_inv is not None else np.zeros((0, 0))
    return FittedModel(
        order=order,
        params=params,
        loglik=float(ll),
        bic=float(bic),
        residuals=residuals,
        n_obs=n_eff,
        regressor_names=names,
        converged=converged,
        raw_residuals=raw,
        cov_beta=cov_beta,
        y=y,
        X=Xfull,
        _final_state=state,
        _kalman=kf,
    )


def forecast_adjusted(model: FittedModel, k: int) -> np.ndarray:
    """Conditional mean of the regression-adjusted differenced process."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return model._kalman.forecast_path(model._final_state, k)[:, 0]


def _future_design(model: FittedModel, k: int, X_future):
    """Differenced future regressor rows, splicing the pre-period tail."""
    m_user = len(model.regressor_names) - (1 if "const" in model.regressor_names else 0)
    if m_user > 0:
        if X_future is None:
            raise DimensionMismatch(f"model has {m_user} regressors; X_future is required")
        Xf = np.asarray(X_future, dtype=float)
        if Xf.ndim == 1:
            Xf = Xf[:, None]
        if Xf.shape != (k, m_user):
            raise DimensionMismatch(f"X_future must be {k} x {m_user}, got {Xf.shape}")
        if "const" in model.regressor_names:
            Xf = np.column_stack([np.ones(k), Xf])
    else:
        if X_future is not None and np.size(X_future):
            raise DimensionMismatch("model has no regressors but X_future was supplied")
        if model.X is None:
            return None
        Xf = np.ones((k, model.X.shape[1]))
    diff = model.order.diff
    if diff.is_identity:
        return Xf
    stacked = np.vstack([model.X[-diff.total_lags :], Xf])
    return difference_matrix(stacked, diff)[-k:]


def forecast(model: FittedModel, k: int, X_future=None, scale: str = "transformed") -> Forecast:
    """k-step-ahead forecast with exact error variances.

    On the transformed scale the mean is the conditional expectation of the
    differenced series (ARMA part plus differenced regression part) and the
    error variance is sigma2 * cumsum(psi^2).  On the original scale the
    differenced forecast is integrated back to levels and the psi weights
    are convolved with the inverse-differencing coefficients.
    """
    from .series import expand_diff_polynomial, invert_diff_polynomial

    s_hat = forecast_adjusted(model, k)
    DXf = _future_design(model, k, X_future)
    reg = DXf @ model.params.beta if (DXf is not None and model.params.beta.size) else 0.0
    mean_t = s_hat + reg
    psi = psi_weights(model.params, model.order, k)
    if scale == "transformed":
        var = model.params.sigma2 * np.cumsum(psi**2)
        return Forecast(mean=mean_t, error_variance=var, psi=psi)
    if scale != "original":
        raise ValueError(f"unknown scale {scale!r}")
    diff = model.order.diff
    if diff.is_identity:
        var = model.params.sigma2 * np.cumsum(psi**2)
        return Forecast(mean=mean_t, error_variance=var, psi=psi)
    tail = model.y.values[-diff.total_lags :]
    if np.isnan(tail).any():
        raise DimensionMismatch(
            "cannot rebuild level forecasts: missing values in the final "
            f"{diff.total_lags} pre-period observations"
        )
    levels = undifference(mean_t, tail, diff)[diff.total_lags :]
    a = expand_diff_polynomial(diff)
    b = invert_diff_polynomial(a, k).b
    psi_y = np.convolve(b, psi)[:k]
    var = model.params.sigma2 * np.cumsum(psi_y**2)
    return Forecast(mean=levels, error_variance=var, psi=psi_y)


# ---------------------------------------------------------------------------
# order selection


def _better(cand, best) -> bool:
    """BIC comparison with deterministic tie-breaking.

    Near-ties go to the model with fewer parameters, then to the
    lexicographically smaller (p, q, P, Q).
    """
    bic_c, np_c, ord_c = cand
    bic_b, np_b, ord_b = best
    if bic_c < bic_b - 1e-9:
        return True
    if bic_c > bic_b + 1e-9:
        return False
    return (np_c, ord_c) < (np_b, ord_b)


def select_order(
    y: TimeSeries,
    X=None,
    *,
    diff: DiffSpec = DiffSpec(),
    max_p: int = 3,
    max_q: int = 3,
    max_P: int = 2,
    max_Q: int = 2,
    include_intercept: bool = True,
    regressor_names: Optional[Sequence[str]] = None,
    exhaustive: bool = False,
    search_likelihood: str = "exact",
    max_evals: int = 1000,
) -> FittedModel:
    """BIC-minimizing order search with fixed differencing.

    Stepwise by default: the four-point start grid is refined by +-1 moves
    on each of (p, q, P, Q) until no neighbor improves.  ``exhaustive``
    fits the full grid with p, q capped at 2 instead.

    ``search_likelihood`` picks the ranking criterion: "exact" (the
    default) scores every candidate with the exact likelihood, so the
    returned model minimizes the exact BIC over the explored set;
    "conditional" scores candidates with the fast zero-presample
    likelihood (beta concentrated out per evaluation) and refits the
    winner exactly.  Both are deterministic given inputs; candidates that
    fail to fit are skipped.
    """
    if search_likelihood not in ("conditional", "exact"):
        raise ValueError(f"search_likelihood must be conditional|exact, got {search_likelihood!r}")
    seasonal = diff.s >= 2
    if not seasonal:
        max_P = max_Q = 0
    conditional = search_likelihood == "conditional"
    # common startup window so conditional criteria compare like for like
    css_skip = max_p + diff.s * max_P
    cache = {}
    failures = []

    def exact_fit(pqPQ, start=None):
        p, q, P, Q = pqPQ
        return fit(
            y,
            X,
            ModelOrder(p, q, P, Q, diff),
            include_intercept=include_intercept,
            regressor_names=regressor_names,
            start_params=start,
            max_evals=max_evals,
        )

    def try_order(pqPQ, start=None):
        """Score one candidate; returns (key, model_or_None) or None."""
        if pqPQ in cache:
            return cache[pqPQ]
        p, q, P, Q = pqPQ
        try:
            if conditional:
                bic = _css_bic(y, X, ModelOrder(p, q, P, Q, diff), include_intercept,
                               regressor_names, max_evals, skip=css_skip)
                nf = p + q + P + Q
                entry = ((bic, nf, pqPQ), None)
            else:
                model = exact_fit(pqPQ, start)
                entry = ((model.bic, model.n_free_params, pqPQ), model)
        except Exception as exc:  # noqa: BLE001 - search must survive bad corners
            failures.append((pqPQ, repr(exc)))
            cache[pqPQ] = None
            return None
        cache[pqPQ] = entry
        return entry

    def clamp(pqPQ):
        p, q, P, Q = pqPQ
        if 0 <= p <= max_p and 0 <= q <= max_q and 0 <= P <= max_P and 0 <= Q <= max_Q:
            return pqPQ
        return None

    def finish(best):
        if best[1] is not None:
            return best[1]
        return exact_fit(best[0][2])

    if exhaustive:
        candidates = [
            (p, q, P, Q)
            for p in range(min(2, max_p) + 1)
            for q in range(min(2, max_q) + 1)
            for P in range(max_P + 1)
            for Q in range(max_Q + 1)
        ]
        best = None
        for c in candidates:
            entry = try_order(c)
            if entry is None:
                continue
            if best is None or _better(entry[0], best[0]):
                best = entry
        if best is None:
            raise AllFitsFailed(f"no candidate order could be fitted: {failures[:3]}")
        return finish(best)

    starts = [
        (min(2, max_p), min(2, max_q), min(1, max_P), min(1, max_Q)),
        (0, 0, 0, 0),
        (1, 0, min(1, max_P), 0),
        (0, 1, 0, min(1, max_Q)),
    ]
    best = None
    for c in dict.fromkeys(starts):
        entry = try_order(c)
        if entry is not None and (best is None or _better(entry[0], best[0])):
            best = entry
    if best is None:
        raise AllFitsFailed(f"no start-grid order could be fitted: {failures[:3]}")

    while True:
        p, q, P, Q = best[0][2]
        neighbors = [
            (p + 1, q, P, Q), (p - 1, q, P, Q),
            (p, q + 1, P, Q), (p, q - 1, P, Q),
            (p, q, P + 1, Q), (p, q, P - 1, Q),
            (p, q, P, Q + 1), (p, q, P, Q - 1),
        ]
        improved = False
        for cand in neighbors:
            cand = clamp(cand)
            if cand is None or cand in cache:
                continue
            entry = try_order(cand, start=None if best[1] is None else best[1].params)
            if entry is None:
                continue
            if _better(entry[0], best[0]):
                best = entry
                improved = True
        if not improved:
            break
    return finish(best)
