"""Intervention-analysis comparator: regression with ARIMA errors plus a
post-intervention step dummy, fitted to the full sample.

The dummy coefficient measures a level-shift association; its standard
error comes from the numerically differentiated observed information at
the maximum-likelihood point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import _arma
from .errors import BadIndex
from .sarima import FittedModel, _prepare, fit, select_order
from .series import DiffSpec, TimeSeries


@dataclass(frozen=True)
class RegArimaResult:
    """Step-dummy coefficient with its Wald test and the underlying fit."""

    beta0_hat: float
    std_error: float
    statistic: float
    p_value: float
    model: FittedModel
    dummy_description: str
    se_method: str

    def interval(self, alpha: float = 0.05) -> tuple:
        zq = float(norm.ppf(1.0 - alpha / 2.0))
        return (self.beta0_hat - zq * self.std_error, self.beta0_hat + zq * self.std_error)


def build_step_dummy(T: int, t_star: int) -> TimeSeries:
    """Binary step: zeros for the first t_star points, ones after."""
    if not (1 <= t_star < T):
        raise BadIndex(f"t_star must satisfy 1 <= t_star < T, got t_star={t_star}, T={T}")
    vals = np.zeros(T)
    vals[t_star:] = 1.0
    return TimeSeries(vals)


def _natural_vector(model: FittedModel):
    p = model.params
    return np.concatenate([p.phi, p.theta, p.Phi, p.Theta, p.beta, [p.sigma2]])


def _observed_information_se(model: FittedModel, beta_index: int) -> Optional[float]:
    """SE of one regression coefficient from the numeric observed information.

    Central second differences of the exact log-likelihood over the natural
    parameter vector (ARMA coefficients, beta, sigma2).  Likelihood filters
    depend only on the ARMA block, so perturbations of beta and sigma2 reuse
    the cached filter of the matching ARMA point.
    """
    order = model.order
    sizes = (order.p, order.q, order.P, order.Q)
    n_arma = sum(sizes)
    _, data, observed = _prepare(model.y, model.X, order.diff)
    complete = bool(observed.all())
    v0 = _natural_vector(model)
    nv = v0.size
    i_beta = n_arma + beta_index
    filters = {}

    def get_filter(arma_vec):
        key = arma_vec.tobytes()
        if key not in filters:
            pos = 0
            blocks = []
            for size in sizes:
                blocks.append(arma_vec[pos : pos + size])
                pos += size
            pi, th = _arma.expand_sarma(*blocks, order.s)
            if complete:
                bf = _arma.BandedArmaFilter(pi, th, data.shape[0])
                filters[key] = (bf.logdet, bf.standardize(data))
            else:
                kf = _arma.KalmanArma(pi, th)
                logdet, U, _, _ = kf.filter(data, observed)
                filters[key] = (logdet, U)
        return filters[key]

    def ll(v):
        logdet, U = get_filter(v[:n_arma])
        beta = v[n_arma:-1]
        sigma2 = v[-1]
        if sigma2 <= 0:
            return -np.inf
        return _arma.loglik_at(logdet, U, beta, sigma2)

    h = 1e-3 * np.maximum(1.0, np.abs(v0))
    f0 = ll(v0)
    H = np.zeros((nv, nv))
    for i in range(nv):
        ei = np.zeros(nv)
        ei[i] = h[i]
        fp = ll(v0 + ei)
        fm = ll(v0 - ei)
        H[i, i] = (fp - 2.0 * f0 + fm) / h[i] ** 2
        for j in range(i + 1, nv):
            ej = np.zeros(nv)
            ej[j] = h[j]
            fpp = ll(v0 + ei + ej)
            fpm = ll(v0 + ei - ej)
            fmp = ll(v0 - ei + ej)
            fmm = ll(v0 - ei - ej)
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return None
    var = cov[i_beta, i_beta]
    if not np.isfinite(var) or var <= 0:
        return None
    return float(np.sqrt(var))


def fit_regarima(
    y: TimeSeries,
    X=None,
    t_star: int = None,
    order=None,
    *,
    include_intercept: bool = True,
    regressor_names: Optional[Sequence[str]] = None,
    start_params=None,
    max_evals: int = 1000,
) -> RegArimaResult:
    """Fit the full-sample regression-with-ARIMA-errors comparator.

    The step dummy (0 through t_star, 1 after) is appended to the regressor
    set; ``order`` may be a ModelOrder or "auto" with a DiffSpec, in which
    case the BIC stepwise search runs with the dummy always retained.
    Falls back to the conditional GLS standard error when the observed
    information is not invertible.
    """
    if t_star is None:
        raise BadIndex("t_star is required")
    T = len(y)
    dummy = build_step_dummy(T, t_star)
    if X is not None:
        Xarr = np.asarray(X, dtype=float)
        if Xarr.ndim == 1:
            Xarr = Xarr[:, None]
        X_aug = np.column_stack([Xarr, dummy.values])
        if regressor_names is None:
            regressor_names = [f"x{i + 1}" for i in range(Xarr.shape[1])]
        names = list(regressor_names) + ["intervention"]
    else:
        X_aug = dummy.values[:, None]
        names = ["intervention"]

    if order == "auto" or isinstance(order, DiffSpec):
        diff = order if isinstance(order, DiffSpec) else DiffSpec()
        model = select_order(
            y,
            X_aug,
            diff=diff,
            include_intercept=include_intercept,
            regressor_names=names,
            max_evals=max_evals,
        )
    else:
        model = fit(
            y,
            X_aug,
            order,
            include_intercept=include_intercept,
            regressor_names=names,
            start_params=start_params,
            max_evals=max_evals,
        )
    beta_index = model.regressor_names.index("intervention")
    # beta ordering matches regressor_names minus nothing: const is column 0 when present
    beta0 = float(model.params.beta[beta_index])
    se = _observed_information_se(model, beta_index)
    se_method = "observed_information"
    if se is None:
        se = float(np.sqrt(model.cov_beta[beta_index, beta_index]))
        se_method = "conditional_gls"
    z = beta0 / se
    p = float(2.0 * norm.sf(abs(z)))
    return RegArimaResult(
        beta0_hat=beta0,
        std_error=se,
        statistic=float(z),
        p_value=p,
        model=model,
        dummy_description=f"step dummy: 0 for t <= {t_star}, 1 for t > {t_star} (1-based)",
        se_method=se_method,
    )
