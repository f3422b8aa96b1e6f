"""Internal ARMA numerics: polynomial expansion, autocovariances, exact
Gaussian likelihood and the partial-autocorrelation reparameterization.

Conventions: an AR block with coefficients ``phi`` means the polynomial
1 - phi_1 L - ... - phi_p L^p; an MA block with coefficients ``theta`` means
1 + theta_1 L + ... + theta_q L^q.  Expanded full polynomials are stored with
the lag-0 coefficient included (pi_0 = theta_0 = 1).
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky_banded, lapack, solve_banded, solve_discrete_lyapunov
from scipy.signal import lfilter

from .errors import NonInvertible, NonStationary

_HAS_BANDED_LAPACK = hasattr(lapack, "dpbtrf") and hasattr(lapack, "dtbtrs")


# ---------------------------------------------------------------------------
# polynomials and roots


def ar_poly(phi) -> np.ndarray:
    """[1, -phi_1, ..., -phi_p]."""
    phi = np.asarray(phi, dtype=float)
    return np.concatenate([[1.0], -phi])


def ma_poly(theta) -> np.ndarray:
    """[1, theta_1, ..., theta_q]."""
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([[1.0], theta])


def seasonal_expand(poly: np.ndarray, s: int) -> np.ndarray:
    """Spread lag-1 polynomial coefficients onto multiples of the period s."""
    if s == 1 or poly.size == 1:
        return poly
    out = np.zeros((poly.size - 1) * s + 1)
    out[::s] = poly
    return out


def expand_sarma(phi, theta, Phi, Theta, s: int):
    """Expanded (pi, vartheta) of the multiplicative seasonal ARMA."""
    pi = np.convolve(ar_poly(phi), seasonal_expand(ar_poly(Phi), s))
    th = np.convolve(ma_poly(theta), seasonal_expand(ma_poly(Theta), s))
    return pi, th


def max_char_root(coefs) -> float:
    """Largest modulus among companion-matrix eigenvalues of an AR block.

    ``coefs`` are the phi (or -theta) coefficients; the block is stable iff
    the returned value is < 1.
    """
    c = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    if c.size == 0:
        return 0.0
    comp = np.zeros((c.size, c.size))
    comp[0, :] = c
    if c.size > 1:
        comp[1:, :-1] = np.eye(c.size - 1)
    return float(np.abs(np.linalg.eigvals(comp)).max())


def check_stationary(phi, label: str = "AR") -> None:
    if max_char_root(phi) >= 1.0 - 1e-12:
        raise NonStationary(f"{label} polynomial has a root on or inside the unit circle")


def check_invertible(theta, label: str = "MA") -> None:
    if max_char_root(-np.asarray(theta, dtype=float)) >= 1.0 - 1e-12:
        raise NonInvertible(f"{label} polynomial has a root on or inside the unit circle")


# ---------------------------------------------------------------------------
# psi weights and autocovariances


def psi_from_poly(pi: np.ndarray, theta: np.ndarray, k: int) -> np.ndarray:
    """First k coefficients of theta(L)/pi(L)."""
    psi = np.zeros(k)
    psi[0] = 1.0
    pmax = pi.size - 1
    for j in range(1, k):
        acc = theta[j] if j < theta.size else 0.0
        m = min(j, pmax)
        if m > 0:
            acc -= np.dot(pi[1 : m + 1], psi[j - m : j][::-1])
        psi[j] = acc
    return psi


def arma_acovf(pi: np.ndarray, theta: np.ndarray, nlags: int, sigma2: float = 1.0) -> np.ndarray:
    """Exact autocovariances gamma(0..nlags) of a stationary ARMA.

    Solves the linear system obtained from multiplying the defining
    recursion by lagged values and taking expectations.
    """
    p = pi.size - 1
    q = theta.size - 1
    psi = psi_from_poly(pi, theta, q + 1)
    # rhs(k) = sigma2 * sum_{j=k}^{q} theta_j psi_{j-k}, zero past the MA order
    rhs = np.zeros(p + 1)
    for k in range(min(p, q) + 1):
        rhs[k] = sigma2 * np.dot(theta[k:], psi[: q + 1 - k])
    M = np.zeros((p + 1, p + 1))
    idx = np.arange(p + 1)
    M[idx, idx] += 1.0
    for i in range(1, p + 1):
        M[idx, np.abs(idx - i)] += pi[i]
    gam = np.linalg.solve(M, rhs) if p else rhs
    if nlags <= p:
        return gam[: nlags + 1]
    out = np.zeros(nlags + 1)
    out[: p + 1] = gam
    for k in range(p + 1, nlags + 1):
        acc = sigma2 * np.dot(theta[k:], psi[: q + 1 - k]) if k <= q else 0.0
        acc -= np.dot(pi[1:], out[k - p - 1 : k][::-1][: p])
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# partial-autocorrelation reparameterization (stationarity by construction)


def pacf_to_coef(r: np.ndarray) -> np.ndarray:
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    a = np.zeros(0)
    for ri in np.asarray(r, dtype=float):
        a = np.concatenate([a - ri * a[::-1], [ri]])
    return a


def coef_to_pacf(a: np.ndarray) -> np.ndarray:
    """Inverse Durbin-Levinson; raises if the block is not stable."""
    a = list(np.asarray(a, dtype=float))
    r = []
    while a:
        rk = a[-1]
        if abs(rk) >= 1.0:
            raise NonStationary("coefficients do not map to partial autocorrelations in (-1, 1)")
        r.append(rk)
        head = np.asarray(a[:-1])
        a = list((head + rk * head[::-1]) / (1.0 - rk * rk))
    return np.asarray(r[::-1])


def unconstrained_to_blocks(x: np.ndarray, sizes) -> list:
    """Split an unconstrained vector into tanh-mapped PACF blocks.

    The map is clipped strictly inside (-1, 1) so saturated optimizer
    iterates can never produce a unit root.
    """
    blocks = []
    pos = 0
    for size in sizes:
        r = np.clip(np.tanh(x[pos : pos + size]), -1 + 1e-7, 1 - 1e-7)
        blocks.append(pacf_to_coef(r))
        pos += size
    return blocks


def blocks_to_unconstrained(blocks) -> np.ndarray:
    parts = [np.arctanh(np.clip(coef_to_pacf(b), -1 + 1e-10, 1 - 1e-10)) for b in blocks]
    return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# exact Gaussian likelihood, banded route (complete data)


class BandedArmaFilter:
    """Exact likelihood machinery for a stationary ARMA on complete data.

    Applies the AR transformation to the data, builds the banded covariance
    of the transformed vector (unit innovation variance) and exposes the
    standardizing solve.  The transformation is unit lower triangular, so
    the likelihood of the data equals that of the transformed vector.
    """

    def __init__(self, pi: np.ndarray, theta: np.ndarray, n: int):
        p = pi.size - 1
        q = theta.size - 1
        self.pi, self.theta, self.n = pi, theta, n
        corner = min(p, n)
        m = min(n - 1, max(corner - 1, q)) if n > 1 else 0
        psi = psi_from_poly(pi, theta, q + 1)
        gam_w = np.array([np.dot(theta[: q + 1 - i], theta[i:]) for i in range(q + 1)])
        # band entries past the matrix edge are never referenced, so the MA
        # band can be broadcast across all columns before fixing the corner
        ab = np.zeros((m + 1, n))
        ab[: min(q, m) + 1, :] = gam_w[: min(q, m) + 1, None]
        if corner:
            gam_z = arma_acovf(pi, theta, max(corner - 1, 0))
            # cross-covariances Cov(z_j, w_{j+l}) for rows past the corner
            cross = np.array([np.dot(theta[l:], psi[: q + 1 - l]) for l in range(q + 1)])
            for j in range(corner):
                col = np.zeros(m + 1)
                kz = corner - j
                col[:kz] = gam_z[:kz]
                lo = max(1, kz)
                if lo <= min(q, m):
                    col[lo : min(q, m) + 1] = cross[lo : min(q, m) + 1]
                ab[:, j] = col
        self.m = m
        self.p = p
        if _HAS_BANDED_LAPACK:
            self.factor, info = lapack.dpbtrf(ab, lower=1)
            if info != 0:
                raise NonStationary(f"banded Cholesky failed (info={info})")
        else:  # pragma: no cover - older scipy
            try:
                self.factor = cholesky_banded(ab, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NonStationary(f"covariance not positive definite: {exc}") from exc
        self.logdet = 2.0 * float(np.log(self.factor[0]).sum())

    def transform(self, data: np.ndarray) -> np.ndarray:
        """AR-filter the data: identity rows up to p, pi(L)-filtered after."""
        data = np.atleast_2d(data.T).T
        w = lfilter(self.pi, [1.0], data, axis=0)
        w[: min(self.p, self.n)] = data[: min(self.p, self.n)]
        return w

    def standardize(self, data: np.ndarray) -> np.ndarray:
        """Return u with Var(u) = sigma2 * I: the scaled innovations."""
        w = self.transform(np.asarray(data, dtype=float))
        if _HAS_BANDED_LAPACK:
            u, info = lapack.dtbtrs(self.factor, w, uplo="L", trans="N", diag="N")
            if info == 0:
                return u
        return solve_banded((self.m, 0), self.factor, w)


# ---------------------------------------------------------------------------
# Kalman filter route (missing data, residuals, forecasting)


class KalmanArma:
    """Harvey-form state space for a zero-mean stationary ARMA.

    State dimension r = max(p, q+1); the stationary initial covariance is
    solved exactly.  Missing rows trigger a pure time update and contribute
    nothing to the likelihood.
    """

    def __init__(self, pi: np.ndarray, theta: np.ndarray):
        p = pi.size - 1
        q = theta.size - 1
        r = max(p, q + 1)
        phi = np.zeros(r)
        phi[:p] = -pi[1:]
        R = np.zeros(r)
        R[0] = 1.0
        R[1 : q + 1] = theta[1:]
        # alpha_{t+1}[i] = phi_{i+1} * alpha_t[0] + alpha_t[i+1]
        T = np.zeros((r, r))
        T[:, 0] = phi
        if r > 1:
            T[: r - 1, 1:] = np.eye(r - 1)
        self.T = T
        self.R = R
        self.RRt = np.outer(R, R)
        self.r = r
        self.phi = phi
        self.P0 = solve_discrete_lyapunov(T, self.RRt)

    def _predict_cov(self, P: np.ndarray) -> np.ndarray:
        TP = self.phi[:, None] * P[0, :] + np.vstack([P[1:, :], np.zeros((1, self.r))])
        TPT = self.phi[None, :] * TP[:, 0:1] + np.hstack([TP[:, 1:], np.zeros((self.r, 1))])
        return TPT + self.RRt

    def _advance_state(self, A: np.ndarray) -> np.ndarray:
        return self.phi[:, None] * A[0, :] + np.vstack([A[1:, :], np.zeros((1, A.shape[1]))])

    def filter(self, data: np.ndarray, observed: np.ndarray):
        """Run the filter over a data matrix with a shared observation mask.

        Returns (logdet, U, ftilde, final_state) where U holds scaled
        innovations (variance sigma2) row-per-observation for each column,
        ftilde the unit-variance innovation scale factors, and final_state
        the predicted state matrix for the next period.
        """
        data = np.atleast_2d(np.asarray(data, dtype=float).T).T
        n, ncols = data.shape
        A = np.zeros((self.r, ncols))
        P = self.P0.copy()
        rows = []
        fts = []
        logdet = 0.0
        for t in range(n):
            if observed[t]:
                f = P[0, 0]
                v = data[t, :] - A[0, :]
                TP0 = self.phi * P[0, 0] + np.concatenate([P[1:, 0], [0.0]])
                K = TP0 / f
                A = self._advance_state(A) + np.outer(K, v)
                P = self._predict_cov(P) - f * np.outer(K, K)
                P = 0.5 * (P + P.T)
                rows.append(v / np.sqrt(f))
                fts.append(f)
                logdet += np.log(f)
            else:
                A = self._advance_state(A)
                P = self._predict_cov(P)
        U = np.asarray(rows) if rows else np.zeros((0, ncols))
        return logdet, U, np.asarray(fts), A

    def forecast_path(self, state: np.ndarray, k: int) -> np.ndarray:
        """Conditional means for the next k periods from a predicted state."""
        A = state.copy()
        out = np.zeros((k, A.shape[1]))
        for j in range(k):
            out[j] = A[0, :]
            A = self._advance_state(A)
        return out


def profile_concentrated(logdet: float, U: np.ndarray):
    """Concentrate regression and innovation variance out of the likelihood.

    Column 0 of U is the target, remaining columns the regressors, all on
    the standardized scale.  Returns (loglik, beta, sigma2, xtx_inv).
    """
    n = U.shape[0]
    u_y = U[:, 0]
    if U.shape[1] > 1:
        UX = U[:, 1:]
        beta, *_ = np.linalg.lstsq(UX, u_y, rcond=None)
        resid = u_y - UX @ beta
        xtx = UX.T @ UX
    else:
        beta = np.zeros(0)
        resid = u_y
        xtx = np.zeros((0, 0))
    quad = float(resid @ resid)
    sigma2 = quad / n
    if not np.isfinite(sigma2) or sigma2 <= 0:
        return -np.inf, beta, sigma2, None
    loglik = -0.5 * (n * np.log(2.0 * np.pi) + n * np.log(sigma2) + logdet + n)
    xtx_inv = np.linalg.pinv(xtx) if xtx.size else np.zeros((0, 0))
    return loglik, beta, sigma2, xtx_inv


def loglik_at(logdet: float, U: np.ndarray, beta: np.ndarray, sigma2: float) -> float:
    """Exact log-likelihood at fixed regression and variance parameters."""
    n = U.shape[0]
    resid = U[:, 0] - (U[:, 1:] @ beta if beta.size else 0.0)
    quad = float(resid @ resid)
    return -0.5 * (n * np.log(2.0 * np.pi * sigma2) + logdet + quad / sigma2)
