"""Built-in oracle spot checks used by the ``selftest`` CLI subcommand.

Each check recomputes a quantity by an independent route (impulse
simulation, dense Gaussian density, polynomial long division) and compares
against the production path.  The pytest suite runs far larger versions of
the same oracles.
"""

from __future__ import annotations

import numpy as np

from . import _arma
from .sarima import ModelOrder, SarimaParams, psi_weights
from .series import DiffSpec, TimeSeries, difference, expand_diff_polynomial, invert_diff_polynomial, undifference


def _impulse_response(pi, th, k):
    """Simulate the ARMA recursion with a unit shock at t=0 and no noise."""
    eps = np.zeros(k)
    eps[0] = 1.0
    z = np.zeros(k)
    for t in range(k):
        acc = eps[t]
        for j in range(1, min(t, th.size - 1) + 1):
            acc += th[j] * eps[t - j]
        for i in range(1, min(t, pi.size - 1) + 1):
            acc -= pi[i] * z[t - i]
        z[t] = acc
    return z


def check_psi_impulse(rng) -> tuple:
    params = SarimaParams(phi=[0.7], theta=[0.6], Phi=[0.6], Theta=[0.5], sigma2=1.0)
    order = ModelOrder(1, 1, 1, 1, DiffSpec(0, 0, 7))
    psi = psi_weights(params, order, 30)
    pi, th = params.expanded(7)
    ref = _impulse_response(pi, th, 30)
    err = float(np.abs(psi - ref).max())
    return err < 1e-12, f"max |psi - impulse| = {err:.2e}"


def check_likelihood_oracle(rng) -> tuple:
    n = 20
    pi, th = _arma.expand_sarma([0.5], [-0.3], [], [], 1)
    y = rng.standard_normal(n)
    psi = _arma.psi_from_poly(pi, th, 20000)
    gam = np.array([np.dot(psi[: psi.size - h], psi[h:]) for h in range(n)])
    G = np.array([[gam[abs(i - j)] for j in range(n)] for i in range(n)])
    _, logdet = np.linalg.slogdet(G)
    ref = -0.5 * (n * np.log(2 * np.pi) + logdet + y @ np.linalg.solve(G, y))
    bf = _arma.BandedArmaFilter(pi, th, n)
    got = _arma.loglik_at(bf.logdet, bf.standardize(y), np.zeros(0), 1.0)
    kf = _arma.KalmanArma(pi, th)
    logdet_k, U, _, _ = kf.filter(y, np.ones(n, bool))
    got_k = _arma.loglik_at(logdet_k, U, np.zeros(0), 1.0)
    err = max(abs(got - ref), abs(got_k - ref))
    return err < 1e-8, f"max |loglik - dense oracle| = {err:.2e}"


def check_inverse_coeffs(rng) -> tuple:
    spec = DiffSpec(d=1, D=1, s=7)
    a = expand_diff_polynomial(spec)
    K = 40
    b = invert_diff_polynomial(a, K).b
    # long division of 1 by a(L)
    rem = np.zeros(K)
    rem[0] = 1.0
    quot = np.zeros(K)
    for j in range(K):
        quot[j] = rem[j]
        for i in range(1, min(a.degree, K - 1 - j) + 1):
            rem[j + i] -= quot[j] * a.coeffs[i]
    err = float(np.abs(b - quot).max())
    return err == 0.0, f"max |b - long division| = {err:.2e}"


def check_difference_roundtrip(rng) -> tuple:
    spec = DiffSpec(d=1, D=1, s=4)
    y = rng.standard_normal(40).cumsum() + 3.0
    ts = TimeSeries(y)
    dy = difference(ts, spec)
    rebuilt = undifference(dy.values, y[: spec.total_lags], spec)
    err = float(np.abs(rebuilt - y).max())
    return err < 1e-10, f"round-trip max error = {err:.2e}"


def run_all(verbose: bool = False):
    rng = np.random.default_rng(20230701)
    checks = [
        ("psi weights vs unit-impulse simulation", check_psi_impulse),
        ("exact likelihood vs dense Gaussian density", check_likelihood_oracle),
        ("inverse differencing vs polynomial long division", check_inverse_coeffs),
        ("difference / undifference round trip", check_difference_roundtrip),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn(rng)
        except Exception as exc:  # noqa: BLE001 - selftest must report, not crash
            passed, detail = False, f"raised {exc!r}"
        results.append((name, passed, detail))
    return results
