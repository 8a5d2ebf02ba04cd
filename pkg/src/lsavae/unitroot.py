"""OLS and the Augmented Dickey-Fuller test (constant-only regression)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# MacKinnon (1994) p-value response surface for the constant-only case,
# one I(1) variable (MacKinnon, "Approximate asymptotic distribution
# functions for unit-root and cointegration tests", JBES 12, 1994).
# The p-value is Phi(poly(stat)) with separate polynomials either side of
# TAU_STAR; coefficients are in ascending powers of the statistic.
TAU_MAX = 2.74
TAU_MIN = -18.83
TAU_STAR = -1.61
TAU_SMALLP = (2.1659, 1.4412, 3.8269e-2)
TAU_LARGEP = (1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2)

# MacKinnon (2010) finite-sample critical values, constant-only, one
# variable: cv(n) = b0 + b1/n + b2/n^2 + b3/n^3 (Queen's Economics Department WP 1227).
CRIT_2010 = {
    "1%": (-3.43035, -6.5393, -16.786, -79.433),
    "5%": (-2.86154, -2.8903, -4.234, -40.040),
    "10%": (-2.56677, -1.5384, -2.809, 0.0),
}


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    sse: float
    nobs: int
    df: int

    @property
    def aic(self) -> float:
        # Gaussian log-likelihood, same convention as most regression packages
        n = self.nobs
        llf = -0.5 * n * (math.log(2 * math.pi) + math.log(self.sse / n) + 1.0)
        return -2.0 * llf + 2.0 * self.coefficients.size


@dataclass(frozen=True)
class AdfReport:
    statistic: float
    p_value: float
    critical_values: dict
    used_lag: int
    nobs: int
    regression: str = "c"


def ols(design, response) -> OlsFit:
    """Least squares through a Householder QR factorisation.

    Raises :class:`SingularMatrixError` for rank-deficient designs.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows than columns, got {n}x{p}")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= max(n, p) * np.finfo(float).eps * diag.max():
        raise SingularMatrixError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ y) if p > 0 else np.empty(0)
    resid = y - X @ beta
    sse = float(resid @ resid)
    df = n - p
    rinv = np.linalg.inv(r)
    se = np.sqrt(sse / df * np.sum(rinv * rinv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = beta / se
    return OlsFit(beta, resid, se, tstat, sse, n, df)


def schwert_maxlag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def _adf_design(x: np.ndarray, lag: int, start: int):
    """Rows t = start..n-1 of [y_{t-1}, dy_{t-1..t-lag}, 1] and dy_t."""
    dy = np.diff(x)
    # dy[t-1] = x[t] - x[t-1]
    rows = np.arange(start, x.size)
    cols = [x[rows - 1]]
    cols += [dy[rows - 1 - j] for j in range(1, lag + 1)]
    cols.append(np.ones(rows.size))
    return np.column_stack(cols), dy[rows - 1]


def adf_statistic(s, max_lag: int | None = None):
    """ADF t-statistic of the lagged level in ``dy_t = a + rho y_{t-1} + sum phi_j dy_{t-j}``.

    The lag order is chosen by minimum AIC over ``0..max_lag`` on a common
    sample, then the regression is refit on the largest sample that lag
    allows. Returns ``(statistic, used_lag, nobs)``.
    """
    x = np.asarray(s, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("adf_statistic expects a 1-D series")
    n = x.size
    if n < 15:
        raise ValueError(f"series too short for an ADF test ({n} < 15)")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0.0:
        raise ValueError("zero-variance series: the ADF statistic is undefined")
    if max_lag is None:
        max_lag = min(schwert_maxlag(n), n // 2 - 3)
    if max_lag < 0 or n - max_lag - 1 <= max_lag + 3:
        raise ValueError(f"series of length {n} too short for max_lag={max_lag}")

    best_lag = 0
    if max_lag > 0:
        X, y = _adf_design(x, max_lag, max_lag + 1)
        best_aic = np.inf
        for lag in range(max_lag + 1):
            cols = [0] + list(range(1, lag + 1)) + [X.shape[1] - 1]
            aic = ols(X[:, cols], y).aic
            if aic < best_aic:
                best_lag, best_aic = lag, aic
    X, y = _adf_design(x, best_lag, best_lag + 1)
    fit = ols(X, y)
    if fit.sse <= 1e-20 * float(y @ y):
        raise ValueError("ADF regression fits exactly; the series is degenerate")
    return float(fit.t_statistics[0]), best_lag, fit.nobs


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def adf_pvalue(statistic: float, nobs: int | None = None) -> float:
    """MacKinnon approximate p-value for the constant-only ADF statistic.

    The response surface is asymptotic, so ``nobs`` does not enter the
    calculation; it is accepted for call-site symmetry with
    :func:`critical_values`.
    """
    stat = float(statistic)
    if stat > TAU_MAX:
        return 1.0
    if stat < TAU_MIN:
        return 0.0
    coef = TAU_SMALLP if stat <= TAU_STAR else TAU_LARGEP
    poly = sum(c * stat ** i for i, c in enumerate(coef))
    return min(1.0, max(0.0, _norm_cdf(poly)))


def critical_values(nobs: int) -> dict:
    if nobs < 15:
        raise ValueError(f"nobs must be >= 15, got {nobs}")
    inv = 1.0 / nobs
    return {level: b[0] + b[1] * inv + b[2] * inv ** 2 + b[3] * inv ** 3 for level, b in CRIT_2010.items()}


def adf_test(s, max_lag: int | None = None) -> AdfReport:
    stat, lag, nobs = adf_statistic(s, max_lag)
    return AdfReport(stat, adf_pvalue(stat, nobs), critical_values(nobs), lag, nobs)
