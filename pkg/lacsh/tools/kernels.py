# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`kernels` collects the statistical primitives shared by the sampler and the posterior analysis: dense
Cholesky factorization with a jitter policy, random samplers for the conjugate updates, the first principal component
and the frequentist linear and logistic regressions of the covariate balance diagnostic.

Every sampler takes an explicit :class:`~lacsh.tools.random.RandomStream` and never touches global state.
"""
import dataclasses
import warnings

import numpy as np
import scipy.linalg
from scipy import special, stats
import statsmodels.api as sm
from statsmodels.tools import sm_exceptions

from ..core.errors import (NotPositiveDefinite, CovarianceFactorizationFailure, InvalidDf, InvalidParameter,
                           NonpositiveVariance, NumericalUnderflow, DegenerateInput, RankDeficient, Separation,
                           SingleClass)

_LOG_2PI = np.log(2 * np.pi)

#: relative size of the diagonal jitter added once when a covariance cannot be factorized
JITTER = 1e-10
#: below this standardized upper bound the truncated normal is drawn by exponential rejection in the tail
TAIL_BOUNDARY = -4.0
#: largest absolute logistic coefficient before the fit is declared separated
SEPARATION_BOUND = 15.0


@dataclasses.dataclass
class CholeskyFactor:
    """
    Lower-triangular Cholesky factor *L* of a symmetric positive definite matrix ``A = L L^T``.
    """
    L: np.ndarray

    @property
    def dimension(self):
        return self.L.shape[0]

    @property
    def matrix(self):
        return self.L @ self.L.T

    def logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self.L)))

    def solve(self, b):
        """
        Solve ``A x = b``.
        """
        return scipy.linalg.cho_solve((self.L, True), b)

    def inverse(self):
        return self.solve(np.eye(self.dimension))

    def whiten(self, x):
        """
        Return ``L^{-1} x`` so that the quadratic form ``x^T A^{-1} x`` is the squared norm of the result.
        """
        return scipy.linalg.solve_triangular(self.L, x, lower=True)

    def scaled(self, c):
        """
        Factor of ``c * A`` for a positive scalar *c*.
        """
        return CholeskyFactor(np.sqrt(c) * self.L)


def cholesky(A):
    """
    Cholesky factorization of a symmetric positive definite matrix.

    :param A: symmetric matrix, symmetric to 1e-10 relative to its largest entry
    :return: :class:`CholeskyFactor`
    :raises NotPositiveDefinite: if *A* is not symmetric or not positive definite
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise NotPositiveDefinite('matrix of shape {} is not square'.format(A.shape))
    scale = max(1.0, np.abs(A).max()) if A.size else 1.0
    if not np.allclose(A, A.T, rtol=0, atol=1e-10 * scale):
        raise NotPositiveDefinite('matrix is not symmetric')
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite('matrix has non-finite entries')
    try:
        L = scipy.linalg.cholesky((A + A.T) / 2, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(str(e))
    return CholeskyFactor(L)


def factorize(A, scale=None):
    """
    Cholesky factorization with the jitter policy: if the plain factorization fails, ``JITTER * scale`` is added to the
    diagonal once and the factorization retried.

    :param A: symmetric matrix
    :param scale: reference variance of the jitter, by default the largest diagonal entry
    :raises CovarianceFactorizationFailure: if the jittered matrix cannot be factorized either
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    try:
        return cholesky(A)
    except NotPositiveDefinite:
        pass
    if scale is None:
        scale = float(np.max(np.abs(np.diag(A)))) if A.size else 1.0
    try:
        return cholesky(A + JITTER * scale * np.eye(A.shape[0]))
    except NotPositiveDefinite as e:
        raise CovarianceFactorizationFailure('covariance cannot be factorized after jitter: {}'.format(e))


def sample_mvn(mean, cov, rng):
    """
    Draw from ``MVN(mean, cov)`` as ``mean + L z`` with i.i.d. standard normal *z*.

    :param mean: mean vector
    :param cov: covariance matrix or its :class:`CholeskyFactor`
    :param rng: :class:`~lacsh.tools.random.RandomStream`
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if isinstance(cov, CholeskyFactor):
        factor = cov
    else:
        try:
            factor = factorize(cov)
        except CovarianceFactorizationFailure as e:
            raise NotPositiveDefinite(str(e))
    z = rng.normal(mean.size)
    return mean + factor.L @ z


def sample_mvn_canonical(precision, b, rng):
    """
    Draw from the normal with the given *precision* matrix and mean ``precision^{-1} b`` (canonical form), the shape in
    which every conjugate normal update arrives.

    :return: a tuple ``(draw, mean)``
    """
    factor = factorize(precision)
    mean = factor.solve(b)
    z = rng.normal(np.size(mean))
    return mean + scipy.linalg.solve_triangular(factor.L.T, z, lower=False), mean


def _robert_tail(a, rng, max_tries=10000):
    # N(0, 1) restricted to [a, inf) with a > 0, translated exponential proposal
    alpha = (a + np.sqrt(a * a + 4.0)) / 2.0
    for _ in range(max_tries):
        z = a + rng.exponential() / alpha
        if rng.uniform() <= np.exp(-(z - alpha) ** 2 / 2.0):
            return z
    raise NumericalUnderflow('tail rejection sampler did not accept within {} proposals'.format(max_tries))


def sample_truncated_normal_upper(mean, var, upper, rng, size=None):
    """
    Draw from ``Normal(mean, var)`` conditioned on being below *upper*.

    The standardized bound ``b = (upper - mean) / sd`` selects the method: inverse-CDF sampling
    ``mean + sd * ndtri(u * Phi(b))`` when ``b >= -4`` and the exponential rejection sampler in the lower tail
    otherwise, so that bounds far below the mean never underflow.

    :param size: None for a scalar, otherwise the number of i.i.d. draws
    """
    if not var > 0:
        raise NonpositiveVariance('variance must be positive, got {}'.format(var))
    sd = np.sqrt(var)
    if np.isposinf(upper):
        z = rng.normal(size)
        return mean + sd * z
    b = (upper - mean) / sd
    if b >= TAIL_BOUNDARY:
        z = special.ndtri(rng.uniform(size) * special.ndtr(b))
        return mean + sd * z
    if size is None:
        return mean - sd * _robert_tail(-b, rng)
    return mean - sd * np.array([_robert_tail(-b, rng) for _ in range(int(size))])


def sample_inverse_wishart(df, scale, rng):
    """
    Draw ``Sigma ~ Inverse-Wishart(df, scale)`` by the Bartlett decomposition of the Wishart on the inverse scale.

    With ``scale = C C^T`` and the Bartlett factor *A* (diagonal ``sqrt(chi2(df - i))``, standard normals below), the
    precision ``C^{-T} A A^T C^{-1}`` is Wishart and its inverse ``(A^{-1} C^T)^T (A^{-1} C^T)`` is returned. The chi-square
    deviates are drawn first, then the sub-diagonal normals row by row.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    p = scale.shape[0]
    if not df > p - 1:
        raise InvalidDf('degrees of freedom {} must exceed dimension - 1 = {}'.format(df, p - 1))
    C = cholesky(scale).L
    shapes = (df - np.arange(p)) / 2.0
    A = np.diag(np.sqrt(2.0 * rng.gamma(shapes, size=p)))
    rows, cols = np.tril_indices(p, -1)
    if rows.size:
        A[rows, cols] = rng.normal(rows.size)
    T = scipy.linalg.solve_triangular(A, C.T, lower=True)
    sigma = T.T @ T
    return (sigma + sigma.T) / 2


def sample_inverse_gamma(shape, scale, rng, size=None):
    """
    Draw from the inverse gamma with density proportional to ``x^{-shape-1} exp(-scale / x)``, i.e. ``scale / G`` with
    ``G ~ Gamma(shape, 1)``.
    """
    if not (shape > 0 and scale > 0):
        raise InvalidParameter('shape and scale must be positive, got {} and {}'.format(shape, scale))
    return scale / rng.gamma(shape, size)


def normal_logpdf(x, mean, var):
    if not np.all(np.asarray(var) > 0):
        raise NonpositiveVariance('variance must be positive')
    x = np.asarray(x, dtype=float)
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def normal_pdf(x, mean, var):
    """
    Density of ``Normal(mean, var)`` at *x* (vectorized).
    """
    return np.exp(normal_logpdf(x, mean, var))


def mvn_logpdf(x, mean, factor):
    """
    Log-density of ``MVN(mean, A)`` at *x* given the :class:`CholeskyFactor` of *A*.
    """
    w = factor.whiten(np.asarray(x, dtype=float) - mean)
    return -0.5 * (factor.dimension * _LOG_2PI + factor.logdet() + np.dot(w, w))


def first_principal_component(X):
    """
    Scores of the first principal component of the column-centered *X*. The sign is fixed so that the loading of largest
    absolute value is positive.

    :param X: n x k matrix
    :return: score vector of length n
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Xc = X - X.mean(axis=0)
    if not np.any(np.abs(Xc) > 0):
        raise DegenerateInput('all columns are constant')
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    loading = vt[0]
    if loading[np.argmax(np.abs(loading))] < 0:
        loading = -loading
    return Xc @ loading


@dataclasses.dataclass
class RegressionFit:
    """
    Result of a frequentist regression. *p_values* are two-sided Wald p-values from the normal approximation.
    """
    coefficients: np.ndarray
    residual_se: float
    coefficient_se: np.ndarray
    p_values: np.ndarray
    fitted: np.ndarray = None
    n_iterations: int = 0
    converged: bool = True


def wald_p_values(coefficients, se):
    """
    Two-sided p-values ``2 * (1 - Phi(|coef / se|))``. A zero standard error yields 0 for a nonzero coefficient and 1
    otherwise.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    se = np.asarray(se, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.abs(coefficients) / se
    z = np.where(se > 0, z, np.where(coefficients != 0, np.inf, 0.0))
    return 2.0 * stats.norm.sf(z)


def _check_design(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.size != n:
        raise RankDeficient('design has {} rows but response has {}'.format(n, y.size))
    if n <= k or np.linalg.matrix_rank(X) < k:
        raise RankDeficient('design matrix of shape {} has rank {}'.format(X.shape, np.linalg.matrix_rank(X)))
    return X, y


def fit_linear_regression(X, y):
    """
    Ordinary least squares with :class:`statsmodels.api.OLS`.

    :param X: n x k design including the intercept column
    :param y: response of length n
    :return: :class:`RegressionFit`; *residual_se* uses the denominator ``n - k``
    """
    X, y = _check_design(X, y)
    res = sm.OLS(y, X).fit()
    n, k = X.shape
    residual_se = float(np.sqrt(max(res.ssr, 0.0) / (n - k)))
    se = np.asarray(res.bse, dtype=float)
    se = np.where(np.isfinite(se), se, 0.0)
    coef = np.asarray(res.params, dtype=float)
    return RegressionFit(coefficients=coef, residual_se=residual_se, coefficient_se=se,
                         p_values=wald_p_values(coef, se), fitted=np.asarray(res.fittedvalues, dtype=float))


_SEPARATION_SIGNALS = tuple(getattr(sm_exceptions, name) for name in ('PerfectSeparationError',
                                                                          'PerfectSeparationWarning')
                            if hasattr(sm_exceptions, name))


def fit_logistic_regression(X, y, maxiter=100, tol=1e-8):
    """
    Maximum likelihood logistic regression by iteratively reweighted least squares, via the binomial
    :class:`statsmodels.api.GLM`. Iteration stops after *maxiter* steps or when no coefficient moves by more than *tol*.

    :param X: n x k design including the intercept column
    :param y: binary response of length n
    :return: :class:`RegressionFit` with Wald standard errors from the final information matrix
    :raises SingleClass: if only one class is present
    :raises Separation: on (quasi-)complete separation, i.e. a reported perfect separation or a coefficient whose
        magnitude exceeds :data:`SEPARATION_BOUND`
    """
    X, y = _check_design(X, y)
    if not np.all((y == 0) | (y == 1)):
        raise SingleClass('response must be binary')
    if y.min() == y.max():
        raise SingleClass('response has a single class')
    model = sm.GLM(y, X, family=sm.families.Binomial())
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        try:
            res = model.fit(method='IRLS', maxiter=maxiter, tol=tol, tol_criterion='params')
        except _SEPARATION_SIGNALS + (np.linalg.LinAlgError,) as e:
            raise Separation('perfect separation: {}'.format(e))
    coef = np.asarray(res.params, dtype=float)
    se = np.asarray(res.bse, dtype=float)
    n_iter = int(getattr(res, 'fit_history', {}).get('iteration', maxiter))
    converged = bool(getattr(res, 'converged', True))
    fit = RegressionFit(coefficients=coef, residual_se=0.0, coefficient_se=se, p_values=wald_p_values(coef, se),
                        fitted=np.asarray(res.fittedvalues, dtype=float), n_iterations=n_iter, converged=converged)
    signalled = any(issubclass(w.category, _SEPARATION_SIGNALS) for w in caught if isinstance(w.category, type))
    if signalled or not np.all(np.isfinite(coef)) or np.abs(coef).max() > SEPARATION_BOUND:
        raise Separation('quasi-complete separation: max |coefficient| = {:.3g}'.format(np.abs(coef).max()), fit=fit)
    if not np.all(np.isfinite(se)):
        raise Separation('information matrix is singular', fit=fit)
    return fit


__all__ = ['CholeskyFactor', 'RegressionFit', 'cholesky', 'factorize', 'sample_mvn', 'sample_mvn_canonical',
           'sample_truncated_normal_upper', 'sample_inverse_wishart', 'sample_inverse_gamma', 'normal_pdf',
           'normal_logpdf', 'mvn_logpdf', 'first_principal_component', 'fit_linear_regression',
           'fit_logistic_regression', 'wald_p_values', 'JITTER', 'TAIL_BOUNDARY', 'SEPARATION_BOUND']
