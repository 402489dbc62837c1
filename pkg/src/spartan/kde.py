"""Gaussian kernel density estimation with a full bandwidth matrix, bandwidth
rules, and the accuracy scores used to compare subsamples.

The estimator is

    p(z) = 1 / (r |det H|) * sum_i K(H^-1 (z - x_i)),

with ``K`` the standard ``d``-variate normal density. With ``H = h I`` this is
the product-kernel estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DataError,
    NumericError,
    STREAM_REPLICATE,
    STREAM_SYNTHETIC,
    as_sample,
    as_stream,
    check_symmetric,
    default_ridge,
    empirical_covariance,
    sym_psd_sqrt,
)

RULES = ("scott", "theorem1", "fixed")


@dataclass(frozen=True)
class BandwidthRule:
    kind: str = "scott"
    H: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in RULES:
            raise ValueError(f"unknown bandwidth rule {self.kind!r}; expected one of {RULES}")
        if self.kind == "fixed":
            if self.H is None:
                raise ValueError("fixed rule needs a bandwidth matrix")
            _check_pd(self.H, "fixed bandwidth")

    @classmethod
    def parse(cls, rule) -> "BandwidthRule":
        if isinstance(rule, BandwidthRule):
            return rule
        return cls(str(rule))


def _check_pd(H, name="bandwidth") -> np.ndarray:
    H = check_symmetric(H, name)
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise NumericError(f"{name} matrix is not positive definite")
    return H


def rule_exponent(kind: str, d: int) -> float:
    """Power of ``r`` in the scalar bandwidth factor."""
    if kind == "scott":
        return -1.0 / (d + 4)
    if kind == "theorem1":
        return -2.0 / (d + 6)
    raise ValueError(f"rule {kind!r} has no exponent")


def bandwidth(rule, r: int, d: int, sigma_hat=None) -> np.ndarray:
    """Bandwidth matrix for a subsample of size ``r``.

    ``scott`` gives ``r^(-1/(d+4)) * sqrt(sigma_hat)`` and ``theorem1`` gives
    ``r^(-2/(d+6)) * sqrt(sigma_hat)``; ``fixed`` returns its matrix as is.
    A numerically singular ``sigma_hat`` gets a small ridge first.
    """
    rule = BandwidthRule.parse(rule)
    if rule.kind == "fixed":
        return np.array(rule.H, dtype=np.float64)
    if r < 2:
        raise DataError("bandwidth rules need r >= 2")
    S = check_symmetric(sigma_hat, "sigma_hat")
    if S.shape != (d, d):
        raise DataError(f"sigma_hat must be {d}x{d}")
    root = sym_psd_sqrt(S, default_ridge(S))
    H = float(r) ** rule_exponent(rule.kind, d) * root
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise NumericError("covariance is rank deficient beyond ridge repair; bandwidth is singular")
    return H


@dataclass(frozen=True)
class KdeModel:
    points: np.ndarray
    H: np.ndarray
    H_inv: np.ndarray
    log_det_H: float

    @property
    def r(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def kde_model(points, H) -> KdeModel:
    x = as_sample(points, "subsample")
    H = _check_pd(H)
    if H.shape != (x.shape[1], x.shape[1]):
        raise DataError("bandwidth matrix does not match the data dimension")
    sign, log_det = np.linalg.slogdet(H)
    return KdeModel(x, H, np.linalg.inv(H), float(log_det))


def fit_kde(subsample, rule="scott", sigma_hat=None) -> KdeModel:
    """KDE on ``subsample`` with bandwidth from ``rule``.

    ``sigma_hat`` defaults to the subsample covariance; pass the full-sample
    covariance to use the observed sample's spread.
    """
    x = as_sample(subsample, "subsample")
    rule = BandwidthRule.parse(rule)
    if rule.kind != "fixed" and sigma_hat is None:
        sigma_hat = empirical_covariance(x)
    return kde_model(x, bandwidth(rule, x.shape[0], x.shape[1], sigma_hat))


def kde_eval(model: KdeModel, points, chunk_elems: int = 2_000_000) -> np.ndarray:
    """Density estimate at each row of ``points``.

    Kernel terms are summed in extended precision where the platform offers
    it.
    """
    z = as_sample(points, "points")
    if z.shape[1] != model.d:
        raise DataError(f"points have dimension {z.shape[1]}, model has {model.d}")
    r, d = model.points.shape
    norm = np.exp(-model.log_det_H - 0.5 * d * np.log(2 * np.pi)) / r
    out = np.empty(z.shape[0])
    step = max(1, chunk_elems // (r * d))
    for s in range(0, z.shape[0], step):
        diff = z[s:s + step, None, :] - model.points[None, :, :]
        w = diff @ model.H_inv.T
        k = np.exp(-0.5 * np.sum(w * w, axis=2))
        out[s:s + step] = np.sum(k, axis=1, dtype=np.longdouble) * norm
    return out


def hellinger_score(p_hat, p_ref) -> float:
    """``1 - mean(sqrt(p_hat / p_ref))``.

    With an estimated reference the value can be negative; it is returned
    unclamped.
    """
    p_hat = np.asarray(p_hat, dtype=np.float64)
    p_ref = np.asarray(p_ref, dtype=np.float64)
    if p_hat.shape != p_ref.shape:
        raise DataError("density vectors must have equal length")
    if np.any(~(p_ref > 0)):
        raise DataError("reference density must be strictly positive")
    if np.any(p_hat < 0):
        raise DataError("estimated density must be nonnegative")
    return float(1.0 - np.mean(np.sqrt(p_hat / p_ref)))


def _select_indices(selector: str, x: np.ndarray, r: int, stream) -> np.ndarray:
    from .select import kmedoids_select, spartan, uniform_select

    if selector == "spartan":
        return spartan(x, r, rng=stream).indices
    if selector == "uniform":
        return uniform_select(x.shape[0], r, stream)
    if selector == "kmedoids":
        return kmedoids_select(x, r, rng=stream)
    if selector in ("full", "identity"):
        return np.arange(x.shape[0])
    raise DataError(f"unknown selector {selector!r}")


def pointwise_mse_sweep(spec, selector: str, z, n: int, r_list, rule, replicates: int, rng):
    """Monte-Carlo pointwise MSE at ``z`` for several subsample sizes.

    Each replicate draws a fresh sample of size ``n`` and one selection of
    size ``max(r_list)``; smaller sizes use its prefix, which for SPARTAN and
    uniform subsampling is the selection of that size. Bandwidths use the
    full-sample covariance. Returns ``(mse, stderr)`` arrays over
    ``r_list``.
    """
    from .synthetic import density, sample

    if replicates < 2:
        raise ValueError("need at least 2 replicates for a standard error")
    r_list = [int(r) for r in r_list]
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    truth = float(density(spec, z)[0])
    stream = as_stream(rng)
    err = np.empty((replicates, len(r_list)))
    prefix_ok = selector in ("spartan", "uniform")
    for k in range(replicates):
        rep = stream.spawn(STREAM_REPLICATE, k)
        x = sample(spec, n, rep.spawn(STREAM_SYNTHETIC))
        sigma_hat = empirical_covariance(x)
        top = _select_indices(selector, x, max(r_list), rep) if prefix_ok else None
        for j, r in enumerate(r_list):
            idx = top[:r] if prefix_ok else _select_indices(selector, x, r, rep)
            sub = x[idx]
            model = kde_model(sub, bandwidth(rule, len(idx), x.shape[1], sigma_hat))
            err[k, j] = (kde_eval(model, z)[0] - truth) ** 2
    mse = err.mean(axis=0)
    stderr = err.std(axis=0, ddof=1) / np.sqrt(replicates)
    return mse, stderr


def pointwise_mse(spec, selector: str, z, n: int, r: int, rule, replicates: int, rng):
    """Monte-Carlo estimate of ``E (p_hat(z) - p(z))^2`` and its standard error."""
    mse, se = pointwise_mse_sweep(spec, selector, z, n, [r], rule, replicates, rng)
    return float(mse[0]), float(se[0])


def loglog_slope(r_list, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(r)``."""
    return float(np.polyfit(np.log(np.asarray(r_list, float)), np.log(np.asarray(values, float)), 1)[0])
