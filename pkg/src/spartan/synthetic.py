"""Test distributions D1-D3 and generic Gaussian / Student-t mixtures.

Student-t components use the *scale* parameterisation: for dof ``nu`` and
scale ``S`` the density is

    Gamma((nu+d)/2) / (Gamma(nu/2) (nu pi)^(d/2) |S|^(1/2))
        * (1 + (x-mu)' S^-1 (x-mu) / nu)^(-(nu+d)/2)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from .core import DataError, NumericError, RngStream, as_sample, as_stream, sym_psd_sqrt


@dataclass(frozen=True)
class Component:
    weight: float
    mean: np.ndarray
    scale: np.ndarray
    dof: Optional[float] = None  # None -> Gaussian

    @property
    def kind(self) -> str:
        return "gaussian" if self.dof is None else "student_t"


@dataclass(frozen=True)
class DistributionSpec:
    components: tuple
    name: str = "custom"

    def __post_init__(self):
        if not self.components:
            raise ValueError("a distribution needs at least one component")
        dims = {c.mean.shape[0] for c in self.components}
        if len(dims) != 1:
            raise ValueError("all components must share one dimension")
        d = dims.pop()
        total = 0.0
        for c in self.components:
            if not 0.0 < c.weight <= 1.0:
                raise ValueError("component weights must lie in (0, 1]")
            if c.scale.shape != (d, d):
                raise ValueError("scale matrix shape does not match the mean")
            if not np.array_equal(c.scale, c.scale.T):
                raise ValueError("scale matrix must be symmetric")
            if np.linalg.eigvalsh(c.scale)[0] < -1e-10:
                raise ValueError("scale matrix must be positive semidefinite")
            if c.dof is not None and not c.dof > 0:
                raise ValueError("degrees of freedom must be positive")
            total += c.weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, not 1")

    @property
    def dim(self) -> int:
        return self.components[0].mean.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def describe(self) -> dict:
        """JSON-friendly summary (for sidecars)."""
        return {
            "name": self.name,
            "dim": self.dim,
            "components": [
                {
                    "kind": c.kind,
                    "weight": c.weight,
                    "mean": c.mean.tolist(),
                    "scale": c.scale.tolist(),
                    **({"dof": c.dof} if c.dof is not None else {}),
                }
                for c in self.components
            ],
        }


def toeplitz_power(rho: float, d: int) -> np.ndarray:
    """``S[i, j] = rho ** |i - j|``."""
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def _check_dim(d) -> int:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def make_d1(d: int) -> DistributionSpec:
    """N(0, S) with S_ij = 0.5^|i-j|."""
    d = _check_dim(d)
    return DistributionSpec(
        (Component(1.0, np.zeros(d), toeplitz_power(0.5, d)),), name="d1"
    )


def make_d2(d: int) -> DistributionSpec:
    """N(1, S)/4 + N(-1, S)/4 + N(0, S)/2 with S_ij = 0.8^|i-j|."""
    d = _check_dim(d)
    S = toeplitz_power(0.8, d)
    return DistributionSpec(
        (
            Component(0.25, np.ones(d), S),
            Component(0.25, -np.ones(d), S),
            Component(0.5, np.zeros(d), S),
        ),
        name="d2",
    )


def make_d3(d: int) -> DistributionSpec:
    """Equal mixture of t(0, S, nu) for nu in 8, 10, 12; S_ij = 0.8^|i-j|."""
    d = _check_dim(d)
    S = toeplitz_power(0.8, d)
    return DistributionSpec(
        tuple(Component(1.0 / 3.0, np.zeros(d), S, dof=float(nu)) for nu in (8, 10, 12)),
        name="d3",
    )


DISTRIBUTIONS = {"d1": make_d1, "d2": make_d2, "d3": make_d3}


def make_distribution(tag: str, d: int) -> DistributionSpec:
    try:
        factory = DISTRIBUTIONS[tag.lower()]
    except KeyError:
        raise DataError(f"unknown distribution tag {tag!r}; expected one of d1, d2, d3") from None
    return factory(d)


def sample(spec: DistributionSpec, n: int, rng, return_labels: bool = False):
    """Draw ``n`` i.i.d. rows from ``spec``.

    Component labels are drawn first, then one standard-normal block and one
    chi-square block per component, so each component's draws only depend on
    the stream and ``n``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    gen = as_stream(rng).generator()
    d = spec.dim
    labels = gen.choice(len(spec.components), size=n, p=spec.weights)
    out = np.empty((n, d))
    for k, c in enumerate(spec.components):
        rows = np.flatnonzero(labels == k)
        z = gen.standard_normal((rows.size, d))
        x = z @ sym_psd_sqrt(c.scale)
        if c.dof is not None:
            chi2 = gen.chisquare(c.dof, size=rows.size)
            x *= np.sqrt(c.dof / chi2)[:, None]
        out[rows] = c.mean + x
    if return_labels:
        return out, labels
    return out


def _component_logpdf(c: Component, x: np.ndarray) -> np.ndarray:
    d = c.mean.shape[0]
    try:
        L = np.linalg.cholesky(c.scale)
    except np.linalg.LinAlgError:
        raise NumericError("singular scale matrix: density undefined") from None
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    if not np.isfinite(log_det):
        raise NumericError("singular scale matrix: density undefined")
    # Mahalanobis distance via a triangular solve
    w = np.linalg.solve(L, (x - c.mean).T)
    maha = np.sum(w * w, axis=0)
    if c.dof is None:
        return -0.5 * (d * np.log(2 * np.pi) + log_det + maha)
    nu = c.dof
    return (
        gammaln((nu + d) / 2)
        - gammaln(nu / 2)
        - 0.5 * d * np.log(nu * np.pi)
        - 0.5 * log_det
        - 0.5 * (nu + d) * np.log1p(maha / nu)
    )


def log_density(spec: DistributionSpec, points) -> np.ndarray:
    x = as_sample(points, "points")
    if x.shape[1] != spec.dim:
        raise DataError(f"points have dimension {x.shape[1]}, spec has {spec.dim}")
    parts = np.stack([np.log(c.weight) + _component_logpdf(c, x) for c in spec.components])
    return logsumexp(parts, axis=0)


def density(spec: DistributionSpec, points) -> np.ndarray:
    """Exact mixture density at each row of ``points``."""
    return np.exp(log_density(spec, points))
