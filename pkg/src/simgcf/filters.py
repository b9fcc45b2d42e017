"""Scalar graph-signal filter functions on the eigenvalue interval [-1, 1].

A filter is built in three stages:

1. a quadrant-I *backbone* ``f`` (a positive monomial series or the mean of
   Jacobi bases),
2. an optional sigmoid *scaler* ``g`` giving the target ``f' = g * f``,
3. a least-squares monomial fit ``f''`` of the target, whose coefficient
   magnitudes are then signed by the quadrant rule.

The signed monomial coefficients are what propagation consumes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import RankDeficientError

QUADRANTS = ("I", "II", "III", "IV")
BASES = ("monomial", "jacobi")
DEFAULT_DEGREE = 3
DEFAULT_SAMPLES = 1024


def eval_monomial(coeffs: Sequence[float], lam):
    """Horner evaluation of ``sum_i coeffs[i] * lam**i``."""
    lam = np.asarray(lam, dtype=np.float64)
    out = np.zeros_like(lam)
    for c in reversed(list(coeffs)):
        out = out * lam + c
    return out if out.ndim else float(out)


def _check_jacobi_params(a: float, b: float) -> None:
    if a <= -1 or b <= -1:
        raise ValueError(f"Jacobi parameters must exceed -1, got a={a}, b={b}")


def jacobi_bases(a: float, b: float, n: int, lam) -> np.ndarray:
    """Values of J_0..J_n at ``lam``; shape ``(n + 1,) + lam.shape``.

    Three-term recurrence, normalised so that J_k(1) = binom(k + a, k).
    """
    _check_jacobi_params(a, b)
    lam = np.asarray(lam, dtype=np.float64)
    out = np.empty((n + 1,) + lam.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = (a + b + 2.0) * lam / 2.0 + (a - b) / 2.0
    for k in range(2, n + 1):
        s = 2 * k + a + b
        theta = s * (s - 1) / (2 * k * (k + a + b))
        theta1 = (s - 1) * (a * a - b * b) / (2 * k * (k + a + b) * (s - 2))
        theta2 = (k + a - 1) * (k + b - 1) * s / (k * (k + a + b) * (s - 2))
        out[k] = (theta * lam + theta1) * out[k - 1] - theta2 * out[k - 2]
    return out


def eval_jacobi_basis(a: float, b: float, k: int, lam):
    v = jacobi_bases(a, b, k, lam)[k]
    return v if v.ndim else float(v)


def eval_jacobi_backbone(a: float, b: float, n: int, lam):
    """Arithmetic mean of the Jacobi bases of order 0..n."""
    v = jacobi_bases(a, b, n, lam).mean(axis=0)
    return v if v.ndim else float(v)


@dataclass(frozen=True)
class ScalerParams:
    """Sigmoid waveform ``mu / (1 + exp(alpha * (lam + beta)))``.

    ``alpha < 0`` keeps the low-frequency end (lam near 1), ``alpha > 0`` the
    high-frequency end; ``beta`` shifts the transition to ``lam = -beta``.
    """

    mu: float = 1.0
    alpha: float = -3.0
    beta: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"scaler amplitude mu must be positive, got {self.mu}")


def eval_scaler(p: ScalerParams, lam):
    lam = np.asarray(lam, dtype=np.float64)
    z = p.alpha * (lam + p.beta)
    # never exponentiate a positive argument
    e = np.exp(-np.abs(z))
    g = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    g = p.mu * g
    return g if g.ndim else float(g)


def quadrant_signs(quadrant: str, n: int) -> np.ndarray:
    """Per-order signs of the four quadrant constructions."""
    i = np.arange(n + 1)
    if quadrant == "I":
        return np.ones(n + 1)
    if quadrant == "IV":
        return -np.ones(n + 1)
    if quadrant == "II":
        return (-1.0) ** i
    if quadrant == "III":
        return (-1.0) ** (i + 1)
    raise ValueError(f"unknown quadrant {quadrant!r}; expected one of {QUADRANTS}")


def signed_coefficients(base: Sequence[float], quadrant: str) -> np.ndarray:
    base = np.asarray(base, dtype=np.float64)
    return quadrant_signs(quadrant, len(base) - 1) * base


def mirror(h: Callable, quadrant: str) -> Callable:
    """Quadrant image of a quadrant-I function.

    For positive monomial series this agrees with the per-order sign rule:
    IV negates, II reflects ``lam -> -lam``, III does both.
    """
    if quadrant == "I":
        return h
    if quadrant == "IV":
        return lambda lam: -h(lam)
    if quadrant == "II":
        return lambda lam: h(-np.asarray(lam, dtype=np.float64))
    if quadrant == "III":
        return lambda lam: -h(-np.asarray(lam, dtype=np.float64))
    raise ValueError(f"unknown quadrant {quadrant!r}")


def sample_points(m: int, seed: int | None = None) -> np.ndarray:
    """Fit locations on [-1, 1]: an even grid, or seeded uniform draws."""
    if seed is None:
        return np.linspace(-1.0, 1.0, m)
    return np.sort(np.random.default_rng(seed).uniform(-1.0, 1.0, m))


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    rmse: float
    points: np.ndarray


def fit_monomial(
    target: Callable, degree: int, samples: int = DEFAULT_SAMPLES, seed: int | None = None
) -> FitResult:
    """Least-squares monomial coefficients for ``target`` on sampled points.

    Minimises ``||target(X) - V c||_2`` over the sample set ``X`` by solving
    the normal equations ``V^T V c = V^T y`` of the Vandermonde matrix ``V``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    x = sample_points(samples, seed)
    if len(np.unique(x)) < degree + 1:
        raise RankDeficientError(
            f"{len(np.unique(x))} distinct sample points cannot determine {degree + 1} coefficients"
        )
    y = np.asarray(target(x), dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("target is not finite on the sample points")
    v = np.vander(x, degree + 1, increasing=True)
    gram = v.T @ v
    if np.linalg.matrix_rank(gram) < degree + 1:
        raise RankDeficientError("Vandermonde system is rank deficient")
    coeffs = np.linalg.solve(gram, v.T @ y)
    rmse = float(np.sqrt(np.mean((v @ coeffs - y) ** 2)))
    return FitResult(coeffs, rmse, x)


def filter_loss(coeffs: Sequence[float], target: Callable, points: np.ndarray) -> float:
    """Euclidean distance between target and monomial fit on ``points``."""
    return float(np.linalg.norm(np.asarray(target(points)) - eval_monomial(coeffs, points)))


@dataclass(frozen=True)
class FilterSpec:
    """A graph-signal filter: backbone, optional scaler, quadrant and fit."""

    basis: str = "jacobi"
    degree: int = DEFAULT_DEGREE
    a: float = 1.0
    b: float = 1.0
    quadrant: str = "I"
    base_coefficients: tuple[float, ...] | None = None
    scaler: ScalerParams | None = None
    fitted_coefficients: tuple[float, ...] | None = None
    fit_residual: float | None = None
    samples: int = DEFAULT_SAMPLES
    sample_seed: int | None = None

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.quadrant not in QUADRANTS:
            raise ValueError(f"unknown quadrant {self.quadrant!r}")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.basis == "monomial":
            if self.base_coefficients is None:
                object.__setattr__(self, "base_coefficients", (1.0 / (self.degree + 1),) * (self.degree + 1))
            base = tuple(float(c) for c in self.base_coefficients)
            if len(base) != self.degree + 1:
                raise ValueError(f"need {self.degree + 1} base coefficients, got {len(base)}")
            if any(c < 0 for c in base) or not any(c > 0 for c in base):
                raise ValueError("base coefficients must be non-negative and not all zero")
            object.__setattr__(self, "base_coefficients", base)
        else:
            _check_jacobi_params(self.a, self.b)
        if self.fitted_coefficients is not None:
            fitted = tuple(float(c) for c in self.fitted_coefficients)
            if len(fitted) != self.degree + 1:
                raise ValueError("fitted coefficient count does not match degree")
            object.__setattr__(self, "fitted_coefficients", fitted)

    # -- evaluation ---------------------------------------------------------
    def backbone(self, lam):
        """Quadrant-I base filter ``f``."""
        if self.basis == "monomial":
            return eval_monomial(self.base_coefficients, lam)
        return eval_jacobi_backbone(self.a, self.b, self.degree, lam)

    def target(self, lam):
        """Quadrant-I scaled filter ``g * f`` (just ``f`` without a scaler)."""
        f = self.backbone(lam)
        if self.scaler is None:
            return f
        return eval_scaler(self.scaler, lam) * f

    def scaled(self, lam):
        """Quadrant image of :meth:`target`."""
        return mirror(self.target, self.quadrant)(lam)

    def apply_quadrant(self, lam):
        """Signed evaluation of the base coefficients under the quadrant rule."""
        return eval_monomial(signed_coefficients(self.base_magnitudes(), self.quadrant), lam)

    def base_magnitudes(self) -> np.ndarray:
        if self.basis == "monomial":
            return np.asarray(self.base_coefficients)
        # Jacobi backbones are not given in monomial form; use the exact
        # degree-n fit of the backbone alone.
        return np.abs(fit_monomial(self.backbone, self.degree, self.samples, self.sample_seed).coefficients)

    # -- fitting ------------------------------------------------------------
    @property
    def is_fitted(self) -> bool:
        return self.fitted_coefficients is not None

    def fit(self) -> "FilterSpec":
        """Return a copy carrying the monomial fit of :meth:`target`."""
        if self.basis == "monomial" and self.scaler is None:
            coeffs = np.asarray(self.base_coefficients)
            return replace(self, fitted_coefficients=tuple(coeffs), fit_residual=0.0)
        res = fit_monomial(self.target, self.degree, self.samples, self.sample_seed)
        return replace(self, fitted_coefficients=tuple(res.coefficients.tolist()), fit_residual=res.rmse)

    def propagation_coefficients(self) -> np.ndarray:
        """Quadrant-signed magnitudes of the fitted coefficients."""
        if self.fitted_coefficients is None:
            raise ValueError("filter has not been fitted")
        return signed_coefficients(np.abs(self.fitted_coefficients), self.quadrant)

    def polynomial(self, lam):
        """The fitted, quadrant-signed monomial filter ``f''``."""
        return eval_monomial(self.propagation_coefficients(), lam)

    def negated(self) -> "FilterSpec":
        """Mirror across the lam axis: I <-> IV, II <-> III."""
        flip = {"I": "IV", "IV": "I", "II": "III", "III": "II"}
        return replace(self, quadrant=flip[self.quadrant])

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["base_coefficients"] = list(self.base_coefficients) if self.base_coefficients else None
        d["fitted_coefficients"] = list(self.fitted_coefficients) if self.fitted_coefficients else None
        if self.is_fitted:
            d["propagation_coefficients"] = self.propagation_coefficients().tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        d = dict(d)
        d.pop("propagation_coefficients", None)
        scaler = d.pop("scaler", None)
        for key in ("base_coefficients", "fitted_coefficients"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(scaler=ScalerParams(**scaler) if scaler else None, **d)

    @classmethod
    def from_json(cls, text: str) -> "FilterSpec":
        return cls.from_dict(json.loads(text))


def lightgcn_filter(degree: int = DEFAULT_DEGREE) -> FilterSpec:
    """Uniform monomial coefficients, i.e. mean aggregation over hops."""
    return FilterSpec(basis="monomial", degree=degree).fit()


def waveform_table(spec: FilterSpec, points: int = 41) -> list[dict]:
    """Rows of (lam, f, g, f', f'') for plotting a fitted filter."""
    lam = np.linspace(-1.0, 1.0, points)
    # II and III reflect the whole target, scaler included
    g_lam = -lam if spec.quadrant in ("II", "III") else lam
    g = eval_scaler(spec.scaler, g_lam) if spec.scaler else np.ones_like(lam)
    f = mirror(spec.backbone, spec.quadrant)(lam)
    rows = []
    fpp = spec.polynomial(lam) if spec.is_fitted else np.full_like(lam, np.nan)
    fp = spec.scaled(lam)
    for k in range(points):
        rows.append({"lambda": float(lam[k]), "f": float(f[k]), "g": float(g[k]),
                     "f_scaled": float(fp[k]), "f_fit": float(fpp[k])})
    return rows
