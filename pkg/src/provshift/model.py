"""L2-regularized logistic regression with provenance-aware adjustment.

The adjusted variant augments the design matrix with a two-column one-hot
encoding of the provenance indicator, each membership carrying the value
``v`` rather than 1; the fitted provenance weights then support prediction
that marginalizes the provenance out:

    P(y | x) = sum_c P(y | x, z=c) * P(z=c)

``P(z)`` is estimated from training-sample frequencies. The unadjusted
baseline sees no provenance column at all.

The solver is a deterministic full-batch limited-memory quasi-Newton
method (two-loop L-BFGS) with Armijo backtracking, initialized at the
origin. The objective is smooth and strictly convex in the penalized
coordinates, so any descent path reaches the same optimum; determinism
matters because sweep results must reproduce bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

__all__ = [
    "LRConfig",
    "FittedLR",
    "BackdoorLogisticRegression",
    "fit_lr",
    "estimate_pz",
    "objective",
    "penalized_nll",
    "penalized_nll_grad",
]


@dataclass(frozen=True)
class LRConfig:
    """Training configuration.

    ``C`` is the inverse regularization strength (penalty is
    ``(1/2C) * (|beta1|^2 + |beta2|^2)``, intercept unpenalized); ``v`` is
    the magnitude assigned to one-hot provenance membership; ``tol`` is
    the gradient sup-norm at which the solver declares convergence.
    """

    C: float = 1.0
    v: float = 10.0
    tol: float = 1e-6
    max_iter: int = 1000

    def __post_init__(self) -> None:
        if not self.C > 0.0:
            raise ValueError(f"C={self.C!r} must be positive")
        if self.v < 0.0:
            raise ValueError(f"v={self.v!r} must be non-negative")
        if not self.tol > 0.0:
            raise ValueError(f"tol={self.tol!r} must be positive")
        if self.max_iter < 1:
            raise ValueError(f"max_iter={self.max_iter!r} must be a positive integer")


@dataclass(frozen=True)
class FittedLR:
    """Fitted weights. ``beta2`` is empty for unadjusted models.

    Predictions depend on the product ``v * beta2[c]`` only; ``v`` is
    carried so both the fit-time and prediction-time views of the scaled
    one-hot encoding stay numerically consistent.
    """

    beta0: float
    beta1: np.ndarray
    beta2: np.ndarray
    v: float
    pz: np.ndarray | None = None
    converged: bool = field(default=True, compare=False)
    n_iter: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        beta1 = np.asarray(self.beta1, dtype=np.float64)
        beta2 = np.asarray(self.beta2, dtype=np.float64)
        if beta2.shape not in ((0,), (2,)):
            raise ValueError("beta2 must have length 0 or 2")
        for arr in (beta1, beta2):
            arr.setflags(write=False)
        object.__setattr__(self, "beta1", beta1)
        object.__setattr__(self, "beta2", beta2)
        if self.pz is not None:
            pz = np.asarray(self.pz, dtype=np.float64)
            if pz.shape != (2,) or np.any(pz < 0.0) or abs(float(pz.sum()) - 1.0) > 1e-9:
                raise ValueError("pz must be two non-negative entries summing to 1")
            pz.setflags(write=False)
            object.__setattr__(self, "pz", pz)

    @property
    def adjusted(self) -> bool:
        return self.beta2.shape[0] == 2

    def _logits(self, X) -> tuple[np.ndarray, bool]:
        X, single = _as_design(X, self.beta1.shape[0])
        eta = np.asarray(X @ self.beta1) + self.beta0
        return eta, single

    def predict_conditional(self, X, c: int):
        """P(y=1 | x, z=c): sigmoid of the feature logit plus v*beta2[c].

        Unadjusted models ignore ``c``. ``X`` may be a single feature
        vector (returns a float) or a matrix (returns an array).
        """
        if c not in (0, 1):
            raise ValueError(f"provenance class must be 0 or 1, got {c!r}")
        eta, single = self._logits(X)
        if self.adjusted:
            eta = eta + self.v * self.beta2[c]
        prob = expit(eta)
        return float(prob[0]) if single else prob

    def predict_backdoor(self, X):
        """P(y=1 | x) marginalized over the training provenance mix.

        The record's true provenance is deliberately not consulted. When
        the two conditionals coincide (beta2 = 0) this is exactly the
        conditional prediction, so the mixture is computed as an
        interpolation rather than a dot product.
        """
        if not self.adjusted:
            raise ValueError("model has no provenance weights; fit with z to adjust")
        if self.pz is None:
            raise ValueError("model has no provenance distribution (pz)")
        p0 = self.predict_conditional(X, 0)
        p1 = self.predict_conditional(X, 1)
        return p0 + self.pz[1] * (p1 - p0)

    def to_text(self) -> str:
        """Line-oriented audit serialization; floats keep full precision."""
        lines = [
            _fmt_line("beta0", [self.beta0]),
            _fmt_line("beta1", self.beta1),
            _fmt_line("beta2", self.beta2),
            _fmt_line("v", [self.v]),
            _fmt_line("pz", [] if self.pz is None else self.pz),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FittedLR":
        fields: dict[str, list[float]] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            parts = line.split()
            fields[parts[0]] = [float(tok) for tok in parts[1:]]
        for key in ("beta0", "beta1", "beta2", "v", "pz"):
            if key not in fields:
                raise ValueError(f"serialized model missing key {key!r}")
        if len(fields["beta0"]) != 1 or len(fields["v"]) != 1:
            raise ValueError("beta0 and v must each carry exactly one value")
        pz = fields["pz"]
        return cls(
            beta0=fields["beta0"][0],
            beta1=np.asarray(fields["beta1"], dtype=np.float64),
            beta2=np.asarray(fields["beta2"], dtype=np.float64),
            v=fields["v"][0],
            pz=np.asarray(pz, dtype=np.float64) if pz else None,
        )


def _fmt_line(key: str, values) -> str:
    return " ".join([key] + [repr(float(x)) for x in values])


def _as_design(X, expected_dim: int | None = None):
    """Normalize a feature input to a 2-d matrix; flag single vectors."""
    single = False
    if sp.issparse(X):
        X = X.tocsr().astype(np.float64)
        if not np.all(np.isfinite(X.data)):
            raise ValueError("non-finite feature values")
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
            single = True
        if X.ndim != 2:
            raise ValueError(f"features must be a vector or matrix, got ndim={X.ndim}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
    if expected_dim is not None and X.shape[1] != expected_dim:
        raise ValueError(
            f"feature dimension mismatch: got {X.shape[1]}, expected {expected_dim}"
        )
    return X, single


def _validate_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n_rows,):
        raise ValueError(f"labels must be a length-{n_rows} vector, got shape {y.shape}")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


def _validate_provenance(z, n_rows: int) -> np.ndarray:
    z = np.asarray(z)
    if z.shape != (n_rows,):
        raise ValueError(f"provenance must be a length-{n_rows} vector, got shape {z.shape}")
    if not np.all(np.isin(z, (0, 1))):
        raise ValueError("provenance values must be 0 or 1")
    return z.astype(np.int64)


def _value_and_grad(w: np.ndarray, X, y: np.ndarray, z: np.ndarray | None, C: float, v: float):
    """Penalized negative log-likelihood and its gradient, packed.

    The residual is computed branch-wise on the label so that flipping
    every label (and negating the weights) negates each residual entry
    bit-for-bit; this keeps the whole solver path exactly sign-symmetric.
    """
    d = X.shape[1]
    b0 = w[0]
    b1 = w[1 : 1 + d]
    b2 = w[1 + d :]
    eta = np.asarray(X @ b1) + b0
    if b2.shape[0]:
        eta = eta + v * b2[z]
    signs = 1.0 - 2.0 * y
    loss = float(np.logaddexp(0.0, signs * eta).sum())
    f = loss + 0.5 / C * (float(b1 @ b1) + float(b2 @ b2))

    r = np.where(y == 1, -expit(-eta), expit(eta))
    g = np.empty_like(w)
    g[0] = r.sum()
    g[1 : 1 + d] = np.asarray(X.T @ r) + b1 / C
    if b2.shape[0]:
        g[1 + d] = v * r[z == 0].sum() + b2[0] / C
        g[2 + d] = v * r[z == 1].sum() + b2[1] / C
    return f, g


def _lbfgs_minimize(fun_grad, w0: np.ndarray, tol: float, max_iter: int, memory: int = 10):
    """Two-loop L-BFGS with Armijo backtracking; converges on gradient
    sup-norm. Returns (w, f, converged, n_iter)."""
    w = w0.astype(np.float64, copy=True)
    f, g = fun_grad(w)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    n_iter = 0
    while n_iter < max_iter:
        if float(np.max(np.abs(g), initial=0.0)) <= tol:
            return w, f, True, n_iter
        n_iter += 1

        # Two-loop recursion for the quasi-Newton direction.
        q = g.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * yv
        if y_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, yv, rho), a in zip(
            zip(s_hist, y_hist, rho_hist), reversed(alphas)
        ):
            b = rho * float(yv @ q)
            q += (a - b) * s
        direction = -q

        gd = float(g @ direction)
        if gd >= 0.0:
            direction = -g
            gd = float(g @ direction)

        is_steepest = not s_hist or np.array_equal(direction, -g)
        step = 1.0 if s_hist else 1.0 / max(1.0, float(np.max(np.abs(g))))
        accepted = False
        for _ in range(60):
            w_new = w + step * direction
            f_new, g_new = fun_grad(w_new)
            if f_new <= f + 1e-4 * step * gd:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if not is_steepest:
                # Quasi-Newton step stalled; drop curvature and retry.
                s_hist.clear()
                y_hist.clear()
                rho_hist.clear()
                continue
            break  # No progress possible at float resolution.

        s = w_new - w
        yv = g_new - g
        ys = float(yv @ s)
        if ys > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / ys)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        w, f, g = w_new, f_new, g_new
    converged = float(np.max(np.abs(g), initial=0.0)) <= tol
    return w, f, converged, n_iter


def fit_lr(
    X,
    y: Sequence[int],
    z: Sequence[int] | None = None,
    cfg: LRConfig | None = None,
    init: np.ndarray | None = None,
) -> FittedLR:
    """Fit the penalized logistic regression.

    With ``z`` given, each row gains a two-column one-hot provenance
    encoding scaled by ``cfg.v`` and the empirical provenance frequencies
    are captured for backdoor prediction. Requires at least one example
    of each class.
    """
    cfg = cfg or LRConfig()
    X, _ = _as_design(X)
    n, d = X.shape
    y = _validate_labels(y, n)
    if y.sum() == 0 or y.sum() == n:
        raise ValueError("training labels are single-class; need both classes present")
    z_arr = None
    pz = None
    k = 0
    if z is not None:
        z_arr = _validate_provenance(z, n)
        pz = estimate_pz(z_arr)
        k = 2

    w0 = np.zeros(1 + d + k)
    if init is not None:
        init = np.asarray(init, dtype=np.float64)
        if init.shape != w0.shape:
            raise ValueError(f"init must have shape {w0.shape}, got {init.shape}")
        w0 = init.copy()

    def fun_grad(w):
        return _value_and_grad(w, X, y, z_arr, cfg.C, cfg.v)

    w, _, converged, n_iter = _lbfgs_minimize(fun_grad, w0, cfg.tol, cfg.max_iter)
    return FittedLR(
        beta0=float(w[0]),
        beta1=w[1 : 1 + d].copy(),
        beta2=w[1 + d :].copy(),
        v=cfg.v,
        pz=pz,
        converged=converged,
        n_iter=n_iter,
    )


def estimate_pz(z: Sequence[int]) -> np.ndarray:
    """Empirical provenance distribution from a training sample."""
    z = np.asarray(z)
    if z.size == 0:
        raise ValueError("cannot estimate provenance distribution from no data")
    z = _validate_provenance(z, z.shape[0])
    n1 = int(z.sum())
    n = z.shape[0]
    return np.array([(n - n1) / n, n1 / n])


def penalized_nll(
    beta0: float,
    beta1: np.ndarray,
    beta2: np.ndarray,
    X,
    y: Sequence[int],
    z: Sequence[int] | None = None,
    C: float = 1.0,
    v: float = 10.0,
) -> float:
    """Training objective at arbitrary weights (for verification)."""
    beta1 = np.asarray(beta1, dtype=np.float64)
    beta2 = np.asarray(beta2, dtype=np.float64)
    X, _ = _as_design(X, beta1.shape[0])
    y = _validate_labels(y, X.shape[0])
    if beta2.shape[0] and z is None:
        raise ValueError("beta2 present but no provenance column supplied")
    z_arr = _validate_provenance(z, X.shape[0]) if beta2.shape[0] else None
    w = np.concatenate([[beta0], beta1, beta2])
    f, _ = _value_and_grad(w, X, y, z_arr, C, v)
    return f


def penalized_nll_grad(
    beta0: float,
    beta1: np.ndarray,
    beta2: np.ndarray,
    X,
    y: Sequence[int],
    z: Sequence[int] | None = None,
    C: float = 1.0,
    v: float = 10.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`penalized_nll`, split by weight block."""
    beta1 = np.asarray(beta1, dtype=np.float64)
    beta2 = np.asarray(beta2, dtype=np.float64)
    X, _ = _as_design(X, beta1.shape[0])
    y = _validate_labels(y, X.shape[0])
    if beta2.shape[0] and z is None:
        raise ValueError("beta2 present but no provenance column supplied")
    z_arr = _validate_provenance(z, X.shape[0]) if beta2.shape[0] else None
    w = np.concatenate([[beta0], beta1, beta2])
    _, g = _value_and_grad(w, X, y, z_arr, C, v)
    d = beta1.shape[0]
    return float(g[0]), g[1 : 1 + d], g[1 + d :]


def objective(
    model: FittedLR,
    X,
    y: Sequence[int],
    z: Sequence[int] | None = None,
    cfg: LRConfig | None = None,
) -> float:
    """Penalized negative log-likelihood at the fitted weights."""
    cfg = cfg or LRConfig(v=model.v)
    return penalized_nll(
        model.beta0, model.beta1, model.beta2, X, y, z, C=cfg.C, v=model.v
    )


class BackdoorLogisticRegression(BaseEstimator, ClassifierMixin):
    """Sklearn-style front end for the provenance-adjusted classifier.

    Fit with ``provenance`` to get the adjusted model (backdoor-averaged
    ``predict_proba``); without it, a plain L2 logistic regression.
    """

    def __init__(self, C: float = 1.0, v: float = 10.0, tol: float = 1e-6, max_iter: int = 1000):
        self.C = C
        self.v = v
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, provenance=None) -> "BackdoorLogisticRegression":
        cfg = LRConfig(C=self.C, v=self.v, tol=self.tol, max_iter=self.max_iter)
        self.result_ = fit_lr(X, y, provenance, cfg)
        self.intercept_ = self.result_.beta0
        self.coef_ = self.result_.beta1
        self.provenance_coef_ = self.result_.beta2
        self.pz_ = self.result_.pz
        self.n_iter_ = self.result_.n_iter
        self.converged_ = self.result_.converged
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self) -> FittedLR:
        if not hasattr(self, "result_"):
            raise ValueError("estimator is not fitted")
        return self.result_

    def predict_proba(self, X) -> np.ndarray:
        model = self._check_fitted()
        if model.adjusted:
            p1 = model.predict_backdoor(X)
        else:
            p1 = model.predict_conditional(X, 0)
        p1 = np.atleast_1d(p1)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def predict_conditional(self, X, c: int):
        return self._check_fitted().predict_conditional(X, c)

    def predict_backdoor(self, X):
        return self._check_fitted().predict_backdoor(X)

    def objective(self, X, y, provenance=None) -> float:
        model = self._check_fitted()
        cfg = LRConfig(C=self.C, v=self.v, tol=self.tol, max_iter=self.max_iter)
        return objective(model, X, y, provenance, cfg)
