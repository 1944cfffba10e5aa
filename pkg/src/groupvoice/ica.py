"""FastICA blind source separation by deflation.

Mixtures are centred and whitened with the eigendecomposition of their
sample covariance, ``V = P D^-1/2 P^T``. Unmixing directions ``w`` are then
found one at a time by the fixed-point iteration

    w+ = E{z g(w'z)} - E{g'(w'z)} w

followed by Gram-Schmidt orthogonalisation against the directions already
found and renormalisation. ``g`` is the derivative of the contrast ``G``
used in the negentropy approximation ``J(y) = [E G(y) - E G(v)]^2``.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSignalError, DimensionMismatchError, WhiteningDegeneracyError
from .scene import SeparationScore, best_permutation
from .signal import MonoSignal

log = logging.getLogger(__name__)

DEGENERACY_RATIO = 1e-10

_CONTRASTS = {
    "logcosh": kernels.LOGCOSH,
    "tanh": kernels.LOGCOSH,
    "gauss": kernels.GAUSS,
    "exp": kernels.GAUSS,
}


def contrast_id(name: str) -> int:
    try:
        return _CONTRASTS[name]
    except KeyError:
        raise ValueError(f"unknown contrast {name!r}; choose from {sorted(_CONTRASTS)}") from None


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, MonoSignal):
        return x.samples[None, :].copy()
    if len(x) and isinstance(x[0], MonoSignal):
        if len({len(s) for s in x}) > 1:
            raise DimensionMismatchError("channels must have equal length")
        return np.stack([s.samples for s in x])
    arr = np.array(x, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


# ---------------------------------------------------------------- preprocessing

def center(x):
    """Remove each channel's mean. Returns ``(centred, means)``."""
    x = _as_matrix(x)
    if x.size == 0 or x.shape[1] < 2:
        raise ValueError("centering needs at least two samples per channel")
    means = x.mean(axis=1)
    xc = x - means[:, None]
    # second pass removes the rounding residue of the first
    xc -= xc.mean(axis=1, keepdims=True)
    return xc, means + 0.0


@dataclass(frozen=True)
class WhiteningTransform:
    """``E(XX') = P D P'``; eigenvalues in ``d`` sorted descending."""

    means: np.ndarray
    p: np.ndarray
    d: np.ndarray
    n_components: int

    @property
    def matrix(self) -> np.ndarray:
        """The whitening matrix applied to centred data.

        With all components kept this is the symmetric ``P D^-1/2 P'``;
        otherwise the top ``n_components`` rows of ``D^-1/2 P'``.
        """
        k = self.n_components
        if k == len(self.d):
            return (self.p / np.sqrt(self.d)) @ self.p.T
        return (self.p[:, :k] / np.sqrt(self.d[:k])).T

    @property
    def dewhitening(self) -> np.ndarray:
        k = self.n_components
        if k == len(self.d):
            return (self.p * np.sqrt(self.d)) @ self.p.T
        return self.p[:, :k] * np.sqrt(self.d[:k])

    def apply(self, x) -> np.ndarray:
        x = _as_matrix(x)
        return self.matrix @ (x - self.means[:, None])


def whiten(xc, n_components: int | None = None, means=None):
    """Whiten centred data. Returns ``(whitened, WhiteningTransform)``.

    Raises
    ------
    WhiteningDegeneracyError
        If a retained eigenvalue is below ``1e-10`` times the largest.
    """
    xc = _as_matrix(xc)
    m, n = xc.shape
    if n < 2:
        raise ValueError("whitening needs at least two samples")
    k = m if n_components is None else int(n_components)
    if not 1 <= k <= m:
        raise ValueError(f"n_components must be in 1..{m}")
    cov = (xc @ xc.T) / n
    d, p = np.linalg.eigh(cov)
    order = np.argsort(d)[::-1]
    d, p = d[order], p[:, order]
    if d[0] <= 0 or d[k - 1] < DEGENERACY_RATIO * d[0]:
        raise WhiteningDegeneracyError(
            f"covariance is rank deficient (eigenvalues {d.tolist()})")
    # fix eigenvector signs so the transform is reproducible across LAPACK builds
    flip = np.sign(p[np.argmax(np.abs(p), axis=0), np.arange(m)])
    p = p * np.where(flip == 0, 1.0, flip)
    means = np.zeros(m) if means is None else np.asarray(means, dtype=float)
    t = WhiteningTransform(means, p, d, k)
    return t.matrix @ xc, t


# ---------------------------------------------------------------- non-Gaussianity

def _standardize(y, min_len: int) -> np.ndarray:
    y = np.asarray(y.samples if isinstance(y, MonoSignal) else y, dtype=float).ravel()
    if len(y) < min_len:
        raise ValueError(f"need at least {min_len} samples")
    y = y - y.mean()
    sd = np.sqrt(np.mean(y * y))
    if sd == 0 or not np.isfinite(sd):
        raise DegenerateSignalError("zero variance")
    return y / sd


def kurtosis(y) -> float:
    """Excess kurtosis ``E(y^4) - 3`` of the standardised sample."""
    z = _standardize(y, 4)
    return float(np.mean(z ** 4) - 3.0)


def _g_logcosh(u):
    a = np.abs(u)
    # log cosh u = |u| + log(1 + exp(-2|u|)) - log 2, overflow-safe
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


def _g_gauss(u):
    return -np.exp(-0.5 * u * u)


_G = {kernels.LOGCOSH: _g_logcosh, kernels.GAUSS: _g_gauss}


@functools.cache
def gaussian_expectation(contrast: str) -> float:
    """E{G(v)} for standard normal ``v``, by 200-point Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(200)
    g = _G[contrast_id(contrast)]
    return float(np.sum(weights * g(nodes)) / np.sqrt(2 * np.pi))


def negentropy_approx(y, contrast: str = "logcosh") -> float:
    """``[E G(y) - E G(v)]^2`` for the standardised sample (scale constant 1)."""
    cid = contrast_id(contrast)
    z = _standardize(y, 2)
    return float((np.mean(_G[cid](z)) - gaussian_expectation(contrast)) ** 2)


def normalize_unit_variance(signal):
    """Divide by the standard deviation; the mean is left in place."""
    x = signal.samples if isinstance(signal, MonoSignal) else np.asarray(signal, dtype=float)
    sd = np.sqrt(np.mean((x - x.mean()) ** 2)) if len(x) else 0.0
    if sd == 0 or not np.isfinite(sd):
        raise DegenerateSignalError("cannot normalise a zero-variance signal")
    out = x / sd
    return signal.with_samples(out) if isinstance(signal, MonoSignal) else out


# ---------------------------------------------------------------- FastICA

@dataclass(frozen=True)
class UnmixingMatrix:
    """Rows are unit directions in whitened space."""

    w: np.ndarray
    iterations: tuple
    converged: tuple
    restarts: tuple

    @property
    def all_converged(self) -> bool:
        return all(self.converged)


@dataclass(frozen=True)
class SeparationResult:
    sources: list
    whitening: WhiteningTransform
    unmixing: UnmixingMatrix
    mixing: np.ndarray
    """Estimated mixing weights (sensors x components) for the unit-variance sources."""
    order_resolved: bool = False
    score: SeparationScore | None = None
    contrast: str = "logcosh"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        w = self.whitening
        return {
            "n_components": len(self.sources),
            "contrast": self.contrast,
            "order": "reference-correlation" if self.order_resolved else "extraction (arbitrary)",
            "whitening": {
                "means": w.means.tolist(),
                "eigenvectors": w.p.tolist(),
                "eigenvalues": w.d.tolist(),
                "matrix": w.matrix.tolist(),
            },
            "unmixing": self.unmixing.w.tolist(),
            "mixing_estimate": self.mixing.tolist(),
            "iterations": list(self.unmixing.iterations),
            "restarts": list(self.unmixing.restarts),
            "converged": list(self.unmixing.converged),
            "score": None if self.score is None else self.score.to_dict(),
        }


def _gram_schmidt(w, basis):
    for _ in range(2):
        if len(basis):
            w = w - basis.T @ (basis @ w)
    return w


def _one_unit(zt, basis, cid, tol, max_iter, rng):
    """Estimate one direction orthogonal to ``basis``. Returns ``(w, iters, ok)``."""
    k = zt.shape[1]
    w = _gram_schmidt(rng.standard_normal(k), basis)
    w /= np.linalg.norm(w)
    for it in range(1, max_iter + 1):
        ex_g, e_dg = kernels.fixed_point_terms(w, zt, cid)
        w_new = _gram_schmidt(np.asarray(ex_g) - e_dg * w, basis)
        norm = np.linalg.norm(w_new)
        if norm == 0 or not np.isfinite(norm):
            return w, it, False
        w_new /= norm
        done = abs(float(w_new @ w)) > 1.0 - tol
        w = w_new
        if done:
            return w, it, True
    return w, max_iter, False


def fastica(mixtures, n_components: int | None = None, *, contrast: str = "logcosh",
            tol: float = 1e-6, max_iter: int = 200, seed: int = 0, refs=None,
            max_restarts: int = 3, sample_rate: int | None = None) -> SeparationResult:
    """Separate ``mixtures`` into ``n_components`` unit-variance sources.

    Parameters
    ----------
    mixtures : sequence of MonoSignal or array (channels, samples)
    n_components : int, optional
        Defaults to the number of channels. Fewer components keep the top
        whitened (principal) directions.
    contrast : {"logcosh", "gauss"}
        ``G(u) = log cosh u`` (g = tanh) or ``G(u) = -exp(-u^2/2)``.
    tol, max_iter
        A direction has converged when ``|<w_new, w_old>| > 1 - tol``.
    seed : int
        Seeds every random initialisation; results are bit-reproducible.
    refs : sequence, optional
        Ground-truth sources. When given, outputs are reordered and
        sign-flipped to match them and ``score`` is filled in; otherwise the
        order is the (arbitrary) extraction order.
    max_restarts : int
        Fresh random starts tried before a direction is flagged unconverged.
    """
    cid = contrast_id(contrast)
    if isinstance(mixtures, MonoSignal):
        mixtures = [mixtures]
    rate = sample_rate
    if rate is None:
        rate = mixtures[0].sample_rate if len(mixtures) and isinstance(mixtures[0], MonoSignal) else 44100
    x = _as_matrix(mixtures)
    m, n = x.shape
    k = m if n_components is None else int(n_components)
    if not 1 <= k <= m:
        raise DimensionMismatchError(f"n_components must be between 1 and the channel count {m}")
    if n < 2:
        raise DimensionMismatchError("need at least two samples")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")

    xc, means = center(x)
    z, wt = whiten(xc, k, means)
    zt = np.ascontiguousarray(z.T)
    rng = np.random.default_rng(seed)

    w = np.zeros((k, k))
    iters, conv, restarts = [], [], []
    for p in range(k):
        basis = w[:p]
        for attempt in range(max_restarts + 1):
            wp, it, ok = _one_unit(zt, basis, cid, tol, max_iter, rng)
            if ok:
                break
        if not ok:
            log.warning("component %d did not converge after %d restarts", p, max_restarts)
        wp = _gram_schmidt(wp, basis)
        w[p] = wp / np.linalg.norm(wp)
        iters.append(it)
        conv.append(bool(ok))
        restarts.append(attempt)

    s = w @ z
    sd = np.sqrt(np.mean((s - s.mean(axis=1, keepdims=True)) ** 2, axis=1))
    if np.any(sd == 0):
        raise DegenerateSignalError("a separated component has zero variance")
    s = s / sd[:, None]
    mixing = wt.dewhitening @ w.T * sd[None, :]
    # sign convention: each component's largest mixing weight is positive
    flip = np.sign(mixing[np.argmax(np.abs(mixing), axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    s = s * flip[:, None]
    w = w * flip[:, None]
    mixing = mixing * flip[None, :]

    score = None
    if refs is not None:
        if len(refs) != k:
            raise DimensionMismatchError("number of references must equal n_components")
        est = [row for row in s]
        score = best_permutation(est, refs)
        perm = list(score.permutation)
        signs = np.array(score.signs, dtype=float)
        s = s[perm] * signs[:, None]
        w = w[perm] * signs[:, None]
        mixing = mixing[:, perm] * signs[None, :]
        iters = [iters[i] for i in perm]
        conv = [conv[i] for i in perm]
        restarts = [restarts[i] for i in perm]
        score = _rescore(s, refs, perm)

    return SeparationResult(
        sources=[MonoSignal(row, rate) for row in s],
        whitening=wt,
        unmixing=UnmixingMatrix(w, tuple(iters), tuple(conv), tuple(restarts)),
        mixing=mixing,
        order_resolved=refs is not None,
        score=score,
        contrast=contrast,
    )


def _rescore(s, refs, perm):
    """Score after reordering; ``permutation`` keeps the original extraction indices."""
    sc = best_permutation(list(s), refs)
    return SeparationScore(tuple(int(p) for p in perm), sc.per_source_correlation,
                           sc.per_source_si_sdr_db, sc.signs)
