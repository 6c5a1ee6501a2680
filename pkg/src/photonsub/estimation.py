"""Maximum-likelihood recovery of (z, eta, nu) from joint count matrices.

The model distribution is the detected joint photon-number distribution of a
photon-subtracted squeezed pair state; the objective is the multinomial
negative log-likelihood

    NLL = - sum_{n,m} counts[n, m] * log p_model(n, m),

minimized by a coarse parameter grid followed by derivative-free simplex
refinement. Both detectors share (eta, nu) by default (one overall system
efficiency); a per-mode override fits the two arms separately. Errors come
from multinomial bootstrap resampling with a full refit per resample.

The likelihood is evaluated thousands of times per bootstrap run, so the
model pipeline is duplicated in a numba kernel; tests pin the kernel to the
reference numpy route at 1e-12.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import Bounds, minimize

from .config import DEFAULTS, DomainError
from .states import DetectorModel, build_subtracted_state, detected_joint_pnd

__all__ = [
    "BootstrapErrors",
    "FitConfig",
    "FitResult",
    "bootstrap_errors",
    "fit_parameters",
    "negative_log_likelihood",
    "synthetic_counts",
]

_P_FLOOR = 1e-300


@njit(cache=True)
def _model_probs(z, eta_s, nu_s, eta_i, nu_i, l1, l2, n1, n2, tail_tol, j_cap):
    """Detected joint distribution on the grid [0, n1) x [0, n2).

    Mirrors the reference route: log-space pair weights truncated by the
    relative-tail rule (clamped at j_cap), then POVM columns per arm.
    """
    jmin = l1 if l1 > l2 else l2
    if z <= 0.0:
        w = np.ones(1)
        jtop = jmin
    else:
        size = j_cap - jmin + 1
        buf = np.empty(size)
        lq = 2.0 * math.log(z)
        for idx in range(size):
            j = jmin + idx
            buf[idx] = (j * lq + 2.0 * math.lgamma(j + 1.0)
                        - math.lgamma(j - l1 + 1.0) - math.lgamma(j - l2 + 1.0))
        mx = buf[0]
        for idx in range(1, size):
            if buf[idx] > mx:
                mx = buf[idx]
        wfull = np.exp(buf - mx)
        cut = size - 1
        s = wfull[0]
        for idx in range(1, size):
            if wfull[idx] < tail_tol * s:
                cut = idx - 1
                break
            s += wfull[idx]
        w = wfull[:cut + 1] / s
        jtop = jmin + cut

    # per-arm POVM matrices P[n, k] for k = 0 .. jtop - l
    probs = np.zeros((n1, n2))
    for arm in range(2):
        if arm == 0:
            eta, nu, l, nmax = eta_s, nu_s, l1, n1
        else:
            eta, nu, l, nmax = eta_i, nu_i, l2, n2
        kmax = jtop - l
        pois = np.zeros(nmax)
        if nu > 0.0:
            for d in range(nmax):
                pois[d] = math.exp(-nu + d * math.log(nu) - math.lgamma(d + 1.0))
        else:
            pois[0] = 1.0
        pm = np.zeros((nmax, kmax + 1))
        for k in range(kmax + 1):
            imax = k if k < nmax - 1 else nmax - 1
            if eta >= 1.0:
                for n in range(k, nmax):
                    pm[n, k] = pois[n - k]
            else:
                lgk = math.lgamma(k + 1.0)
                le = math.log(eta) if eta > 0.0 else -1e308
                l1e = math.log1p(-eta)
                for i in range(imax + 1):
                    b = math.exp(lgk - math.lgamma(i + 1.0) - math.lgamma(k - i + 1.0)
                                 + i * le + (k - i) * l1e)
                    for n in range(i, nmax):
                        pm[n, k] += b * pois[n - i]
        if arm == 0:
            pm_s = pm
        else:
            pm_i = pm

    for idx in range(w.size):
        j = jmin + idx
        ks = j - l1
        ki = j - l2
        wj = w[idx]
        for n in range(n1):
            psn = pm_s[n, ks] if ks < pm_s.shape[1] else 0.0
            if psn == 0.0:
                continue
            for m in range(n2):
                probs[n, m] += wj * psn * pm_i[m, ki]
    return probs


@njit(cache=True)
def _nll_kernel(counts, z, eta_s, nu_s, eta_i, nu_i, l1, l2, tail_tol, j_cap):
    probs = _model_probs(z, eta_s, nu_s, eta_i, nu_i, l1, l2,
                         counts.shape[0], counts.shape[1], tail_tol, j_cap)
    nll = 0.0
    floored = False
    for n in range(counts.shape[0]):
        for m in range(counts.shape[1]):
            c = counts[n, m]
            if c > 0:
                p = probs[n, m]
                if p < _P_FLOOR:
                    p = _P_FLOOR
                    floored = True
                nll -= c * math.log(p)
    return nll, floored


def _validate_counts(counts) -> np.ndarray:
    c = np.asarray(counts)
    if c.ndim != 2 or c.size == 0:
        raise DomainError("counts must be a non-empty 2-D matrix")
    if not np.issubdtype(c.dtype, np.integer):
        if not np.all(c == np.floor(c)):
            raise DomainError("counts must be integers")
        c = c.astype(np.int64)
    else:
        c = c.astype(np.int64)
    if np.any(c < 0):
        raise DomainError("counts must be non-negative")
    if c.sum() == 0:
        raise DomainError("counts must contain at least one event")
    # zero-count cells contribute nothing to the NLL, so trailing all-zero
    # rows and columns can be dropped; leading ones cannot (index = count)
    nz = np.nonzero(c)
    c = np.ascontiguousarray(c[:int(nz[0].max()) + 1, :int(nz[1].max()) + 1])
    return c


def negative_log_likelihood(counts, z, eta, nu, l_signal=0, l_idler=None, *,
                            tail_tol=DEFAULTS.tail_tol, j_cap=DEFAULTS.j_cap):
    """Multinomial NLL of a count matrix under the detected-state model.

    eta and nu may be scalars (shared by both arms) or (signal, idler) pairs.
    Model cells below 1e-300 are floored before the log; the second return
    value flags whether any floor was hit.

    Returns:
        (nll, floored)
    """
    c = _validate_counts(counts)
    if l_idler is None:
        l_idler = l_signal
    eta_s, eta_i = (eta, eta) if np.isscalar(eta) else eta
    nu_s, nu_i = (nu, nu) if np.isscalar(nu) else nu
    for e in (eta_s, eta_i):
        if not (0.0 < e <= 1.0):
            raise DomainError(f"efficiency must be in (0, 1], got {e}")
    for v in (nu_s, nu_i):
        if v < 0.0:
            raise DomainError(f"dark rate must be >= 0, got {v}")
    if not (0.0 <= z < 1.0):
        raise DomainError(f"squeezing amplitude must be in [0, 1), got {z}")
    nll, floored = _nll_kernel(c, float(z), float(eta_s), float(nu_s), float(eta_i),
                               float(nu_i), int(l_signal), int(l_idler),
                               float(tail_tol), int(j_cap))
    return float(nll), bool(floored)


@dataclass(frozen=True)
class FitConfig:
    """Search space and optimizer knobs for the maximum-likelihood fit."""
    z_bounds: tuple = (0.0, 0.95)
    eta_bounds: tuple = (1e-3, 1.0)
    nu_bounds: tuple = (0.0, 0.5)
    grid_shape: tuple = (8, 8, 4)
    refine_tol: float = 1e-6
    max_iter: int = 2000
    bootstrap_resamples: int = 200
    per_mode: bool = False
    tail_tol: float = DEFAULTS.tail_tol
    j_cap: int = DEFAULTS.j_cap


@dataclass(frozen=True)
class FitResult:
    """Point estimates plus optimizer diagnostics. eta/nu are (signal, idler)
    pairs when fitted per mode, scalars when shared. The _err fields stay None
    until bootstrap errors are attached."""
    z_hat: float
    eta_hat: float | tuple
    nu_hat: float | tuple
    nll: float
    converged: bool
    degenerate: bool
    z_err: float | None = None
    eta_err: float | None = None
    nu_err: float | None = None

    def with_errors(self, errors: "BootstrapErrors") -> "FitResult":
        """Copy of the result carrying bootstrap standard errors."""
        return FitResult(z_hat=self.z_hat, eta_hat=self.eta_hat,
                         nu_hat=self.nu_hat, nll=self.nll,
                         converged=self.converged, degenerate=self.degenerate,
                         z_err=errors.z_std, eta_err=errors.eta_std,
                         nu_err=errors.nu_std)


def _kernel_objective(counts, l1, l2, cfg, per_mode):
    if per_mode:
        def fun(x):
            return _nll_kernel(counts, x[0], x[1], x[3], x[2], x[4], l1, l2,
                               cfg.tail_tol, cfg.j_cap)[0]
    else:
        def fun(x):
            return _nll_kernel(counts, x[0], x[1], x[2], x[1], x[2], l1, l2,
                               cfg.tail_tol, cfg.j_cap)[0]
    return fun


def _refine(fun, x0, lb, ub, cfg):
    steps = np.minimum(np.maximum(0.02 * (ub - lb), 1e-4), 0.05)
    simplex = [np.clip(x0, lb, ub)]
    for d in range(x0.size):
        v = simplex[0].copy()
        v[d] = v[d] + steps[d] if v[d] + steps[d] <= ub[d] else v[d] - steps[d]
        simplex.append(v)
    res = minimize(fun, simplex[0], method="Nelder-Mead",
                   bounds=Bounds(lb, ub),
                   options={"xatol": cfg.refine_tol, "fatol": 1e-6,
                            "maxiter": cfg.max_iter,
                            "initial_simplex": np.array(simplex)})
    return res


def fit_parameters(counts, l_signal=0, l_idler=None, cfg: FitConfig = FitConfig()):
    """Maximum-likelihood (z, eta, nu) from a joint count matrix.

    Coarse grid over the bounded box picks the simplex start; Nelder-Mead
    refines it. Counts concentrated in a single cell are fitted anyway but
    flagged degenerate (z is then pinned against its lower bound).
    """
    c = _validate_counts(counts)
    if l_idler is None:
        l_idler = l_signal
    degenerate = int(c.max()) == int(c.sum())

    lb3 = np.array([cfg.z_bounds[0], cfg.eta_bounds[0], cfg.nu_bounds[0]])
    ub3 = np.array([cfg.z_bounds[1], cfg.eta_bounds[1], cfg.nu_bounds[1]])
    fun3 = _kernel_objective(c, int(l_signal), int(l_idler), cfg, per_mode=False)

    gz, ge, gn = cfg.grid_shape
    best, best_val = None, np.inf
    for z in np.linspace(lb3[0], ub3[0], gz):
        for eta in np.linspace(lb3[1], ub3[1], ge):
            for nu in np.linspace(lb3[2], ub3[2], gn):
                val = fun3(np.array([z, eta, nu]))
                if val < best_val:
                    best, best_val = np.array([z, eta, nu]), val

    if not cfg.per_mode:
        res = _refine(fun3, best, lb3, ub3, cfg)
        z_hat, eta_hat, nu_hat = res.x
        return FitResult(z_hat=float(z_hat), eta_hat=float(eta_hat),
                         nu_hat=float(nu_hat), nll=float(res.fun),
                         converged=bool(res.success), degenerate=degenerate)

    lb5 = np.array([lb3[0], lb3[1], lb3[2], lb3[1], lb3[2]])
    ub5 = np.array([ub3[0], ub3[1], ub3[2], ub3[1], ub3[2]])
    x0 = np.array([best[0], best[1], best[2], best[1], best[2]])
    fun5 = _kernel_objective(c, int(l_signal), int(l_idler), cfg, per_mode=True)
    res = _refine(fun5, x0, lb5, ub5, cfg)
    return FitResult(z_hat=float(res.x[0]),
                     eta_hat=(float(res.x[1]), float(res.x[2])),
                     nu_hat=(float(res.x[3]), float(res.x[4])),
                     nll=float(res.fun), converged=bool(res.success),
                     degenerate=degenerate)


@dataclass(frozen=True)
class BootstrapErrors:
    """Bootstrap standard errors; samples holds the per-resample estimates."""
    z_std: float
    eta_std: float
    nu_std: float
    samples: np.ndarray


def bootstrap_errors(counts, l_signal=0, l_idler=None, fit: FitResult | None = None,
                     cfg: FitConfig = FitConfig(), b: int | None = None,
                     seed: int = 0) -> BootstrapErrors:
    """Multinomial-resample bootstrap of the shared-parameter fit.

    Each of the B resamples redraws the full count matrix from the empirical
    distribution and refits with the simplex warm-started at the full-data
    estimate (the coarse grid is skipped: resamples live in the same basin).
    Deterministic for a given seed. B < 10 is refused as statistically
    meaningless.
    """
    if cfg.per_mode:
        raise DomainError("bootstrap errors are implemented for the shared-parameter fit")
    c = _validate_counts(counts)
    if l_idler is None:
        l_idler = l_signal
    b = cfg.bootstrap_resamples if b is None else b
    if b < 10:
        raise DomainError(f"at least 10 bootstrap resamples required, got {b}")
    if fit is None:
        fit = fit_parameters(c, l_signal, l_idler, cfg)

    total = int(c.sum())
    pvals = (c / total).ravel()
    lb = np.array([cfg.z_bounds[0], cfg.eta_bounds[0], cfg.nu_bounds[0]])
    ub = np.array([cfg.z_bounds[1], cfg.eta_bounds[1], cfg.nu_bounds[1]])
    x0 = np.array([fit.z_hat, fit.eta_hat, fit.nu_hat])
    rng = np.random.default_rng(seed)

    samples = np.empty((b, 3))
    for k in range(b):
        res_counts = rng.multinomial(total, pvals).reshape(c.shape)
        fun = _kernel_objective(res_counts, int(l_signal), int(l_idler), cfg,
                                per_mode=False)
        res = _refine(fun, x0, lb, ub, cfg)
        samples[k] = res.x
    std = samples.std(axis=0, ddof=1)
    samples.setflags(write=False)
    return BootstrapErrors(z_std=float(std[0]), eta_std=float(std[1]),
                           nu_std=float(std[2]), samples=samples)


def synthetic_counts(z, eta, nu, l_signal=0, l_idler=None, shots=10**5, seed=0,
                     n_max=None) -> np.ndarray:
    """Multinomial sample of the detected joint distribution (test generator).

    Uses the reference numpy route, not the fit kernel, so round-trip tests
    exercise two independent implementations of the model.
    """
    if shots <= 0:
        raise DomainError("shots must be positive")
    if l_idler is None:
        l_idler = l_signal
    eta_s, eta_i = (eta, eta) if np.isscalar(eta) else eta
    nu_s, nu_i = (nu, nu) if np.isscalar(nu) else nu
    state = build_subtracted_state(z, l_signal, l_idler, tail_tol=1e-12)
    pnd = detected_joint_pnd(state, DetectorModel(eta_s, nu_s),
                             DetectorModel(eta_i, nu_i), n_max=n_max,
                             tail_tol=1e-12)
    probs = pnd.probs / pnd.total
    rng = np.random.default_rng(seed)
    return rng.multinomial(shots, probs.ravel()).reshape(probs.shape)
