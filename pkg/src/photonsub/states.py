"""Photon-subtracted two-mode squeezed vacuum and lossy photon-number detection.

The squeezed pair source is parametrized by a single real squeezing amplitude
z in [0, 1). Removing l_signal photons from the signal arm and l_idler from the
idler arm leaves a state whose pair-number amplitudes are

    B_j  propto  z^j * j! / sqrt((j - l_signal)! * (j - l_idler)!),
    j >= max(l_signal, l_idler),

normalized over the truncated pair-number range. Detection in each arm is a
binomial-loss photon-number-resolving detector with Poisson dark counts:

    P(n | k) = sum_i C(k, i) eta^i (1-eta)^(k-i) e^(-nu) nu^(n-i) / (n-i)!

Two independent routes to the detected joint distribution are provided: the
production path (`detected_joint_pnd`, weights times POVM columns) and a
literal derivative-formula oracle (`derivative_formula_pnd`) that expands the
detector generating function as a bivariate power series and reads off mixed
coefficients, including the cross terms that the production path never forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, stats
from scipy.constants import c as _SPEED_OF_LIGHT
from scipy.special import gammaln

from .config import DEFAULTS, DomainError, TruncationError

__all__ = [
    "DetectorModel",
    "FockAmplitudes",
    "JointPND",
    "build_subtracted_state",
    "derivative_formula_pnd",
    "detected_joint_pnd",
    "detector_povm",
    "ideal_joint_pnd",
    "mean_pair_number",
    "pad_joint",
    "squeezing_from_pump",
    "state_mean_photons",
]


def squeezing_from_pump(chi_eff, pump_freq, length, pump_intensity, refractive_index):
    """Squeezing amplitude z = tanh(r) for a pulsed parametric pair source.

    The interaction strength is r = chi_eff * pump_freq * length * sqrt(I_p)
    / (2 * n0 * c) with c the vacuum speed of light.

    Args:
        chi_eff: effective nonlinear susceptibility of the crystal.
        pump_freq: pump angular frequency (rad/s).
        length: interaction length (m).
        pump_intensity: pump intensity (W/m^2 scale; only sqrt enters).
        refractive_index: linear refractive index at the pump.

    Returns:
        z in [0, 1).
    """
    vals = (chi_eff, pump_freq, length, pump_intensity, refractive_index)
    if any(not np.isfinite(v) or v < 0 for v in vals):
        raise DomainError("pump parameters must be finite and non-negative")
    if refractive_index == 0:
        raise DomainError("refractive index must be positive")
    r = chi_eff * pump_freq * length * math.sqrt(pump_intensity) / (
        2.0 * refractive_index * _SPEED_OF_LIGHT)
    return math.tanh(r)


@dataclass(frozen=True)
class DetectorModel:
    """Photon-number-resolving detector: efficiency eta in (0, 1], dark rate nu >= 0."""
    eta: float
    nu: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"detector efficiency must be in (0, 1], got {self.eta}")
        if not (self.nu >= 0.0) or not np.isfinite(self.nu):
            raise DomainError(f"dark rate must be finite and >= 0, got {self.nu}")


@dataclass(frozen=True)
class FockAmplitudes:
    """Pair-number amplitudes of a (possibly asymmetrically) subtracted state.

    amplitudes[i] is B_j for j = j_min + i; the signal arm holds j - l_signal
    photons and the idler arm j - l_idler. Amplitudes are real, non-negative,
    and renormalized over the truncated range; the probability discarded by
    truncation is recorded in tail_mass. degenerate marks the z -> 0 limit of
    a subtracted state, which collapses to the single Fock pair at j_min.
    """
    z: float
    l_signal: int
    l_idler: int
    j_min: int
    j_max: int
    amplitudes: np.ndarray
    tail_mass: float
    degenerate: bool = False

    @property
    def weights(self) -> np.ndarray:
        return self.amplitudes ** 2

    @property
    def signal_counts(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1) - self.l_signal

    @property
    def idler_counts(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1) - self.l_idler


def _validate_subtraction(l_signal, l_idler):
    for l in (l_signal, l_idler):
        if not isinstance(l, (int, np.integer)) or l < 0:
            raise DomainError(f"subtracted photon numbers must be integers >= 0, got {l}")


def build_subtracted_state(z, l_signal=0, l_idler=None, *, tail_tol=DEFAULTS.tail_tol,
                           j_cap=DEFAULTS.j_cap, j_max=None, strict_tail=True):
    """Construct the pair-number amplitudes of the subtracted squeezed state.

    The pair index is truncated at the first J >= j_min where the next term's
    squared amplitude contributes less than tail_tol of the accumulated weight,
    then renormalized; the discarded fraction is recorded as tail_mass.

    Args:
        z: real squeezing amplitude, 0 <= z < 1.
        l_signal, l_idler: photons removed from each arm (idler defaults to
            the signal value).
        tail_tol: relative tail contribution at which truncation stops,
            0 < tail_tol <= 1e-3.
        j_cap: hard cap on the truncation index.
        j_max: optional forced cap below j_cap (truncate there and renormalize
            even if the tail rule is unmet; used to build small test states).
        strict_tail: if True, failing the tail rule at j_cap raises
            TruncationError; if False the state is clamped at the cap and the
            unmet tail recorded in tail_mass.

    Returns:
        FockAmplitudes.
    """
    if isinstance(z, complex):
        raise DomainError("squeezing amplitude must be real")
    z = float(z)
    if not np.isfinite(z) or not (0.0 <= z < 1.0):
        raise DomainError(f"squeezing amplitude must satisfy 0 <= z < 1, got {z}")
    if l_idler is None:
        l_idler = l_signal
    _validate_subtraction(l_signal, l_idler)
    if not (0.0 < tail_tol <= 1e-3):
        raise DomainError(f"tail_tol must be in (0, 1e-3], got {tail_tol}")
    j_min = max(l_signal, l_idler)
    limit = j_cap if j_max is None else min(j_max, j_cap)
    if limit < j_min:
        raise DomainError(f"truncation cap {limit} below minimum pair index {j_min}")

    if z == 0.0:
        amps = np.array([1.0])
        amps.setflags(write=False)
        return FockAmplitudes(z=0.0, l_signal=l_signal, l_idler=l_idler,
                              j_min=j_min, j_max=j_min, amplitudes=amps,
                              tail_mass=0.0, degenerate=(j_min > 0))

    j = np.arange(j_min, limit + 1)
    # log |B_j|^2 up to normalization; evaluated in log space, the factorials
    # overflow floats near j ~ 170 otherwise
    logw = (2.0 * j * math.log(z) + 2.0 * gammaln(j + 1)
            - gammaln(j - l_signal + 1) - gammaln(j - l_idler + 1))
    w = np.exp(logw - logw.max())
    csum = np.cumsum(w)

    cut = None
    if w.size > 1:
        ratio = w[1:] / csum[:-1]
        below = np.nonzero(ratio < tail_tol)[0]
        if below.size:
            cut = below[0]          # index into w of the last kept term
    else:
        cut = 0
    if cut is None:
        if j_max is None and strict_tail:
            raise TruncationError(
                f"tail rule {tail_tol} unmet at hard cap J={limit} (z={z}, "
                f"l=({l_signal},{l_idler}))")
        cut = w.size - 1

    kept = w[:cut + 1]
    total_kept = csum[cut]
    tail_inside = float(w[cut + 1:].sum())
    # geometric bound on the weight beyond the computed range; the term ratio
    # decreases toward z^2 so the first ratio past the edge bounds the rest
    j_edge = limit + 1
    r = z * z * j_edge ** 2 / ((j_edge - l_signal) * (j_edge - l_idler))
    tail_beyond = float(w[-1]) * r / (1.0 - r) if r < 1.0 else np.inf
    tail_mass = (tail_inside + tail_beyond) / (total_kept + tail_inside + tail_beyond)

    amps = np.sqrt(kept / total_kept)
    amps.setflags(write=False)
    return FockAmplitudes(z=z, l_signal=l_signal, l_idler=l_idler, j_min=j_min,
                          j_max=j_min + cut, amplitudes=amps,
                          tail_mass=float(tail_mass), degenerate=False)


def mean_pair_number(state: FockAmplitudes) -> float:
    """<j> over the pair-number weights; equals z^2/(1-z^2) for l = 0."""
    j = np.arange(state.j_min, state.j_max + 1)
    return float(np.dot(state.weights, j))


def state_mean_photons(state: FockAmplitudes):
    """Mean photon number (signal, idler) of the subtracted state itself."""
    w = state.weights
    return float(np.dot(w, state.signal_counts)), float(np.dot(w, state.idler_counts))


def detector_povm(det: DetectorModel, n_max: int, k_max: int) -> np.ndarray:
    """POVM matrix P[n, k] = P(detect n | k photons), n <= n_max, k <= k_max.

    Binomial loss convolved with Poisson dark counts; factors are built in log
    space so large k do not overflow. Columns sum to one up to the n_max
    truncation of the dark-count tail.
    """
    if n_max < 0 or k_max < 0:
        raise DomainError("n_max and k_max must be >= 0")
    i_max = min(k_max, n_max)
    k = np.arange(k_max + 1)[:, None]
    i = np.arange(i_max + 1)[None, :]
    if det.eta == 1.0:
        binom = (i == k).astype(float)
    else:
        logb = (gammaln(k + 1) - gammaln(i + 1) - gammaln(k - i + 1)
                + i * math.log(det.eta) + (k - i) * math.log1p(-det.eta))
        binom = np.where(i <= k, np.exp(np.where(i <= k, logb, -np.inf)), 0.0)

    d = np.arange(n_max + 1)
    if det.nu == 0.0:
        pois = np.zeros(n_max + 1)
        pois[0] = 1.0
    else:
        pois = np.exp(-det.nu + d * math.log(det.nu) - gammaln(d + 1))

    # P[n, k] = sum_i binom[k, i] * pois[n - i]
    shift = d[None, :] - np.arange(i_max + 1)[:, None]
    dark = np.where(shift >= 0, pois[np.clip(shift, 0, n_max)], 0.0)
    return (binom @ dark).T


@dataclass(frozen=True)
class JointPND:
    """Joint detected photon-number distribution on the grid n, m in [0, n_max].

    probs[n, m] is the probability of n signal and m idler counts. total is
    the retained probability; total < 1 - tail_tol signals that n_max cut into
    the distribution.
    """
    probs: np.ndarray
    n_max: int
    total: float

    def marginals(self):
        """(signal, idler) marginal distributions."""
        return self.probs.sum(axis=1), self.probs.sum(axis=0)


def pad_joint(pnd: JointPND, n_max: int) -> JointPND:
    """Embed a joint distribution on a larger grid (new cells hold zero)."""
    if n_max < pnd.n_max:
        raise DomainError(f"cannot pad n_max {pnd.n_max} down to {n_max}")
    if n_max == pnd.n_max:
        return pnd
    probs = np.zeros((n_max + 1, n_max + 1))
    probs[:pnd.probs.shape[0], :pnd.probs.shape[1]] = pnd.probs
    probs.setflags(write=False)
    return JointPND(probs=probs, n_max=n_max, total=pnd.total)


def _auto_n_max(state: FockAmplitudes, det_s: DetectorModel, det_i: DetectorModel,
                tail_tol: float) -> int:
    k_top = max(state.j_max - state.l_signal, state.j_max - state.l_idler)
    dark = max(det_s.nu, det_i.nu)
    buffer = 0 if dark == 0.0 else int(stats.poisson.ppf(1.0 - 0.25 * tail_tol, dark)) + 1
    return k_top + buffer


def detected_joint_pnd(state: FockAmplitudes, det_signal: DetectorModel,
                       det_idler: DetectorModel | None = None, n_max: int | None = None,
                       *, tail_tol: float = DEFAULTS.tail_tol) -> JointPND:
    """Joint distribution of detected counts: weights times POVM columns.

    p(n, m) = sum_j |B_j|^2 P_s(n | j - l_signal) P_i(m | j - l_idler).

    With n_max omitted the grid is grown until at least 1 - tail_tol of the
    probability is retained. An explicit n_max that cuts the distribution is
    allowed; the loss shows up in JointPND.total.
    """
    if det_idler is None:
        det_idler = det_signal
    auto = n_max is None
    if auto:
        n_max = _auto_n_max(state, det_signal, det_idler, tail_tol)
    if n_max < 0:
        raise DomainError("n_max must be >= 0")

    while True:
        ps = detector_povm(det_signal, n_max, max(state.j_max - state.l_signal, 0))
        pi = detector_povm(det_idler, n_max, max(state.j_max - state.l_idler, 0))
        cols_s = ps[:, state.signal_counts]
        cols_i = pi[:, state.idler_counts]
        probs = np.einsum("j,nj,mj->nm", state.weights, cols_s, cols_i)
        total = float(probs.sum())
        if not auto or total >= 1.0 - tail_tol:
            break
        n_max += max(4, n_max // 2)
    probs.setflags(write=False)
    return JointPND(probs=probs, n_max=n_max, total=total)


def ideal_joint_pnd(state: FockAmplitudes, n_max: int | None = None) -> JointPND:
    """Joint photon-number distribution with perfect detectors.

    Support lies on the band m = n - (l_idler - l_signal); for symmetric
    subtraction that is the diagonal.
    """
    if n_max is None:
        n_max = int(max(state.signal_counts.max(), state.idler_counts.max(), 0))
    probs = np.zeros((n_max + 1, n_max + 1))
    for w, n, m in zip(state.weights, state.signal_counts, state.idler_counts):
        if n <= n_max and m <= n_max:
            probs[n, m] += w
    probs.setflags(write=False)
    return JointPND(probs=probs, n_max=n_max, total=float(probs.sum()))


# --- derivative-formula oracle -------------------------------------------------

_ORACLE_J_MAX = 12
_ORACLE_N_MAX = 8


def _bivariate_series(eta, nu, n, a_max, b_max):
    """Coefficients S[a, b] of u^a v^b in (eta*u*v + nu)^n * exp(-((eta-1)*u*v + nu)).

    u and v are treated as independent formal variables; any off-band
    coefficient therefore comes out of the convolution arithmetic rather than
    being assumed zero.
    """
    base = np.zeros((min(n, a_max) + 1, min(n, b_max) + 1))
    base[0, 0] = nu
    if base.shape[0] > 1 and base.shape[1] > 1:
        base[1, 1] = eta
    power = np.zeros((a_max + 1, b_max + 1))
    power[0, 0] = 1.0
    for _ in range(n):
        power = signal.convolve2d(power, base)[:a_max + 1, :b_max + 1]

    expo = np.zeros((a_max + 1, b_max + 1))
    scale = math.exp(-nu)
    for p in range(min(a_max, b_max) + 1):
        expo[p, p] = scale * (1.0 - eta) ** p / math.factorial(p)
    return signal.convolve2d(power, expo)[:a_max + 1, :b_max + 1]


def derivative_formula_pnd(state: FockAmplitudes, det_signal: DetectorModel,
                           det_idler: DetectorModel | None = None, n: int = 0,
                           m: int = 0) -> float:
    """Oracle route to p(n, m): literal mixed-derivative evaluation.

    Expands the per-arm generating function as a bivariate power series and
    sums the full double sum over pair indices (j, k), cross terms included.
    Restricted to small instances (state.j_max <= 12, n, m <= 8) where exact
    factorial arithmetic in float is safe; larger requests are refused.
    """
    if det_idler is None:
        det_idler = det_signal
    if state.j_max > _ORACLE_J_MAX:
        raise DomainError(
            f"oracle refuses states truncated beyond J={_ORACLE_J_MAX} (got {state.j_max})")
    if not (0 <= n <= _ORACLE_N_MAX and 0 <= m <= _ORACLE_N_MAX):
        raise DomainError(f"oracle refuses counts beyond {_ORACLE_N_MAX} (got {n}, {m})")

    l1, l2 = state.l_signal, state.l_idler
    js = np.arange(state.j_min, state.j_max + 1)
    amps = state.amplitudes
    a_max = state.j_max - l1
    b_max = state.j_max - l2
    s_alpha = _bivariate_series(det_signal.eta, det_signal.nu, n, a_max, a_max)
    s_beta = _bivariate_series(det_idler.eta, det_idler.nu, m, b_max, b_max)

    fact = math.factorial
    total = 0.0
    for j, bj in zip(js, amps):
        for k, bk in zip(js, amps):
            denom = math.sqrt(fact(j - l1) * fact(k - l1) * fact(j - l2) * fact(k - l2))
            d_alpha = fact(j - l1) * fact(k - l1) * s_alpha[j - l1, k - l1]
            d_beta = fact(j - l2) * fact(k - l2) * s_beta[j - l2, k - l2]
            total += bj * bk / denom * d_alpha * d_beta
    return total / (fact(n) * fact(m))
