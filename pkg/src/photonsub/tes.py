"""Pulse traces to photon numbers: matched filter, mixture fit, assignment.

A transition-edge sensor outputs a pulse whose energy grows linearly with the
number of absorbed photons, so the per-pulse filtered energies cluster on an
equally spaced ladder. The chain here is

    traces -> wiener_project -> energies -> fit_mixture -> assign_photon_numbers

with a white-noise matched filter (inner product with a unit-energy template)
and a Gaussian mixture fitted by expectation-maximization. Components are
anchored to the physical ladder: the rung spacing estimated from the energy
histogram is extrapolated down to zero energy, which is what lets a record
containing only one-photon pulses come out labeled 1 rather than 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks
from scipy.special import logsumexp

from .config import DomainError

__all__ = [
    "GaussianMixture",
    "PulseTemplate",
    "Trace",
    "assign_photon_numbers",
    "default_template",
    "fit_mixture",
    "synth_batch",
    "synth_trace",
    "wiener_project",
]


@dataclass(frozen=True)
class PulseTemplate:
    """Unit-energy pulse shape plus a white-noise variance estimate.

    samples: template waveform, sum of squares 1 within 1e-12.
    noise_power: per-sample noise variance of the readout (>= 0); with a
        unit-energy template the filtered energy then has standard deviation
        sqrt(noise_power).
    """
    samples: np.ndarray
    noise_power: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0 or not np.all(np.isfinite(s)):
            raise DomainError("template must be a non-empty finite 1-D waveform")
        energy = float(np.dot(s, s))
        if abs(energy - 1.0) > 1e-12:
            raise DomainError(f"template energy must be 1 within 1e-12, got {energy!r}")
        if self.noise_power < 0.0:
            raise DomainError("noise_power must be >= 0")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


def default_template(n_samples=256, rise=6.0, fall=32.0, noise_power=0.0) -> PulseTemplate:
    """Double-exponential pulse exp(-t/fall) - exp(-t/rise), unit energy."""
    if n_samples < 8:
        raise DomainError("template needs at least 8 samples")
    if not (0.0 < rise < fall):
        raise DomainError("need 0 < rise < fall")
    t = np.arange(n_samples, dtype=float)
    shape = np.exp(-t / fall) - np.exp(-t / rise)
    shape /= math.sqrt(float(np.dot(shape, shape)))
    # renormalize once more in case the sqrt rounds the energy off unity
    shape /= math.sqrt(float(np.dot(shape, shape)))
    return PulseTemplate(samples=shape, noise_power=noise_power)


@dataclass(frozen=True)
class Trace:
    """One digitized pulse record."""
    samples: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0 or not np.all(np.isfinite(s)):
            raise DomainError("trace must be a non-empty finite 1-D record")
        if self.sample_period <= 0:
            raise DomainError("sample_period must be > 0")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)


def synth_trace(n_photons, tmpl: PulseTemplate, amplitude_per_photon, noise_sigma,
                rng) -> Trace:
    """n_photons * amplitude * template plus white Gaussian noise."""
    if not isinstance(n_photons, (int, np.integer)) or n_photons < 0:
        raise DomainError(f"n_photons must be an integer >= 0, got {n_photons}")
    if amplitude_per_photon <= 0:
        raise DomainError("amplitude_per_photon must be > 0")
    if noise_sigma < 0:
        raise DomainError("noise_sigma must be >= 0")
    base = n_photons * amplitude_per_photon * tmpl.samples
    if noise_sigma > 0:
        base = base + rng.normal(0.0, noise_sigma, size=tmpl.samples.size)
    return Trace(samples=base)


def synth_batch(photon_numbers, tmpl: PulseTemplate, amplitude_per_photon,
                noise_sigma, rng) -> np.ndarray:
    """Matrix of synthetic traces, one row per entry of photon_numbers."""
    ns = np.asarray(photon_numbers)
    if ns.ndim != 1 or ns.size == 0 or np.any(ns < 0):
        raise DomainError("photon_numbers must be a non-empty vector of counts >= 0")
    if amplitude_per_photon <= 0:
        raise DomainError("amplitude_per_photon must be > 0")
    if noise_sigma < 0:
        raise DomainError("noise_sigma must be >= 0")
    out = ns[:, None].astype(float) * amplitude_per_photon * tmpl.samples[None, :]
    if noise_sigma > 0:
        out += rng.normal(0.0, noise_sigma, size=out.shape)
    return out


def wiener_project(trace, tmpl: PulseTemplate):
    """Filtered pulse energy: inner product with the template over its window,
    divided by the template energy. Optimal for white noise; linear in the
    trace. Accepts a Trace, a 1-D record, or a 2-D batch (row per record).
    """
    x = trace.samples if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    t = tmpl.samples
    if x.ndim == 1:
        if x.size < t.size:
            raise DomainError(f"trace length {x.size} shorter than template {t.size}")
        return float(np.dot(x[:t.size], t))       # template energy is 1
    if x.ndim == 2:
        if x.shape[1] < t.size:
            raise DomainError(f"trace length {x.shape[1]} shorter than template {t.size}")
        return x[:, :t.size] @ t
    raise DomainError("expected a 1-D record or a 2-D batch of records")


@dataclass(frozen=True)
class GaussianMixture:
    """Photon-number-indexed Gaussian components, ordered by mean."""
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    converged: bool
    loglik: float
    n_iter: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.stds, dtype=float)
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise DomainError("mixture arrays must be matching non-empty vectors")
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise DomainError("weights must be non-negative and sum to 1")
        if np.any(s <= 0):
            raise DomainError("stds must be > 0")
        if np.any(np.diff(m) <= 0):
            raise DomainError("means must be strictly increasing")
        for a in (w, m, s):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    @property
    def k_max(self) -> int:
        return self.weights.size - 1


def _ladder_init(e, k_max):
    """Initial means on an equally spaced ladder from the histogram peaks.

    The spacing comes from the first two peaks; with a single peak the ladder
    is anchored through zero energy (a lone cluster well off zero is read as
    the one-photon rung, not the vacuum).
    """
    n_bins = int(min(256, max(32, math.sqrt(e.size))))
    counts, edges = np.histogram(e, bins=n_bins)
    smooth = gaussian_filter1d(counts.astype(float), sigma=2.0)
    idx, _ = find_peaks(smooth, prominence=0.05 * max(smooth.max(), 1e-300))
    centers = 0.5 * (edges[:-1] + edges[1:])[idx]

    scale = float(e.max() - e.min())
    robust = 1.4826 * float(np.median(np.abs(e - np.median(e))))
    if centers.size >= 2:
        # median of consecutive gaps survives a depleted rung in the middle
        base, spacing = centers[0], float(np.median(np.diff(centers)))
    elif centers.size == 1:
        c0 = centers[0]
        if abs(c0) > max(4.0 * robust, 1e-12):
            base, spacing = c0, abs(c0)   # lone off-zero cluster: first rung
        else:
            base, spacing = c0, max(3.0 * e.std(), scale, 1e-9)
    else:
        base, spacing = float(e.mean()), max(e.std(), scale, 1e-9)
    offset = int(round(base / spacing)) if spacing > 0 else 0
    offset = min(max(offset, 0), k_max)
    means = base + (np.arange(k_max + 1) - offset) * spacing
    return means, spacing


def fit_mixture(energies, k_max, *, max_iter=500, tol=1e-9) -> GaussianMixture:
    """EM fit of k_max + 1 Gaussian components to filtered energies.

    Converged when the log-likelihood changes by less than tol; hitting
    max_iter first returns the best-so-far fit with converged False.
    Components are sorted by mean. Deterministic: initialization is from the
    energy histogram, no random restarts.
    """
    e = np.asarray(energies, dtype=float).ravel()
    if e.size < 50:
        raise DomainError(f"mixture fit needs at least 50 energies, got {e.size}")
    if not np.all(np.isfinite(e)):
        raise DomainError("energies must be finite")
    if not isinstance(k_max, (int, np.integer)) or k_max < 0:
        raise DomainError(f"k_max must be an integer >= 0, got {k_max}")

    k = int(k_max) + 1
    means, spacing = _ladder_init(e, int(k_max))
    # each component is confined to a window around its rung, so a component
    # whose rung is unpopulated parks there instead of carving a tail off a
    # neighboring cluster; windows are disjoint, keeping the means ordered
    lo, hi = means - 0.4 * spacing, means + 0.4 * spacing
    sig_floor = max(1e-6 * max(spacing, float(e.std())), 1e-12)
    sig_cap = max(spacing, sig_floor * 2.0)
    stds = np.full(k, max(spacing / 8.0, sig_floor))
    weights = np.full(k, 1.0 / k)

    loglik = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # E step in log space; empty components keep their parameters
        logp = (np.log(np.maximum(weights, 1e-300))[None, :]
                - np.log(stds)[None, :] - 0.5 * math.log(2.0 * math.pi)
                - 0.5 * ((e[:, None] - means[None, :]) / stds[None, :]) ** 2)
        norm = logsumexp(logp, axis=1)
        new_loglik = float(norm.sum())
        resp = np.exp(logp - norm[:, None])

        nk = resp.sum(axis=0)
        alive = nk > 1e-12
        weights = nk / e.size
        means = np.where(alive, resp.T @ e / np.maximum(nk, 1e-300), means)
        means = np.clip(means, lo, hi)
        var = (resp * (e[:, None] - means[None, :]) ** 2).sum(axis=0)
        stds = np.where(alive, np.sqrt(var / np.maximum(nk, 1e-300)), stds)
        stds = np.clip(stds, sig_floor, sig_cap)

        if abs(new_loglik - loglik) < tol:
            loglik = new_loglik
            converged = True
            break
        loglik = new_loglik

    weights = weights / weights.sum()
    return GaussianMixture(weights=weights, means=means, stds=stds,
                           converged=converged, loglik=loglik, n_iter=it)


def assign_photon_numbers(energies, mix: GaussianMixture):
    """Maximum-posterior photon number per energy plus the histogram pmf.

    Posterior ties go to the lower photon number.

    Returns:
        (labels, pmf) with pmf of length k_max + 1.
    """
    e = np.asarray(energies, dtype=float).ravel()
    if e.size == 0:
        raise DomainError("no energies to assign")
    logp = (np.log(np.maximum(mix.weights, 1e-300))[None, :]
            - np.log(mix.stds)[None, :]
            - 0.5 * ((e[:, None] - mix.means[None, :]) / mix.stds[None, :]) ** 2)
    labels = np.argmax(logp, axis=1)        # first max wins: lower index on ties
    pmf = np.bincount(labels, minlength=mix.weights.size) / e.size
    return labels, pmf
