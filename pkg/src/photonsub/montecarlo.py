"""Monte Carlo simulation of beam-splitter photon subtraction with tap heralds.

The simulated protocol: a squeezed pair source emits j photon pairs with the
geometric weight (1 - z^2) z^(2j); each arm meets a beam splitter of
transmission T whose reflected port feeds a tap detector; a shot is accepted
exactly when the tap counts equal (l_signal, l_idler); the transmitted arms
then hit the main detectors. Accepted-shot statistics converge on the
subtracted-state prediction as T -> 1, which is what makes this an oracle for
the analytic pipeline: no pair-amplitude formula appears anywhere below, only
geometric weights and binomial/Poisson tap arithmetic.

Sampling is organized as an exact two-stage equivalent of the literal
accept/reject loop. The acceptance probability A per shot is computed from the
tap arithmetic, the number of accepted shots is drawn as Binomial(shots, A),
and each accepted shot is drawn from the exact conditional law (pair number
given acceptance, then reflected photons given the tap outcome). By the law of
total probability this has the same joint distribution as running every shot,
but the cost is O(accepted), which keeps heralds with acceptance rates of
1e-12 simulable. Work is split into fixed-size shards with SeedSequence-derived
child seeds, so results are bit-identical for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .config import DomainError, TruncationError
from .states import DetectorModel, JointPND

__all__ = [
    "McResult",
    "ProtocolConfig",
    "acceptance_probability",
    "beamsplitter_split",
    "sample_pair_numbers",
    "simulate_run",
    "tv_distance",
]

_SHARD = 1 << 16


@dataclass(frozen=True)
class ProtocolConfig:
    """Inputs of one conditional-subtraction run."""
    z: float
    tap_transmission: float
    l_signal: int
    l_idler: int
    tap_detector: DetectorModel
    main_detector: DetectorModel
    shots: int
    seed: int
    n_max: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.z < 1.0):
            raise DomainError(f"squeezing amplitude must be in [0, 1), got {self.z}")
        if not (0.0 < self.tap_transmission <= 1.0):
            raise DomainError(
                f"tap transmission must be in (0, 1], got {self.tap_transmission}")
        if self.l_signal < 0 or self.l_idler < 0:
            raise DomainError("herald photon numbers must be >= 0")
        if self.shots <= 0:
            raise DomainError("shots must be positive")


@dataclass(frozen=True)
class McResult:
    """Accepted-shot counts and the empirical joint distribution."""
    counts: np.ndarray
    shots: int
    accepted: int
    acceptance_rate: float
    empirical: JointPND
    empty: bool
    config: ProtocolConfig


def sample_pair_numbers(z: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw pair numbers j with P(j) = (1 - z^2) z^(2j) by inverse CDF."""
    if not (0.0 <= z < 1.0):
        raise DomainError(f"squeezing amplitude must be in [0, 1), got {z}")
    if z == 0.0:
        return np.zeros(size, dtype=np.int64)
    q = z * z
    u = rng.random(size)
    return np.floor(np.log1p(-u) / math.log(q)).astype(np.int64)


def beamsplitter_split(counts: np.ndarray, transmission: float,
                       rng: np.random.Generator):
    """Split photon counts at a beam splitter: (transmitted, reflected)."""
    if not (0.0 <= transmission <= 1.0):
        raise DomainError(f"transmission must be in [0, 1], got {transmission}")
    counts = np.asarray(counts)
    transmitted = rng.binomial(counts, transmission)
    return transmitted, counts - transmitted


def _tap_click_pmf(l: int, j: np.ndarray, p_click: float, nu: float) -> np.ndarray:
    """P(tap reads l | j pair photons) with click probability p_click per photon.

    The tap count is Binomial(j, p_click) + Poisson(nu): reflection and tap
    efficiency compose into a single thinning.
    """
    i = np.arange(l + 1)
    binom = stats.binom.pmf(i[None, :], np.asarray(j)[:, None], p_click)
    dark = stats.poisson.pmf(l - i, nu)
    return binom @ dark


def _j_support(cfg: ProtocolConfig):
    """Pair-number support, per-j acceptance factors, and total acceptance."""
    q = cfg.z * cfg.z
    rho = 1.0 - cfg.tap_transmission
    p_click = rho * cfg.tap_detector.eta
    nu_t = cfg.tap_detector.nu

    if p_click == 0.0 and nu_t == 0.0 and (cfg.l_signal > 0 or cfg.l_idler > 0):
        # the taps can never click: the herald is unreachable
        j = np.arange(1)
        geom = np.ones(1) if q == 0.0 else np.array([1.0 - q])
        return j, geom, np.zeros(1), 0.0

    j_top = 64 if q == 0.0 else max(64, 4 * max(cfg.l_signal, cfg.l_idler),
                                    int(math.log(1e-20) / math.log(q)) + 1)
    while True:
        j = np.arange(j_top + 1)
        geom = (1.0 - q) * q ** j if q > 0.0 else (j == 0).astype(float)
        a = (_tap_click_pmf(cfg.l_signal, j, p_click, nu_t)
             * _tap_click_pmf(cfg.l_idler, j, p_click, nu_t))
        total = float(np.dot(geom, a))
        if total > 0.0 and (q == 0.0 or q ** (j_top + 1) <= 1e-12 * total):
            return j, geom, a, total
        if q == 0.0:
            return j, geom, a, total
        j_top *= 2
        if j_top > (1 << 20):
            raise TruncationError("pair-number support did not converge")


def acceptance_probability(cfg: ProtocolConfig) -> float:
    """Exact per-shot probability that the taps read (l_signal, l_idler)."""
    return _j_support(cfg)[3]


def _posterior_reflected(j: int, l: int, rho: float, tap: DetectorModel) -> np.ndarray:
    """CDF of reflected photons r given pair number j and tap outcome l."""
    r = np.arange(j + 1)
    w = stats.binom.pmf(r, j, rho)
    if tap.eta < 1.0 or tap.nu > 0.0:
        i = np.arange(l + 1)
        det = stats.binom.pmf(i[None, :], r[:, None], tap.eta) @ stats.poisson.pmf(l - i, tap.nu)
        w = w * det
    else:
        w = np.where(r == l, w, 0.0)
    c = np.cumsum(w)
    if c[-1] <= 0.0:
        raise DomainError(f"tap outcome {l} impossible for pair number {j}")
    return c


def _sample_reflected(js: np.ndarray, l: int, rho: float, tap: DetectorModel,
                      rng: np.random.Generator, cache: dict) -> np.ndarray:
    """Draw reflected counts from the exact posterior, grouped by pair number."""
    ideal = tap.eta == 1.0 and tap.nu == 0.0
    if ideal:
        return np.full(js.size, l, dtype=np.int64)
    out = np.empty(js.size, dtype=np.int64)
    uniq, inv = np.unique(js, return_inverse=True)
    for gi, j in enumerate(uniq):
        key = (int(j), l)
        cdf = cache.get(key)
        if cdf is None:
            cdf = cache[key] = _posterior_reflected(int(j), l, rho, tap)
        mask = inv == gi
        u = rng.random(int(mask.sum())) * cdf[-1]
        out[mask] = np.searchsorted(cdf, u)
    return out


def _run_shard(cfg: ProtocolConfig, size: int, seed: np.random.SeedSequence,
               j_vals: np.ndarray, post_cdf: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rho = 1.0 - cfg.tap_transmission
    js = j_vals[np.searchsorted(post_cdf, rng.random(size))]
    cache: dict = {}
    r_s = _sample_reflected(js, cfg.l_signal, rho, cfg.tap_detector, rng, cache)
    r_i = _sample_reflected(js, cfg.l_idler, rho, cfg.tap_detector, rng, cache)
    det = cfg.main_detector
    n = rng.binomial(js - r_s, det.eta) + rng.poisson(det.nu, size)
    m = rng.binomial(js - r_i, det.eta) + rng.poisson(det.nu, size)
    side = int(max(n.max(), m.max())) + 1
    flat = np.bincount(n * side + m, minlength=side * side)
    return flat.reshape(side, side)


def simulate_run(cfg: ProtocolConfig, workers: int = 1) -> McResult:
    """Run the conditional-subtraction protocol for cfg.shots pump pulses.

    Deterministic for fixed (cfg, seed) and independent of the worker count:
    accepted shots are partitioned into fixed-size shards, each driven by a
    SeedSequence child of cfg.seed, and shard counts combine by addition.
    """
    if workers < 1:
        raise DomainError("workers must be >= 1")
    j_all, geom, a, accept_p = _j_support(cfg)
    root = np.random.SeedSequence(cfg.seed)
    accept_rng = np.random.default_rng(root.spawn(1)[0])
    accepted = int(accept_rng.binomial(cfg.shots, accept_p)) if accept_p > 0.0 else 0

    grid = 1 if cfg.n_max is None else cfg.n_max + 1
    if accepted == 0:
        counts = np.zeros((grid, grid), dtype=np.int64)
        probs = np.zeros_like(counts, dtype=float)
        probs.setflags(write=False)
        counts.setflags(write=False)
        return McResult(counts=counts, shots=cfg.shots, accepted=0,
                        acceptance_rate=0.0,
                        empirical=JointPND(probs=probs, n_max=grid - 1, total=0.0),
                        empty=True, config=cfg)

    post = geom * a
    keep = post > 0.0
    j_vals = j_all[keep]
    post = post[keep]
    post_cdf = np.cumsum(post)
    post_cdf /= post_cdf[-1]
    # guard against roundoff at the top of the CDF
    post_cdf[-1] = 1.0 + 1e-12

    n_shards = (accepted + _SHARD - 1) // _SHARD
    sizes = [_SHARD] * (n_shards - 1) + [accepted - _SHARD * (n_shards - 1)]
    seeds = root.spawn(n_shards)

    def job(args):
        size, seed = args
        return _run_shard(cfg, size, seed, j_vals, post_cdf)

    if workers == 1:
        shard_counts = [job(t) for t in zip(sizes, seeds)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            shard_counts = list(pool.map(job, zip(sizes, seeds)))

    side = max(grid, max(c.shape[0] for c in shard_counts))
    counts = np.zeros((side, side), dtype=np.int64)
    for c in shard_counts:
        counts[:c.shape[0], :c.shape[1]] += c
    probs = counts / accepted
    counts.setflags(write=False)
    probs.setflags(write=False)
    return McResult(counts=counts, shots=cfg.shots, accepted=accepted,
                    acceptance_rate=accepted / cfg.shots,
                    empirical=JointPND(probs=probs, n_max=side - 1,
                                       total=float(probs.sum())),
                    empty=False, config=cfg)


def tv_distance(p, q) -> float:
    """Total-variation distance 0.5 * sum |p - q| between two joint grids."""
    pa = p.probs if isinstance(p, JointPND) else np.asarray(p, dtype=float)
    qa = q.probs if isinstance(q, JointPND) else np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise DomainError(f"grid mismatch: {pa.shape} vs {qa.shape}")
    return float(0.5 * np.abs(pa - qa).sum())
