"""Closed-form outage approximations, outage exponents, and DMT/DMR curves.

High-SNR formulas sum first-order terms C(L, kappa) * p_cop * p_s^kappa over
the numbers of outage bands; low-SNR formulas keep the leading band-outage
terms.  Regime guards (p_s < 0.5 high, q_s < 0.2 low) keep the first-order
forms from being quoted outside their validity; pass guard=False to force an
evaluation anyway.

Chunk-based schemes bundle each coherence band into one chunk (N = L) and may
allocate fewer chunks K_m than the rate share K~_m; the per-chunk CSI
threshold is then R_m / K_m so that a saturated user is never in outage,
which is what makes the per-user diversity L attainable.  The caps must be
proportional to the rate shares across users so the threshold stays uniform
and the graph measure i.i.d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from fmatchlab.channel import (
    ConfigError,
    RegimeError,
    SystemConfig,
    subchannel_outage_prob,
    subchannel_rate,
)
from fmatchlab.numerics import SaddleInputs, cond_outage_upper, interleaved_upper

SCHEME_KINDS = ("rb_coded", "chunk_coded", "interleaved", "localized", "tdma")


@dataclass(frozen=True)
class SchemeSpec:
    """Allocation scheme selector plus per-user chunk caps where relevant."""

    kind: str
    chunk_caps: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown scheme kind {self.kind!r}; pick one of {SCHEME_KINDS}")
        if self.chunk_caps is not None:
            object.__setattr__(self, "chunk_caps", tuple(int(c) for c in self.chunk_caps))

    def validate(self, config: SystemConfig) -> None:
        kt = config.ktilde()
        if self.kind == "chunk_coded":
            if config.num_subchannels != config.num_bands:
                raise ConfigError("chunk scheme bundles each band into one chunk: requires N == L")
            if config.num_users > config.num_bands:
                raise ConfigError("chunk scheme requires M <= L")
            if self.chunk_caps is None:
                raise ConfigError("chunk scheme needs per-user chunk caps")
            caps = np.asarray(self.chunk_caps)
            if len(caps) != config.num_users or np.any(caps < 1) or np.any(caps > kt):
                raise ConfigError("chunk caps must satisfy 1 <= K_m <= K~_m per user")
            # uniform K_m / K~_m keeps the per-chunk CSI threshold identical
            # across users (i.i.d. graph measure)
            for m in range(1, config.num_users):
                if caps[m] * kt[0] != caps[0] * kt[m]:
                    raise ConfigError("chunk caps must be proportional to the rate shares")
        elif self.kind == "interleaved":
            if len(set(kt.tolist())) != 1:
                raise ConfigError("interleaved preset assumes equal rate shares")
        if self.kind == "rb_coded" and config.num_subchannels < config.num_users:
            raise ConfigError("not enough subchannels")

    def caps(self, config: SystemConfig) -> np.ndarray:
        """Degree caps of the f-matching run by this scheme."""
        if self.kind == "chunk_coded":
            return np.asarray(self.chunk_caps, dtype=np.int64)
        return config.ktilde()

    def csi_threshold_rate(self, config: SystemConfig) -> float:
        """Band-normalized CSI threshold rate R_c for this scheme's quantizer."""
        _, r_c = subchannel_rate(config)
        if self.kind == "chunk_coded":
            ratio = config.ktilde()[0] / self.chunk_caps[0]
            return r_c * ratio
        return r_c


@dataclass
class OutageCurve:
    """Per-user outage probabilities on an SNR grid with their regime tags."""

    gammas: np.ndarray
    probs: np.ndarray  # (G, M)
    sources: list[str]  # per grid point: high_snr | low_snr | monte_carlo | none

    def outage_exponents(self) -> np.ndarray:
        """E_m = -d ln p / d ln gamma by centered differences on the log grid."""
        if len(self.gammas) < 2:
            raise ValueError("outage exponent needs at least two grid points")
        lg = np.log(self.gammas)
        lp = np.log(np.clip(self.probs, 1e-300, None))
        return -np.gradient(lp, lg, axis=0)


@dataclass
class DmrPoint:
    """Per-user diversity gains at an operating point of multiplexing gains."""

    r: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.d = np.asarray(self.d, dtype=float)


def _cop(n_channels: int, n_good: int, gamma: float, r_c: float) -> float:
    """Conditional outage bound used inside the first-order sums, clamped to 1."""
    return min(1.0, cond_outage_upper(SaddleInputs(n_channels, n_good, gamma, r_c)))


def _resolve(config: SystemConfig, gamma: float | None) -> SystemConfig:
    return config if gamma is None else config.with_snr(gamma)


def _band_units(config: SystemConfig, m: int) -> int:
    """Coding length of user m in whole-band units, K~_m / N_c.

    Every maximum f-matching hands an under-served user all N_c subchannels of
    each band that is non-outage for it, and the random completion fills the
    rest in-band as well, so the independent variables of the conditional
    bound are whole bands, not single subchannels.  Non-integral shares are
    rounded down (flagged) since the presets never produce them.
    """
    kt = int(config.ktilde()[m])
    share = kt / config.n_per_band
    units = math.floor(share)
    if units != share:
        warnings.warn(f"non-integral band share {share} rounded down", stacklevel=3)
    return max(units, 1)


def rb_outage_high_snr(
    config: SystemConfig,
    m: int,
    gamma: float | None = None,
    *,
    include_qs_factor: bool = False,
    guard: bool = True,
) -> float:
    """High-SNR outage of user m under resource-block coded f-matching.

    Sums, over the number kappa of bands in outage for the user, the binomial
    band-outage weight times the conditional bound at band granularity
    (K~_m/N_c band variables, L - kappa of them non-outage):
        sum_kappa C(L, kappa) p_cop(K~_m/N_c, L - kappa) p_s^kappa.
    """
    cfg = _resolve(config, gamma)
    L, M = cfg.num_bands, cfg.num_users
    _, r_c = subchannel_rate(cfg)
    p_s, q_s = subchannel_outage_prob(r_c, cfg.snr)
    if guard and p_s >= 0.5:
        raise RegimeError(f"high-SNR form needs p_s < 0.5, got {p_s:.3f}")
    kb = _band_units(cfg, m)
    total = 0.0
    for kappa in range(L - kb + 1, L + 1):
        term = math.comb(L, kappa) * _cop(kb, L - kappa, cfg.snr, r_c) * p_s**kappa
        if include_qs_factor:
            term *= q_s ** (M * L - kappa)
        total += term
    return total


def rb_outage_low_snr(
    config: SystemConfig, m: int, gamma: float | None = None, *, guard: bool = True
) -> float:
    """Low-SNR outage of user m: band outage dominates, competition is higher order.

    p_s^L + L p_cop(., 1) p_s^(L-1) q_s at the same band granularity as the
    high-SNR form.
    """
    cfg = _resolve(config, gamma)
    L = cfg.num_bands
    _, r_c = subchannel_rate(cfg)
    p_s, q_s = subchannel_outage_prob(r_c, cfg.snr)
    if guard and q_s >= 0.2:
        raise RegimeError(f"low-SNR form needs q_s < 0.2, got {q_s:.3f}")
    kb = _band_units(cfg, m)
    return p_s**L + L * _cop(kb, 1, cfg.snr, r_c) * p_s ** (L - 1) * q_s


def _chunk_profile(config: SystemConfig, m: int, k_m: int) -> np.ndarray:
    """Caps profile actually run by a chunk scheme where user m holds K_m.

    The caps stay proportional to the rate shares (uniform K/K~ across users),
    which is also what keeps the CSI threshold uniform.
    """
    kt = config.ktilde()
    caps = k_m * kt // kt[m]
    if np.any(caps * int(kt[m]) != k_m * kt):
        raise ConfigError("chunk caps do not extend proportionally to all users")
    return caps.astype(np.int64)


def _optimal_branch_profile(config: SystemConfig, m: int, k_m: int) -> np.ndarray:
    """K profile for the per-user optimality branches: K_m for user m, K~ else."""
    caps = config.ktilde().copy()
    caps[m] = k_m
    return caps


def _chunk_threshold_rate(config: SystemConfig, m: int, k_m: int) -> float:
    """Per-chunk CSI threshold R_m / K_m (nats, N_c = 1 in chunk units)."""
    return float(config.rates()[m]) / k_m


def k_threshold(config: SystemConfig, m: int, caps: np.ndarray) -> int:
    """K_m^th = N + 1 - ceil(M/(M-1) * sum_{i != m} K_i)."""
    M, N = config.num_users, config.num_subchannels
    caps = np.asarray(caps, dtype=np.int64)
    ksum_others = int(caps.sum() - caps[m])
    return N + 1 - int(math.ceil(M / (M - 1) * ksum_others - 1e-12))


def chunk_outage_high_snr(
    config: SystemConfig,
    m: int,
    k_m: int,
    gamma: float | None = None,
    *,
    include_qs_factor: bool = False,
    guard: bool = True,
) -> float:
    """High-SNR outage of user m under chunk-based coded f-matching with caps K_m.

    Below K_m^th the user's own band outages dominate; above it the all-users
    competition term takes over; exactly at K_m^th with (M-1) | M K_m^sum both
    contribute.
    """
    cfg = _resolve(config, gamma)
    if cfg.num_subchannels != cfg.num_bands:
        raise ConfigError("chunk formulas require N == L")
    if cfg.num_users > cfg.num_bands:
        raise ConfigError("chunk formulas require M <= L")
    if not 1 <= k_m <= int(cfg.ktilde()[m]):
        raise ConfigError("chunk caps must satisfy 1 <= K_m <= K~_m")
    L, M = cfg.num_bands, cfg.num_users
    profile = _chunk_profile(cfg, m, k_m)
    k_sum = int(profile.sum())
    k_sum_others = k_sum - k_m
    k_th = k_threshold(cfg, m, profile)
    r_thr = _chunk_threshold_rate(cfg, m, k_m)
    p_s, q_s = subchannel_outage_prob(r_thr, cfg.snr)
    if guard and p_s >= 0.5:
        raise RegimeError(f"high-SNR form needs p_s < 0.5, got {p_s:.3f}")
    total = 0.0
    if k_m <= k_th:
        for kappa in range(L - k_m + 1, L + 1):
            term = (
                math.comb(L, kappa) * _cop(k_m, L - kappa, cfg.snr, r_thr) * p_s**kappa
            )
            if include_qs_factor:
                term *= q_s ** (M * L - kappa)
            total += term
    if k_m > k_th or (k_m == k_th and (M * k_sum_others) % (M - 1) == 0):
        term = (
            math.factorial(L)
            * _cop(k_m, k_m - 1, cfg.snr, r_thr)
            * p_s ** (M * (L - k_sum + 1))
            / (M * math.factorial(L - k_sum + 1) * math.factorial(k_sum - 1))
        )
        if include_qs_factor:
            term *= q_s ** (M * (k_sum - 1))
        total += term
    return total


def r_threshold(config: SystemConfig, m: int) -> float:
    """Multiplexing-gain threshold where the two chunk DMT branches cross.

    r_m^th = K^th K~ [L - K~ + 1 - M(L - Ksum + 1)]
             / (K~ (L - K^th) + K^th [1 - M(L - Ksum + 1)]),
    with Ksum the all-K~ profile sum (= N for chunk configs).
    """
    kt = config.ktilde()
    L, M, N = config.num_bands, config.num_users, config.num_subchannels
    k_th = k_threshold(config, m, kt)
    ktm = int(kt[m])
    a = M * (L - int(kt.sum()) + 1)
    num = k_th * ktm * (L - ktm + 1 - a)
    den = ktm * (L - k_th) + k_th * (1 - a)
    return num / den


def dmr_rb(config: SystemConfig, r: np.ndarray) -> DmrPoint:
    """Best achievable diversity for RB coded f-matching: L(1 - N_c r_m / K~_m)."""
    r = np.asarray(r, dtype=float)
    kt = config.ktilde()
    L, n_c = config.num_bands, config.n_per_band
    if np.any(r < 0) or np.any(r > kt / n_c):
        raise ValueError("multiplexing gains must lie in [0, K~_m / N_c]")
    return DmrPoint(r=r, d=L * (1.0 - n_c * r / kt))


def dmt_chunk(config: SystemConfig, m: int, k_m: int, r_m: float) -> float:
    """Achieved chunk DMT at caps K_m: L(1 - r/K_m) below K_m^th, else
    [M(L - Ksum + 1) + K_m - 1](1 - r/K_m)."""
    profile = _chunk_profile(config, m, k_m)
    k_th = k_threshold(config, m, profile)
    L, M = config.num_bands, config.num_users
    if k_m <= k_th:
        return L * (1.0 - r_m / k_m)
    k_sum = int(profile.sum())
    return (M * (L - k_sum + 1) + k_m - 1) * (1.0 - r_m / k_m)


def dmr_chunk(config: SystemConfig, r: np.ndarray) -> DmrPoint:
    """Best achievable chunk DMR: piecewise join of the K_m^th and K~_m branches,
    switching at r_m^th (continuous there by construction)."""
    r = np.asarray(r, dtype=float)
    kt = config.ktilde()
    L, M = config.num_bands, config.num_users
    d = np.empty_like(r)
    a = M * (L - int(kt.sum()) + 1)
    for m in range(config.num_users):
        if not 0 <= r[m] <= kt[m]:
            raise ValueError("multiplexing gains must lie in [0, K~_m]")
        r_th = r_threshold(config, m)
        k_th = k_threshold(config, m, kt)
        if r[m] <= r_th:
            d[m] = L * (1.0 - r[m] / k_th)
        else:
            d[m] = (a + int(kt[m]) - 1) * (1.0 - r[m] / kt[m])
    return DmrPoint(r=r, d=d)


def dmt_fixed_scheme(config: SystemConfig, kind: str, m: int, r_m: float) -> float:
    """DMT of the CSI-free baselines.

    interleaved / tdma reach the optimal L(1 - N_c r/K~); localized only gets
    its K~/N_c contiguous bands of diversity.
    """
    kt = int(config.ktilde()[m])
    L, n_c = config.num_bands, config.n_per_band
    if kind in ("interleaved", "tdma", "rb_coded"):
        return L * (1.0 - n_c * r_m / kt)
    if kind == "localized":
        bands = kt / n_c
        return bands * (1.0 - n_c * r_m / kt)
    raise ConfigError(f"no fixed-scheme DMT for {kind!r}")


def scheme_upper_bound(config: SystemConfig, scheme: SchemeSpec, m: int, gamma: float) -> float:
    """Saddle-point outage bound for the CSI-free schemes (unclamped).

    interleaved codes over K~_m spread RBs, TDMA over the L bands of its time
    share, localized over its K~_m/N_c contiguous bands.
    """
    cfg = config.with_snr(gamma)
    _, r_c = subchannel_rate(cfg)
    kt = int(cfg.ktilde()[m])
    if scheme.kind == "interleaved":
        return interleaved_upper(kt, gamma, r_c).bound
    if scheme.kind == "tdma":
        return interleaved_upper(cfg.num_bands, gamma, r_c).bound
    if scheme.kind == "localized":
        n_bands = kt // cfg.n_per_band
        if n_bands * cfg.n_per_band != kt:
            raise ConfigError("localized bound needs K~_m divisible by N_c")
        return interleaved_upper(n_bands, gamma, r_c).bound
    raise ConfigError(f"no closed-form bound for scheme {scheme.kind!r}")


def chunk_optimal_outage(
    config: SystemConfig, m: int, gamma: float | None = None, r_m: float | None = None
) -> float:
    """Best achievable chunk outage: caps K_m^th below r_m^th, K~_m above.

    The K_m^th branch adds the competition term exactly when (M-1) | M K_m^th.
    """
    cfg = _resolve(config, gamma)
    if r_m is None:
        if cfg.multiplexing_gains is None:
            raise ConfigError("pass r_m explicitly for fixed-rate configs")
        r_m = cfg.multiplexing_gains[m]
    kt = cfg.ktilde()
    L, M = cfg.num_bands, cfg.num_users
    r_th = r_threshold(cfg, m)
    if r_m <= r_th:
        k_th = k_threshold(cfg, m, kt)
        if k_th < 1:
            raise RegimeError("K_m^th < 1: no admissible lower-branch caps")
        profile = _optimal_branch_profile(cfg, m, k_th)
        k_sum = int(profile.sum())
        r_thr = _chunk_threshold_rate(cfg, m, k_th)
        p_s, _ = subchannel_outage_prob(r_thr, cfg.snr)
        total = 0.0
        for kappa in range(L - k_th + 1, L + 1):
            total += (
                math.comb(L, kappa) * _cop(k_th, L - kappa, cfg.snr, r_thr) * p_s**kappa
            )
        if (M * k_th) % (M - 1) == 0:
            total += (
                math.factorial(L)
                * _cop(k_th, k_th - 1, cfg.snr, r_thr)
                * p_s ** (M * (L - k_sum + 1))
                / (M * math.factorial(L - k_sum + 1) * math.factorial(k_sum - 1))
            )
        return total
    ktm = int(kt[m])
    k_sum = int(kt.sum())
    r_thr = _chunk_threshold_rate(cfg, m, ktm)
    p_s, _ = subchannel_outage_prob(r_thr, cfg.snr)
    return (
        math.factorial(L)
        * _cop(ktm, ktm - 1, cfg.snr, r_thr)
        * p_s ** (M * (L - k_sum + 1))
        / (M * math.factorial(L - k_sum + 1) * math.factorial(k_sum - 1))
    )


def chunk_outage_low_snr(
    config: SystemConfig, m: int, k_m: int, gamma: float | None = None, *, guard: bool = True
) -> float:
    """Low-SNR chunk outage: same band-outage dominance at the chunk threshold."""
    cfg = _resolve(config, gamma)
    L = cfg.num_bands
    r_thr = _chunk_threshold_rate(cfg, m, k_m)
    p_s, q_s = subchannel_outage_prob(r_thr, cfg.snr)
    if guard and q_s >= 0.2:
        raise RegimeError(f"low-SNR form needs q_s < 0.2, got {q_s:.3f}")
    return p_s**L + L * _cop(k_m, 1, cfg.snr, r_thr) * p_s ** (L - 1) * q_s


def oer_curve(
    config: SystemConfig,
    scheme: SchemeSpec,
    gammas: np.ndarray,
    mc_probs: np.ndarray | None = None,
) -> OutageCurve:
    """Per-user outage curve across an SNR grid, regime-tagged.

    High-SNR formulas where p_s < 0.5, low-SNR where q_s < 0.2, Monte Carlo
    estimates (if supplied as an array matching the grid) in between.
    """
    gammas = np.asarray(gammas, dtype=float)
    if gammas.size < 2:
        raise ValueError("outage exponent needs a grid of at least two SNR points")
    M = config.num_users
    probs = np.full((gammas.size, M), np.nan)
    sources: list[str] = []
    for i, g in enumerate(gammas):
        cfg = config.with_snr(float(g))
        tag = "none"
        for m in range(M):
            try:
                if scheme.kind == "rb_coded":
                    probs[i, m] = rb_outage_high_snr(cfg, m)
                elif scheme.kind == "chunk_coded":
                    probs[i, m] = chunk_outage_high_snr(cfg, m, int(scheme.caps(cfg)[m]))
                else:
                    probs[i, m] = min(1.0, scheme_upper_bound(cfg, scheme, m, float(g)))
                tag = "high_snr"
            except RegimeError:
                try:
                    if scheme.kind == "chunk_coded":
                        probs[i, m] = chunk_outage_low_snr(cfg, m, int(scheme.caps(cfg)[m]))
                    else:
                        probs[i, m] = rb_outage_low_snr(cfg, m)
                    tag = "low_snr"
                except RegimeError:
                    if mc_probs is not None and not np.isnan(mc_probs[i, m]):
                        probs[i, m] = mc_probs[i, m]
                        tag = "monte_carlo"
                    else:
                        tag = "none"
        sources.append(tag)
    return OutageCurve(gammas=gammas, probs=np.clip(probs, 0.0, 1.0), sources=sources)
