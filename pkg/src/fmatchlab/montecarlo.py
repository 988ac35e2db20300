"""Monte Carlo trial engine: end-to-end scheme simulation and SNR sweeps.

Trials are grouped into fixed-size chunks; each chunk's randomness comes from
a Philox stream keyed by (seed, purpose, scheme, SNR bits, chunk index), so
counts are bit-reproducible for any worker count and chunk results can be
summed in any order.  In paired mode all schemes share the channel-gain
streams (common random numbers) while scheme-internal randomness stays
independent, which sharpens horizontal-gain measurements.

Outage probabilities below 1e-6 are reported as censored rather than
extrapolated; rare-event importance sampling is out of scope.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from fmatchlab import _kernels
from fmatchlab.channel import (
    ConfigError,
    CsiMatrix,
    RegimeError,
    SystemConfig,
    csi_outage_threshold,
    subchannel_rate,
)
from fmatchlab.graph import (
    FProfile,
    build_rbg,
    complete_allocation_from_uniforms,
    max_f_matching_from_uniforms,
)
from fmatchlab.analysis import (
    SchemeSpec,
    chunk_outage_high_snr,
    chunk_outage_low_snr,
    dmt_chunk,
    dmt_fixed_scheme,
    rb_outage_high_snr,
    rb_outage_low_snr,
    scheme_upper_bound,
)
from fmatchlab.pver2hk import depth_cap

CHUNK_TRIALS = 1 << 16
CENSOR_FLOOR = 1e-6
_PURPOSE_GAINS = 11
_PURPOSE_AUX = 23
_SCHEME_IDS = {"rb_coded": 1, "chunk_coded": 2, "interleaved": 3, "localized": 4, "tdma": 5}
_SHARED_GAINS = 0


@dataclass(frozen=True)
class TrialOutcome:
    """One trial: per-user outage bits and realized matched counts."""

    outage: np.ndarray
    matched: np.ndarray
    scheme: str
    trial_index: int = 0


@dataclass(frozen=True)
class OutageEstimate:
    """Monte Carlo outage estimate with a 95% Wilson interval."""

    scheme: str
    user: int
    gamma: float
    trials: int
    outage_count: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    censored: bool = False


def wilson_interval(count: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = count / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = 0.0 if count == 0 else max(0.0, center - half)
    hi = 1.0 if count == trials else min(1.0, center + half)
    return lo, hi


def _gamma_key(gamma: float) -> int:
    return int(np.float64(gamma).view(np.uint64))


def _stream(seed: int, purpose: int, scheme_id: int, gamma: float, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(
        entropy=[int(seed), purpose, scheme_id, _gamma_key(gamma), chunk]
    )
    return np.random.Generator(np.random.Philox(ss))


def _scheme_params(config: SystemConfig, scheme: SchemeSpec):
    """(caps, csi threshold tau on |g|^2, per-user rates) for coded schemes."""
    caps = scheme.caps(config)
    r_thr_c = scheme.csi_threshold_rate(config)
    tau = csi_outage_threshold(r_thr_c, config.snr)
    return caps, tau, config.rates()


def _fixed_assignment(config: SystemConfig, kind: str) -> list[np.ndarray]:
    """Per-user subchannel sets of the CSI-free schemes (band indices used)."""
    M, N, n_c = config.num_users, config.num_subchannels, config.n_per_band
    kt = config.ktilde()
    if kind == "interleaved":
        return [np.arange(N)[np.arange(N) % M == m] for m in range(M)]
    if kind == "localized":
        starts = np.concatenate([[0], np.cumsum(kt)[:-1]])
        return [np.arange(starts[m], starts[m] + kt[m]) for m in range(M)]
    raise ConfigError(f"no fixed assignment for scheme {kind!r}")


def _run_chunk(
    config: SystemConfig,
    scheme: SchemeSpec,
    n: int,
    chunk_idx: int,
    seed: int,
    paired: bool,
    use_pver2hk: bool,
    eta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one chunk; returns (outage bits (n, M), matched counts)."""
    M, L = config.num_users, config.num_bands
    gamma = config.snr
    sid = _SCHEME_IDS[scheme.kind]
    gains_sid = _SHARED_GAINS if paired else sid
    g_rng = _stream(seed, _PURPOSE_GAINS, gains_sid, gamma, chunk_idx)
    normals = g_rng.standard_normal((n, 2, M, L))
    gsq = (normals[:, 0] ** 2 + normals[:, 1] ** 2) / 2.0

    if scheme.kind in ("rb_coded", "chunk_coded"):
        caps, tau, rates = _scheme_params(config, scheme)
        total = int(caps.sum())
        a_rng = _stream(seed, _PURPOSE_AUX, sid, gamma, chunk_idx)
        aux = a_rng.random((n, _kernels.aux_row_width(total, config.num_subchannels)))
        l_star = depth_cap(config.num_subchannels, eta) if use_pver2hk else np.inf
        return _kernels.fmatch_trials(
            gsq, aux, caps, tau, rates, gamma, config.n_per_band, l_star
        )

    rates = config.rates()
    kt = config.ktilde()
    n_c = config.n_per_band
    _, r_c = subchannel_rate(config)
    tau = csi_outage_threshold(r_c, gamma) if r_c > 0 else 0.0
    outage = np.empty((n, M), dtype=np.uint8)
    matched = np.empty((n, M), dtype=np.int16)
    log_rates = np.log1p(gamma * gsq)  # (n, M, L), per-band ln(1 + g|g|^2)
    if scheme.kind == "tdma":
        rate = (kt / config.num_subchannels)[None, :] * log_rates.sum(axis=2)
        outage[:] = rate < rates[None, :]
        matched[:] = (gsq >= tau).sum(axis=2).astype(np.int16)
        return outage, matched
    sets = _fixed_assignment(config, scheme.kind)
    for m in range(M):
        bands = sets[m] // n_c
        rate = log_rates[:, m, :][:, bands].sum(axis=1) / n_c
        outage[:, m] = rate < rates[m]
        matched[:, m] = (gsq[:, m, bands] >= tau).sum(axis=1).astype(np.int16)
    return outage, matched


def run_trial(
    config: SystemConfig,
    scheme: SchemeSpec,
    rng: np.random.Generator,
    *,
    use_pver2hk: bool = False,
    eta: float = 2.0,
) -> TrialOutcome:
    """Single-trial reference path through the library objects.

    Draws in the same layout as the batched kernel (gain normals, then one
    uniform row), then routes coded schemes through build_rbg ->
    max_f_matching (depth-capped when use_pver2hk) -> complete_allocation and
    evaluates the sum-mutual-information outage rule.
    """
    scheme.validate(config)
    M, L, n_c = config.num_users, config.num_bands, config.n_per_band
    gamma = config.snr
    normals = rng.standard_normal((2, M, L))
    gains = (normals[0] + 1j * normals[1]) / np.sqrt(2.0)
    gsq = (normals[0] ** 2 + normals[1] ** 2) / 2.0
    rates = config.rates()
    kt = config.ktilde()

    if scheme.kind in ("rb_coded", "chunk_coded"):
        caps, tau, _ = _scheme_params(config, scheme)
        total = int(caps.sum())
        aux = rng.random(_kernels.aux_row_width(total, config.num_subchannels))
        csi = CsiMatrix(q=(gsq >= tau).astype(np.uint8))
        graph = build_rbg(csi, config)
        l_star = depth_cap(config.num_subchannels, eta) if use_pver2hk else None
        matching = max_f_matching_from_uniforms(
            graph, FProfile(caps), aux[: 1 + total], l_star=l_star
        )
        alloc = complete_allocation_from_uniforms(
            matching,
            caps,
            aux[1 + total :],
            require_partition=bool(caps.sum() == config.num_subchannels),
        )
        outage = np.zeros(M, dtype=np.uint8)
        for m in range(M):
            rate = sum(math.log1p(gamma * gsq[m, n // n_c]) for n in alloc.sets[m]) / n_c
            outage[m] = 1 if rate < rates[m] else 0
        return TrialOutcome(outage=outage, matched=alloc.matched_counts, scheme=scheme.kind)

    log_rates = np.log1p(gamma * gsq)
    outage = np.zeros(M, dtype=np.uint8)
    matched = np.zeros(M, dtype=np.int64)
    _, r_c = subchannel_rate(config)
    tau = csi_outage_threshold(r_c, gamma) if r_c > 0 else 0.0
    if scheme.kind == "tdma":
        for m in range(M):
            rate = kt[m] / config.num_subchannels * log_rates[m].sum()
            outage[m] = 1 if rate < rates[m] else 0
            matched[m] = int((gsq[m] >= tau).sum())
    else:
        sets = _fixed_assignment(config, scheme.kind)
        for m in range(M):
            bands = sets[m] // n_c
            rate = log_rates[m][bands].sum() / n_c
            outage[m] = 1 if rate < rates[m] else 0
            matched[m] = int((gsq[m, bands] >= tau).sum())
    return TrialOutcome(outage=outage, matched=matched, scheme=scheme.kind)


def estimate_outage(
    config: SystemConfig,
    scheme: SchemeSpec,
    gamma: float,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    use_pver2hk: bool = False,
    eta: float = 2.0,
    paired: bool = False,
) -> list[OutageEstimate]:
    """Per-user outage estimates from ``trials`` independent frames at SNR gamma.

    Chunked Philox substreams make the result a function of (seed, config,
    scheme, trials) only; the worker count just partitions the chunk list.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    cfg = config.with_snr(gamma)
    scheme.validate(cfg)
    sizes = [
        min(CHUNK_TRIALS, trials - i * CHUNK_TRIALS)
        for i in range((trials + CHUNK_TRIALS - 1) // CHUNK_TRIALS)
    ]

    def work(args):
        idx, n = args
        out, _ = _run_chunk(cfg, scheme, n, idx, seed, paired, use_pver2hk, eta)
        return out.sum(axis=0, dtype=np.int64)

    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(work, jobs))
    else:
        counts = sum(map(work, jobs))
    out = []
    for m in range(cfg.num_users):
        c = int(counts[m])
        lo, hi = wilson_interval(c, trials)
        p = c / trials
        out.append(
            OutageEstimate(
                scheme=scheme.kind,
                user=m,
                gamma=gamma,
                trials=trials,
                outage_count=c,
                p_hat=p,
                ci_lo=lo,
                ci_hi=hi,
                censored=p < CENSOR_FLOOR,
            )
        )
    return out


# ---------------------------------------------------------------------------
# conditional experiments (truncated per-channel laws)
# ---------------------------------------------------------------------------


def _conditional_chunk(
    n_channels: int,
    n_good: int | None,
    gamma: float,
    rate: float,
    n: int,
    rng: np.random.Generator,
    threshold: float | None = None,
) -> int:
    """Count outages among n trials of the (possibly) conditioned rate sum."""
    r_s = rate / n_channels if threshold is None else threshold
    tau = math.expm1(r_s) / gamma
    u = rng.random((n, n_channels))
    if n_good is None:
        xi = -np.log1p(-u)
    else:
        p_tau = -math.expm1(-tau)
        xi = np.empty_like(u)
        if n_good:
            xi[:, :n_good] = tau - np.log1p(-u[:, :n_good])
        if n_good < n_channels:
            xi[:, n_good:] = -np.log1p(-u[:, n_good:] * p_tau)
    rates = np.log1p(gamma * xi).sum(axis=1)
    return int((rates < rate).sum())


def conditional_experiment(
    n_channels: int,
    n_good: int,
    gammas: np.ndarray,
    trials: int,
    seed: int,
    *,
    r: float | None = None,
    rate: float | None = None,
    threshold_rate: float | None = None,
) -> list[OutageEstimate]:
    """Estimate Pr{sum of K subchannel rates < R | k non-outage, K-k outage}.

    Conditioned gains are drawn by inverse CDF of Exp(1) truncated at the
    per-channel threshold (e^{R/K} - 1)/gamma, below for outage channels and
    above for non-outage ones; no rejection sampling.  ``r`` gives
    R = r ln(1+gamma) per grid point, ``rate`` a fixed R;
    ``threshold_rate`` decouples the conditioning threshold from R/K.
    """
    if (r is None) == (rate is None):
        raise ValueError("supply exactly one of r / rate")
    if not 0 <= n_good <= n_channels:
        raise ValueError("n_good out of range")
    out = []
    for gamma in np.atleast_1d(np.asarray(gammas, dtype=float)):
        target = r * math.log1p(gamma) if r is not None else rate
        count = 0
        done = 0
        chunk_idx = 0
        while done < trials:
            n = min(CHUNK_TRIALS, trials - done)
            rng = _stream(seed, _PURPOSE_GAINS, 7, gamma, chunk_idx)
            count += _conditional_chunk(
                n_channels, n_good, gamma, target, n, rng, threshold_rate
            )
            done += n
            chunk_idx += 1
        lo, hi = wilson_interval(count, trials)
        out.append(
            OutageEstimate(
                scheme=f"conditional[K={n_channels},k={n_good}]",
                user=0,
                gamma=float(gamma),
                trials=trials,
                outage_count=count,
                p_hat=count / trials,
                ci_lo=lo,
                ci_hi=hi,
                censored=count / trials < CENSOR_FLOOR,
            )
        )
    return out


def unconditional_experiment(
    n_channels: int,
    gammas: np.ndarray,
    trials: int,
    seed: int,
    *,
    r: float | None = None,
    rate: float | None = None,
) -> list[OutageEstimate]:
    """Same rate-sum outage without conditioning (full Rayleigh law)."""
    if (r is None) == (rate is None):
        raise ValueError("supply exactly one of r / rate")
    out = []
    for gamma in np.atleast_1d(np.asarray(gammas, dtype=float)):
        target = r * math.log1p(gamma) if r is not None else rate
        count = 0
        done = 0
        chunk_idx = 0
        while done < trials:
            n = min(CHUNK_TRIALS, trials - done)
            rng = _stream(seed, _PURPOSE_GAINS, 8, gamma, chunk_idx)
            count += _conditional_chunk(n_channels, None, gamma, target, n, rng)
            done += n
            chunk_idx += 1
        lo, hi = wilson_interval(count, trials)
        out.append(
            OutageEstimate(
                scheme=f"unconditional[K={n_channels}]",
                user=0,
                gamma=float(gamma),
                trials=trials,
                outage_count=count,
                p_hat=count / trials,
                ci_lo=lo,
                ci_hi=hi,
            )
        )
    return out


# ---------------------------------------------------------------------------
# sweeps with formula overlays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    user: int
    gamma_db: float
    p_out: float
    ci_lo: float
    ci_hi: float
    source: str


def _formula_row(config: SystemConfig, scheme: SchemeSpec, m: int, gamma: float):
    cfg = config.with_snr(gamma)
    try:
        if scheme.kind == "rb_coded":
            return min(1.0, rb_outage_high_snr(cfg, m)), "formula_high"
        if scheme.kind == "chunk_coded":
            return (
                min(1.0, chunk_outage_high_snr(cfg, m, int(scheme.caps(cfg)[m]))),
                "formula_high",
            )
        return min(1.0, scheme_upper_bound(cfg, scheme, m, gamma)), "bound"
    except RegimeError:
        pass
    try:
        if scheme.kind == "chunk_coded":
            return min(1.0, chunk_outage_low_snr(cfg, m, int(scheme.caps(cfg)[m]))), "formula_low"
        if scheme.kind == "rb_coded":
            return min(1.0, rb_outage_low_snr(cfg, m)), "formula_low"
    except RegimeError:
        pass
    return math.nan, "guard_violated"


def _scheme_dmt(config: SystemConfig, scheme: SchemeSpec, m: int) -> float:
    r_m = 0.0 if config.multiplexing_gains is None else config.multiplexing_gains[m]
    if scheme.kind == "chunk_coded":
        return dmt_chunk(config, m, int(scheme.caps(config)[m]), r_m)
    if scheme.kind == "rb_coded":
        return dmt_fixed_scheme(config, "rb_coded", m, r_m)
    return dmt_fixed_scheme(config, scheme.kind, m, r_m)


def sweep(
    config: SystemConfig,
    schemes: list[SchemeSpec],
    gammas_db: np.ndarray,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    use_pver2hk: bool = False,
    eta: float = 2.0,
    paired: bool = False,
    with_formulas: bool = True,
    with_asymptote: bool = True,
) -> list[SweepRow]:
    """Monte Carlo sweep over an SNR grid with formula and asymptote overlays.

    Every (scheme, user, SNR) gets a Monte Carlo row; where the regime guards
    allow, a closed-form overlay row follows, and an SNR^{-d*} reference line
    is anchored at the strongest SNR whose estimate is uncensored.
    """
    gammas_db = np.atleast_1d(np.asarray(gammas_db, dtype=float))
    rows: list[SweepRow] = []
    for scheme in schemes:
        mc: dict[tuple[int, int], OutageEstimate] = {}
        for gi, g_db in enumerate(gammas_db):
            gamma = 10.0 ** (g_db / 10.0)
            for est in estimate_outage(
                config,
                scheme,
                gamma,
                trials,
                seed,
                workers=workers,
                use_pver2hk=use_pver2hk,
                eta=eta,
                paired=paired,
            ):
                mc[(gi, est.user)] = est
                rows.append(
                    SweepRow(
                        scheme=scheme.kind,
                        user=est.user,
                        gamma_db=float(g_db),
                        p_out=est.p_hat,
                        ci_lo=est.ci_lo,
                        ci_hi=est.ci_hi,
                        source="mc_censored" if est.censored else "monte_carlo",
                    )
                )
        if with_formulas:
            for gi, g_db in enumerate(gammas_db):
                gamma = 10.0 ** (g_db / 10.0)
                for m in range(config.num_users):
                    p, src = _formula_row(config, scheme, m, gamma)
                    rows.append(
                        SweepRow(
                            scheme=scheme.kind,
                            user=m,
                            gamma_db=float(g_db),
                            p_out=p,
                            ci_lo=math.nan,
                            ci_hi=math.nan,
                            source=src,
                        )
                    )
        if with_asymptote:
            for m in range(config.num_users):
                anchor = None
                for gi in range(len(gammas_db) - 1, -1, -1):
                    est = mc.get((gi, m))
                    if est is not None and not est.censored and est.outage_count > 0:
                        anchor = (gi, est)
                        break
                if anchor is None:
                    continue
                gi0, est0 = anchor
                d_star = _scheme_dmt(config, scheme, m)
                for gi, g_db in enumerate(gammas_db):
                    ratio_db = g_db - gammas_db[gi0]
                    p = est0.p_hat * 10.0 ** (-d_star * ratio_db / 10.0)
                    rows.append(
                        SweepRow(
                            scheme=scheme.kind,
                            user=m,
                            gamma_db=float(g_db),
                            p_out=p,
                            ci_lo=math.nan,
                            ci_hi=math.nan,
                            source="asymptote",
                        )
                    )
    return rows
