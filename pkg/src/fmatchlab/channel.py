"""Block-fading channel model, 1-bit CSI quantization, and subchannel outage law.

The system has M users, N subchannels grouped into L coherence bands of
N_c = N/L subchannels each.  Per-band complex gains are i.i.d. CN(0,1); all
subchannels of one band share the band gain.  Rates are in nats per frame
throughout (conversion from bits happens at the CLI boundary only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised for system configurations that violate the model invariants."""


class RegimeError(ValueError):
    """Raised when a closed-form approximation is requested outside its regime."""


@dataclass(frozen=True)
class SystemConfig:
    """System operating point.

    Exactly one of ``target_rates`` (nats/frame) or ``multiplexing_gains`` must
    be given.  With multiplexing gains the per-user rate is
    R_m = r_m * ln(1 + snr), so rates track the SNR grid automatically.
    """

    num_users: int
    num_bands: int
    num_subchannels: int
    snr: float
    target_rates: tuple[float, ...] | None = None
    multiplexing_gains: tuple[float, ...] | None = None

    def __post_init__(self):
        M, L, N = self.num_users, self.num_bands, self.num_subchannels
        if not (2 <= M <= N):
            raise ConfigError(f"need 2 <= num_users <= num_subchannels, got M={M}, N={N}")
        if L < 1 or N % L != 0:
            raise ConfigError(f"num_bands must divide num_subchannels, got L={L}, N={N}")
        if not (self.snr > 0):
            raise ConfigError(f"snr must be positive (linear scale), got {self.snr}")
        if (self.target_rates is None) == (self.multiplexing_gains is None):
            raise ConfigError("supply exactly one of target_rates / multiplexing_gains")
        vec = self.target_rates if self.target_rates is not None else self.multiplexing_gains
        vec = tuple(float(x) for x in vec)
        if len(vec) != M:
            raise ConfigError(f"rate vector has length {len(vec)}, expected {M}")
        if any(x < 0 for x in vec):
            raise ConfigError("rates / multiplexing gains must be non-negative")
        if self.target_rates is not None:
            object.__setattr__(self, "target_rates", vec)
        else:
            object.__setattr__(self, "multiplexing_gains", vec)
        if any(x > 0 for x in vec):
            # K~_m = R_m / R_s must be positive integers summing to N; the
            # shares are SNR-independent so this can be checked eagerly.
            shares = np.array(vec) / sum(vec) * N
            if not np.allclose(shares, np.round(shares), atol=1e-9) or np.any(
                np.round(shares) < 1
            ):
                raise ConfigError(
                    f"per-user subchannel shares {shares} are not positive integers"
                )

    @property
    def n_per_band(self) -> int:
        """Subchannels per coherence band (N_c)."""
        return self.num_subchannels // self.num_bands

    def rates(self) -> np.ndarray:
        """Per-user target rates R_m in nats/frame at this config's SNR."""
        if self.target_rates is not None:
            return np.array(self.target_rates)
        gains = np.array(self.multiplexing_gains)
        return gains * math.log1p(self.snr)

    def ktilde(self) -> np.ndarray:
        """Per-user subchannel counts K~_m = R_m / R_s (integer, sums to N)."""
        vec = self.target_rates if self.target_rates is not None else self.multiplexing_gains
        if all(x == 0 for x in vec):
            raise ConfigError("subchannel shares are undefined for all-zero rates")
        shares = np.array(vec) / sum(vec) * self.num_subchannels
        return np.round(shares).astype(int)

    def with_snr(self, snr: float) -> "SystemConfig":
        """Same operating point at a different SNR (linear scale)."""
        return SystemConfig(
            num_users=self.num_users,
            num_bands=self.num_bands,
            num_subchannels=self.num_subchannels,
            snr=snr,
            target_rates=self.target_rates,
            multiplexing_gains=self.multiplexing_gains,
        )


@dataclass(frozen=True)
class ChannelRealization:
    """One frame of fading: complex band gains g of shape (M, L), CN(0,1)."""

    gains: np.ndarray

    def subchannel_gain(self, m: int, n: int, config: SystemConfig) -> complex:
        """h_{mn}: piecewise-constant over a coherence band."""
        return self.gains[m, n // config.n_per_band]


@dataclass(frozen=True)
class CsiMatrix:
    """1-bit CSI per (user, band): q[m, l] = 0 marks an outage band."""

    q: np.ndarray

    def __post_init__(self):
        if self.q.ndim != 2 or not np.isin(self.q, (0, 1)).all():
            raise ValueError("CSI matrix must be a 2-D 0/1 array")


def sample_channel(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one fading realization: (M, L) i.i.d. CN(0,1) band gains.

    Each gain is built from two real normals of variance 1/2, so E|g|^2 = 1.
    Deterministic given the generator state.
    """
    shape = (config.num_users, config.num_bands)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return ChannelRealization(gains=(re + 1j * im) / np.sqrt(2.0))


def mutual_information(
    real: ChannelRealization, m: int, l: int, config: SystemConfig
) -> float:
    """Per-subchannel mutual information (nats) for user m on band l.

    I = (1/N_c) ln(1 + |g_{ml}|^2 * snr).
    """
    g2 = abs(real.gains[m, l]) ** 2
    return math.log1p(g2 * config.snr) / config.n_per_band


def mutual_information_matrix(real: ChannelRealization, config: SystemConfig) -> np.ndarray:
    """All (M, L) per-subchannel mutual informations at once."""
    g2 = np.abs(real.gains) ** 2
    return np.log1p(g2 * config.snr) / config.n_per_band


def subchannel_rate(config: SystemConfig) -> tuple[float, float]:
    """Per-subchannel threshold rate R_s = (1/N) sum_m R_m and R_c = N_c * R_s."""
    r_s = float(config.rates().sum()) / config.num_subchannels
    return r_s, config.n_per_band * r_s


def subchannel_outage_prob(r_c: float, snr: float) -> tuple[float, float]:
    """Subchannel outage probability p_s = 1 - exp(-(e^{R_c} - 1)/snr) and q_s.

    Computed via expm1 so that both tails stay accurate in double precision.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    if r_c < 0:
        raise ValueError("R_c must be non-negative")
    x = math.expm1(r_c) / snr
    p_s = -math.expm1(-x)
    return p_s, math.exp(-x)


def quantize_csi(real: ChannelRealization, config: SystemConfig) -> CsiMatrix:
    """1-bit quantization: q[m, l] = 1 iff band l supports rate R_s for user m.

    Equivalently |g_{ml}|^2 * snr >= e^{R_c} - 1, restating I_{mn} >= R_s at
    band level.
    """
    _, r_c = subchannel_rate(config)
    g2 = np.abs(real.gains) ** 2
    q = (g2 * config.snr >= math.expm1(r_c)).astype(np.uint8)
    return CsiMatrix(q=q)


def csi_outage_threshold(r_c: float, snr: float) -> float:
    """Threshold on |g|^2 below which a band is an outage band."""
    return math.expm1(r_c) / snr
