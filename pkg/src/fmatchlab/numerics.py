"""Incomplete-gamma machinery and the saddle-point outage bound.

The conditional rate sum of a user with K allocated subchannels, k of them
known non-outage, has a cumulant-generating function built from upper
incomplete gamma functions Gamma(1-lambda, .) and their parameter
derivatives.  The tail bound is psi * exp(K * Lambda(lambda*)) at the unique
positive stationary point lambda* of Lambda.

Parameter derivatives of Gamma(a, z) are evaluated directly as the adaptive
quadratures of the log-weighted integrands int t^{a-1} e^{-t} ln^j(t) dt;
no general Meijer-G evaluator exists or is needed.  Everything runs at 30
significant digits internally and returns floats, which keeps the
high-SNR cancellation in Gamma(1-l, 1/g) - Gamma(1-l, e^Rc/g) harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from mpmath import mp, mpf
from scipy.optimize import brentq

_DPS = 30
_CHERNOFF_FLOOR = mpf("1e-14")


class NumericsError(ValueError):
    """Domain failures inside the saddle-point machinery."""


# ---------------------------------------------------------------------------
# incomplete gamma and its parameter derivatives
# ---------------------------------------------------------------------------


@lru_cache(maxsize=200_000)
def _uig(a: float, z: float):
    with mp.workdps(_DPS):
        return mp.gammainc(mpf(a), mpf(z), mp.inf)


@lru_cache(maxsize=200_000)
def _gdiff(a: float, z1: float, z2: float):
    # int_{z1}^{z2} t^{a-1} e^{-t} dt, evaluated at high precision so the
    # subtraction of two nearly equal upper gammas never cancels in floats
    with mp.workdps(_DPS):
        return mp.gammainc(mpf(a), mpf(z1), mpf(z2))


def _log_points(z1, z2):
    pts = [z1]
    if z1 < 1 < z2:
        pts.append(mpf(1))
    pts.append(z2)
    return pts


@lru_cache(maxsize=200_000)
def _uig_dk(a: float, z: float, k: int):
    # d^k/da^k Gamma(a, z) = int_z^inf t^{a-1} e^{-t} ln^k(t) dt
    with mp.workdps(_DPS):
        am1 = mpf(a) - 1
        f = lambda t: t**am1 * mp.exp(-t) * mp.ln(t) ** k
        return mp.quad(f, _log_points(mpf(z), mp.inf))


@lru_cache(maxsize=200_000)
def _gdiff_dk(a: float, z1: float, z2: float, k: int):
    with mp.workdps(_DPS):
        am1 = mpf(a) - 1
        f = lambda t: t**am1 * mp.exp(-t) * mp.ln(t) ** k
        return mp.quad(f, _log_points(mpf(z1), mpf(z2)))


def upper_inc_gamma(a: float, z: float) -> float:
    """Upper incomplete gamma Gamma(a, z) = int_z^inf e^-t t^(a-1) dt, z > 0.

    The order a may be zero or negative since the lower limit is positive.
    """
    if z <= 0:
        raise NumericsError(f"upper_inc_gamma needs z > 0, got z={z}")
    return float(_uig(float(a), float(z)))


def inc_gamma_d1(a: float, z: float) -> float:
    """First parameter derivative d/da Gamma(a, z)."""
    if z <= 0:
        raise NumericsError(f"inc_gamma_d1 needs z > 0, got z={z}")
    return float(_uig_dk(float(a), float(z), 1))


def inc_gamma_d2(a: float, z: float) -> float:
    """Second parameter derivative d^2/da^2 Gamma(a, z)."""
    if z <= 0:
        raise NumericsError(f"inc_gamma_d2 needs z > 0, got z={z}")
    return float(_uig_dk(float(a), float(z), 2))


# ---------------------------------------------------------------------------
# subchannel outage law in log space
# ---------------------------------------------------------------------------


def log_outage_probs(r_c: float, gamma: float) -> tuple[float, float]:
    """(ln p_s, ln q_s) at threshold rate R_c and SNR gamma, with p_s per
    the Rayleigh band-outage law 1 - exp(-(e^Rc - 1)/gamma)."""
    x = math.expm1(r_c) / gamma
    ln_qs = -x
    ps = -math.expm1(-x)
    if ps <= 0:
        raise NumericsError("p_s underflowed to zero; R_c too small for this SNR")
    return math.log(ps), ln_qs


# ---------------------------------------------------------------------------
# cumulant-generating function of the conditional per-channel rate deficit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SaddleInputs:
    """Conditioning data: K subchannels allocated, k of them non-outage."""

    n_channels: int
    n_good: int
    gamma: float
    r_c: float

    def __post_init__(self):
        if self.n_channels < 1:
            raise NumericsError("n_channels must be >= 1")
        if not 0 <= self.n_good <= self.n_channels:
            raise NumericsError("n_good must lie in [0, n_channels]")
        if self.gamma <= 0:
            raise NumericsError("gamma must be positive")
        if self.r_c <= 0:
            raise NumericsError("r_c must be positive for a nondegenerate saddle")

    @property
    def beta(self) -> float:
        return 1.0 - self.n_good / self.n_channels


@dataclass(frozen=True)
class SaddleSolution:
    """Stationary point and the assembled tail bound.

    ``bound`` is unclamped (reporting layers take min(bound, 1)).  ``status``
    is "ok" for a proper saddle, "no_saddle" when the outage event is not in
    the upper tail (bound 1), and "deep_tail" when the stationary point runs
    off to infinity because the event has vanishing probability.
    """

    lambda_star: float
    sigma_sq: float
    j0: float
    j1: float
    j2: float
    psi: float
    bound: float
    status: str = "ok"


def _mp_cgf_parts(inputs: SaddleInputs):
    g = mpf(inputs.gamma)
    rc = mpf(inputs.r_c)
    beta = mpf(inputs.beta)
    z1, z2 = 1 / g, mp.exp(rc) / g
    ln_ps, ln_qs = log_outage_probs(inputs.r_c, inputs.gamma)
    const = (rc - mp.ln(g)), 1 / g - (beta * mpf(ln_ps) + (1 - beta) * mpf(ln_qs))
    return g, rc, beta, z1, z2, const


def cgf(lam: float, inputs: SaddleInputs) -> float:
    """Lambda(lambda): limiting cumulant-generating function of the deficit.

    Lambda(l) = (R_c - ln g) l + 1/g - ln(p^b q^(1-b))
              + b ln(Gamma(1-l, 1/g) - Gamma(1-l, e^Rc/g))
              + (1-b) ln Gamma(1-l, e^Rc/g),
    and Lambda(0) = 0 identically.
    """
    _, _, beta, z1, z2, (slope, const) = _mp_cgf_parts(inputs)
    with mp.workdps(_DPS):
        out = slope * mpf(lam) + const
        a = 1.0 - lam
        if beta > 0:
            diff = _gdiff(a, float(z1), float(z2))
            if diff <= 0:
                raise NumericsError("Gamma difference lost positivity")
            out += beta * mp.ln(diff)
        if beta < 1:
            out += (1 - beta) * mp.ln(_uig(a, float(z2)))
        return float(out)


def _cgf_d1_mp(lam: float, inputs: SaddleInputs):
    _, _, beta, z1, z2, (slope, _) = _mp_cgf_parts(inputs)
    a = 1.0 - lam
    with mp.workdps(_DPS):
        out = slope
        if beta > 0:
            out += beta * (-_gdiff_dk(a, float(z1), float(z2), 1)) / _gdiff(
                a, float(z1), float(z2)
            )
        if beta < 1:
            out += (1 - beta) * (-_uig_dk(a, float(z2), 1)) / _uig(a, float(z2))
        return out


def cgf_d1(lam: float, inputs: SaddleInputs) -> float:
    """Lambda'(lambda), via the parameter derivatives of the gammas."""
    return float(_cgf_d1_mp(lam, inputs))


def cgf_d2(lam: float, inputs: SaddleInputs) -> float:
    """Lambda''(lambda); positive on the search bracket (Lambda is convex)."""
    _, _, beta, z1, z2, _ = _mp_cgf_parts(inputs)
    a = 1.0 - lam
    with mp.workdps(_DPS):
        out = mpf(0)
        if beta > 0:
            G = _gdiff(a, float(z1), float(z2))
            g1 = _gdiff_dk(a, float(z1), float(z2), 1)
            g2 = _gdiff_dk(a, float(z1), float(z2), 2)
            out += beta * (g2 / G - (g1 / G) ** 2)
        if beta < 1:
            G = _uig(a, float(z2))
            g1 = _uig_dk(a, float(z2), 1)
            g2 = _uig_dk(a, float(z2), 2)
            out += (1 - beta) * (g2 / G - (g1 / G) ** 2)
        return float(out)


def _assemble(inputs: SaddleInputs, lam: float, sigma_sq: float, status: str) -> SaddleSolution:
    g = inputs.gamma
    ln_ps, ln_qs = log_outage_probs(inputs.r_c, g)
    beta = inputs.beta
    z1, z2 = 1 / g, math.exp(inputs.r_c) / g
    with mp.workdps(_DPS):
        j0 = 1 / mpf(g)
        if beta < 1:
            j0 += (1 - mpf(beta)) * mp.ln(_uig(1.0 - lam, z2))
        if beta > 0:
            j0 += mpf(beta) * mp.ln(_gdiff(1.0 - lam, z1, z2))
        j1 = mpf(beta) * mpf(ln_ps) + (1 - mpf(beta)) * mpf(ln_qs)
        j2 = mpf(lam)
        K = inputs.n_channels
        psi = 1 / (mp.sqrt(2 * mp.pi * K * mpf(sigma_sq)) * mpf(lam))
        exponent = -K * ((mp.ln(mpf(g)) - mpf(inputs.r_c)) * j2 + j1 - j0)
        bound_j = psi * mp.exp(exponent)
        bound_l = psi * mp.exp(K * mpf(cgf(lam, inputs)))
        if abs(bound_j - bound_l) > mpf("1e-9") * abs(bound_j):
            raise NumericsError("J-form and CGF-form of the bound disagree")
        return SaddleSolution(
            lambda_star=float(lam),
            sigma_sq=float(sigma_sq),
            j0=float(j0),
            j1=float(j1),
            j2=float(j2),
            psi=float(psi),
            bound=float(bound_j),
            status=status,
        )


def solve_saddle(inputs: SaddleInputs) -> SaddleSolution:
    """Locate the unique positive root of Lambda' and assemble the bound.

    Brackets the root by geometric growth of the upper end and polishes with
    Brent's method.  When Lambda'(0+) >= 0 the outage event is not a tail
    event and the bound is reported as the trivial 1 ("no_saddle"); when
    Lambda' stays negative while exp(K Lambda) underflows (k = K edge), the
    event has essentially zero probability ("deep_tail").
    """
    eps = 1e-8
    d_lo = _cgf_d1_mp(eps, inputs)
    if d_lo >= 0:
        return SaddleSolution(
            lambda_star=math.nan,
            sigma_sq=math.nan,
            j0=math.nan,
            j1=math.nan,
            j2=math.nan,
            psi=math.nan,
            bound=1.0,
            status="no_saddle",
        )
    hi = 1.0
    for _ in range(64):
        d_hi = _cgf_d1_mp(hi, inputs)
        if d_hi > 0:
            break
        with mp.workdps(_DPS):
            chernoff = mp.exp(inputs.n_channels * mpf(cgf(hi, inputs)))
        if chernoff < _CHERNOFF_FLOOR:
            sigma_sq = cgf_d2(hi, inputs)
            return _assemble(inputs, hi, sigma_sq, status="deep_tail")
        hi *= 2.0
    else:
        sigma_sq = cgf_d2(hi, inputs)
        return _assemble(inputs, hi, sigma_sq, status="deep_tail")
    lam = brentq(lambda x: float(_cgf_d1_mp(x, inputs)), eps, hi, xtol=1e-13, rtol=1e-15)
    residual = abs(cgf_d1(lam, inputs))
    if residual > 1e-9 * max(1.0, abs(inputs.r_c)):
        raise NumericsError(f"saddle residual {residual} too large")
    sigma_sq = cgf_d2(lam, inputs)
    if sigma_sq <= 0:
        raise NumericsError("Lambda'' non-positive at the saddle")
    return _assemble(inputs, lam, sigma_sq, status="ok")


def cond_outage_upper(inputs: SaddleInputs) -> float:
    """Upper bound on the conditional outage probability (unclamped).

    psi * exp(-K [(ln g - R_c) J2 + J1 - J0]), equal to
    psi * exp(K Lambda(lambda*)); a failed tail condition propagates as 1.
    """
    return solve_saddle(inputs).bound


# ---------------------------------------------------------------------------
# unconditional (interleaved-style) bound: no CSI, no conditioning terms
# ---------------------------------------------------------------------------


def _int_cgf_d1_mp(lam: float, gamma: float, r_c: float):
    with mp.workdps(_DPS):
        z1 = 1 / mpf(gamma)
        return (mpf(r_c) - mp.ln(mpf(gamma))) + (-_uig_dk(1.0 - lam, float(z1), 1)) / _uig(
            1.0 - lam, float(z1)
        )


def interleaved_cgf(lam: float, gamma: float, r_c: float) -> float:
    """CGF of the unconditioned per-channel deficit:
    (R_c - ln g) l + 1/g + ln Gamma(1-l, 1/g)."""
    with mp.workdps(_DPS):
        g = mpf(gamma)
        return float(
            (mpf(r_c) - mp.ln(g)) * mpf(lam) + 1 / g + mp.ln(_uig(1.0 - lam, float(1 / g)))
        )


def interleaved_upper(n_channels: int, gamma: float, r_c: float) -> SaddleSolution:
    """Outage bound for a fixed allocation of n_channels subchannels with no
    CSI: same saddle machinery with the conditioning terms absent (J1 = 0)."""
    if r_c <= 0:
        raise NumericsError("r_c must be positive")
    if gamma <= 0:
        raise NumericsError("gamma must be positive")
    eps = 1e-8
    if _int_cgf_d1_mp(eps, gamma, r_c) >= 0:
        return SaddleSolution(
            lambda_star=math.nan,
            sigma_sq=math.nan,
            j0=math.nan,
            j1=0.0,
            j2=math.nan,
            psi=math.nan,
            bound=1.0,
            status="no_saddle",
        )
    hi = 1.0
    for _ in range(64):
        if _int_cgf_d1_mp(hi, gamma, r_c) > 0:
            break
        hi *= 2.0
    lam = brentq(
        lambda x: float(_int_cgf_d1_mp(x, gamma, r_c)), eps, hi, xtol=1e-13, rtol=1e-15
    )
    with mp.workdps(_DPS):
        z1 = 1 / mpf(gamma)
        G = _uig(1.0 - lam, float(z1))
        g1 = _uig_dk(1.0 - lam, float(z1), 1)
        g2 = _uig_dk(1.0 - lam, float(z1), 2)
        sigma_sq = float(g2 / G - (g1 / G) ** 2)
        j0 = float(1 / mpf(gamma) + mp.ln(G))
        K = n_channels
        psi = float(1 / (mp.sqrt(2 * mp.pi * K * mpf(sigma_sq)) * mpf(lam)))
        exponent = -K * ((math.log(gamma) - r_c) * lam - j0)
        bound = psi * math.exp(exponent)
        bound_l = psi * math.exp(K * interleaved_cgf(lam, gamma, r_c))
        if not math.isclose(bound, bound_l, rel_tol=1e-9):
            raise NumericsError("interleaved bound forms disagree")
    return SaddleSolution(
        lambda_star=float(lam),
        sigma_sq=sigma_sq,
        j0=j0,
        j1=0.0,
        j2=float(lam),
        psi=psi,
        bound=bound,
        status="ok",
    )


def cond_dmt(n_channels: int, n_good: int, r: float) -> float:
    """Conditional diversity gain k * (1 - r/K) for multiplexing gain r."""
    if not 0 <= r <= n_channels:
        raise NumericsError("multiplexing gain must lie in [0, n_channels]")
    return n_good * (1.0 - r / n_channels)
