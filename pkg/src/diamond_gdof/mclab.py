"""Monte Carlo checks of the supporting lemmas and the TS-QMF signal chain.

Every estimator draws from chunk-keyed streams (see
:func:`diamond_gdof.core.mc_mean`), so reports are reproducible bit for
bit for a fixed :class:`~diamond_gdof.core.McConfig` regardless of the
number of worker threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (EULER_GAMMA, LOG2E, McConfig, NetworkParams, ParameterError,
                   exp_integral_e1, exp_integral_e1_scaled, fit_slope, make_rng,
                   mc_mean, sample_cgauss)

N_SE = 3.0
ORDER_CONST_BITS = 6.0


@dataclass
class LemmaReport:
    """Estimate with standard error against a ``[bound_lo, bound_hi]`` interval.

    ``passed`` is ``bound_lo - 3 SE <= estimate <= bound_hi + 3 SE`` combined
    with any additional checks recorded in ``checks``.
    """

    lemma_id: str
    estimate: float
    se: float
    bound_lo: float
    bound_hi: float
    samples: int
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def in_bounds(self) -> bool:
        return (self.bound_lo - N_SE * self.se <= self.estimate
                <= self.bound_hi + N_SE * self.se)

    @property
    def passed(self) -> bool:
        return self.in_bounds and all(self.checks.values())

    def to_dict(self) -> dict:
        return {"lemma_id": self.lemma_id, "estimate": self.estimate, "se": self.se,
                "bound_lo": self.bound_lo, "bound_hi": self.bound_hi,
                "samples": self.samples, "in_bounds": self.in_bounds,
                "checks": dict(self.checks), "passed": self.passed,
                "extra": dict(self.extra)}


# ---------------------------------------------------------------------------
# Lemma sandwiches
# ---------------------------------------------------------------------------

def mc_jensen_exponential(a: float, b: float, mu: float, mc: McConfig) -> LemmaReport:
    """``E log2(a + b xi)`` for ``xi ~ Exp(mean mu)`` against its Jensen sandwich."""
    if a < 0 or b <= 0 or mu <= 0:
        raise ParameterError("need a >= 0, b > 0, mu > 0")
    est = mc_mean(lambda rng, m: np.log2(a + b * rng.exponential(mu, m)), mc)
    hi = math.log2(a + b * mu)
    return LemmaReport("jensen_exponential", float(est.mean[0]), float(est.se[0]),
                       hi - EULER_GAMMA * LOG2E, hi, est.samples,
                       extra={"a": a, "b": b, "mu": mu})


def mc_jensen_chisq(a: float, b: float, dof: int, mc: McConfig) -> LemmaReport:
    """``E log2(a + b chi2(dof))`` against the chi-squared Jensen sandwich."""
    if a < 0 or b <= 0:
        raise ParameterError("need a >= 0, b > 0")
    if int(dof) != dof or dof < 2 or dof % 2:
        raise ParameterError("dof must be an even integer >= 2")
    est = mc_mean(lambda rng, m: np.log2(a + b * 2.0 * rng.standard_gamma(dof / 2.0, m)), mc)
    hi = math.log2(a + b * dof)
    lo = hi - 2.0 * LOG2E / dof + math.log2(1.0 + 1.0 / dof)
    return LemmaReport("jensen_chisq", float(est.mean[0]), float(est.se[0]),
                       lo, hi, est.samples, extra={"a": a, "b": b, "dof": dof})


def exp_reciprocal_mean(b: float, mu: float) -> float:
    """Closed form ``E[b/(b + xi)] = x e^x E1(x)`` with ``x = b/mu``."""
    x = b / mu
    return x * exp_integral_e1_scaled(x)


def mc_exp_reciprocal(b: float, mu: float, mc: McConfig) -> LemmaReport:
    """``E[b/(b + xi)]``, ``xi ~ Exp(mean mu)``: Monte Carlo vs closed form.

    The bounds are the logarithmic sandwich ``(x/2) ln(1+2/x)`` and
    ``x ln(1+1/x)``; ``checks["closed_form"]`` compares the estimate with
    ``x e^x E1(x)`` at 3 SE.
    """
    if b <= 0 or mu <= 0:
        raise ParameterError("need b > 0 and mu > 0")
    x = b / mu
    est = mc_mean(lambda rng, m: b / (b + rng.exponential(mu, m)), mc)
    exact = exp_reciprocal_mean(b, mu)
    mean, se = float(est.mean[0]), float(est.se[0])
    lo = 0.5 * x * math.log1p(2.0 / x)
    hi = x * math.log1p(1.0 / x)
    checks = {"closed_form": abs(mean - exact) <= N_SE * se + 1e-12,
              "closed_form_in_sandwich": lo <= exact <= hi}
    return LemmaReport("exp_reciprocal", mean, se, lo, hi, est.samples, checks,
                       {"x": x, "closed_form": exact})


# ---------------------------------------------------------------------------
# Correlated-noise term
# ---------------------------------------------------------------------------

def lemma11_pieces(rho_sq: float) -> dict:
    """The three pieces of the closed-form upper bound as printed, and their sum."""
    r = float(rho_sq)
    d = (r + 1.0) ** 2
    first = r * math.exp(-1.0 / r) * math.log1p(r) / d
    second = 1.0 / (1.0 + r) - r * exp_integral_e1(1.0) / d
    third = (-math.exp(-1.0 / r) * r * r + r * r - 3.0 * r / math.e + 2.0 * r
             - 2.0 / math.e + 1.0) / d
    return {"first": first, "second": second, "third": third,
            "total": first + second + third}


def lemma11_second_piece_exact(rho_sq: float) -> float:
    """Direct evaluation of ``E[r/(r-s) 1{r > s+1}]`` (``r~Exp(1)``, ``s~Exp(rho^2)``)."""
    r = float(rho_sq)
    return math.exp(-1.0) / (1.0 + r) + r * exp_integral_e1(1.0) / (r + 1.0) ** 2


def _lemma11_draw(rho_sq):
    def draw(rng, m):
        g = sample_cgauss(rho_sq, m, rng)
        w = sample_cgauss(1.0, m, rng)
        return np.abs(w) ** 2 / (1.0 + np.abs(g + w) ** 2)
    return draw


def _lemma11_angular_draw(rho_sq):
    # |w|^2 ~ Exp(1), |g|^2 ~ Exp(rho^2), phase integrated out analytically
    def draw(rng, m):
        r = rng.exponential(1.0, m)
        s = rng.exponential(rho_sq, m)
        return r / np.sqrt(1.0 + 2.0 * (r + s) + (r - s) ** 2)
    return draw


def mc_lemma11(rho_sq: float, mc: McConfig) -> LemmaReport:
    """``E[|w|^2 / (1 + |g + w|^2)]`` with ``g ~ CN(0, rho^2)``, ``w ~ CN(0, 1)``.

    Checks the estimate against the closed-form bound, the order bound
    ``log2 E <= log2(1/rho^2) + 6`` and the agreement of a second,
    independently drawn estimator with the phase integrated out.
    """
    if rho_sq <= 0:
        raise ParameterError("rho_sq must be positive")
    direct = mc_mean(_lemma11_draw(rho_sq), mc, stream=0)
    angular = mc_mean(_lemma11_angular_draw(rho_sq), mc, stream=1)
    mean, se = float(direct.mean[0]), float(direct.se[0])
    amean, ase = float(angular.mean[0]), float(angular.se[0])
    pieces = lemma11_pieces(rho_sq)
    z = abs(mean - amean) / math.hypot(se, ase)
    checks = {
        "order_bound": math.log2(mean) <= math.log2(1.0 / rho_sq) + ORDER_CONST_BITS,
        "angular_identity": z <= N_SE,
    }
    return LemmaReport("correlated_noise", mean, se, 0.0, pieces["total"],
                       direct.samples, checks,
                       {"rho_sq": rho_sq, "angular_estimate": amean, "angular_se": ase,
                        "angular_z": z, "two_pi_scaled_angular": 2 * math.pi * amean,
                        "bound_pieces": pieces})


def lemma11_slope(rho_sq_list: Sequence[float], mc: McConfig) -> dict:
    """Least-squares slope of ``log2 E[|w|^2/(1+|g+w|^2)]`` against ``log2 rho^2``."""
    reports = [mc_lemma11(r, mc) for r in rho_sq_list]
    x = np.log2(rho_sq_list)
    y = np.log2([rep.estimate for rep in reports])
    slope, intercept = fit_slope(x, y)
    const = float(np.max(y + x))
    return {"slope": slope, "intercept": intercept, "max_const_bits": const,
            "reports": reports}


# ---------------------------------------------------------------------------
# Scaling and the TS-QMF block
# ---------------------------------------------------------------------------

def make_ghat(z):
    """Scaling coefficient ``e^{i angle(z)} + z``; the phasor of ``0`` is ``1``.

    Accepts a scalar or an array and returns the same shape.
    """
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    phasor = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0 + 0j)
    out = phasor + z
    return out.item() if out.ndim == 0 else out


@dataclass
class TsqmfRealization:
    """One coherence block seen by one relay."""

    relay: int
    g: complex
    w_pilot: complex
    ghat: complex
    x_data: np.ndarray
    w_data: np.ndarray
    y: np.ndarray
    y_scaled: np.ndarray
    q: np.ndarray
    y_hat: np.ndarray
    lam: int
    x_relay: np.ndarray


def sim_tsqmf_block(params: NetworkParams, p_lambda: float, coeffs: Sequence[float],
                    seed=None) -> tuple:
    """Simulate one block of the train-scale quantize-map-forward chain.

    The source sends a unit pilot and ``T-1`` CN(0,1) data symbols. Relay
    ``i`` sees ``g_i + w`` on the pilot and ``g_i X + W`` on the data,
    scales by ``ghat_i``, and adds an independent copy ``Q`` of ``W'/ghat_i``
    (the backward quantization test channel run forward). ``Lambda = 0``
    with probability ``p_lambda``; relay ``i`` then transmits
    ``a_Ri0 X_Ri0`` and otherwise ``a_Ri1 X_Ri1``.

    ``coeffs`` is ``(a_R10, a_R11, a_R20, a_R21)``. Returns one
    :class:`TsqmfRealization` per relay.
    """
    if not 0.0 <= p_lambda <= 1.0:
        raise ParameterError("p_lambda must be in [0, 1]")
    if len(coeffs) != 4:
        raise ParameterError("coeffs must be (a_R10, a_R11, a_R20, a_R21)")
    if params.snr is None:
        raise ParameterError("sim_tsqmf_block needs params.snr")
    T = params.T
    if T < 2:
        raise ParameterError("T must be >= 2")
    rng = make_rng(seed)
    rho = params.link_strengths()
    x_data = sample_cgauss(1.0, T - 1, rng)
    lam = 0 if rng.random() < p_lambda else 1
    out = []
    for relay, rho_sq, (a0, a1) in ((1, rho.rho_sr1_sq, coeffs[0:2]),
                                    (2, rho.rho_sr2_sq, coeffs[2:4])):
        g = complex(sample_cgauss(rho_sq, 1, rng)[0])
        w_pilot = complex(sample_cgauss(1.0, 1, rng)[0])
        w_data = sample_cgauss(1.0, T - 1, rng)
        ghat = complex(make_ghat(g + w_pilot))
        y = g * x_data + w_data
        y_scaled = y / ghat
        q = sample_cgauss(1.0, T - 1, rng) / ghat
        x0 = sample_cgauss(1.0, T, rng)
        x1 = sample_cgauss(1.0, T, rng)
        x_relay = a0 * x0 if lam == 0 else a1 * x1
        out.append(TsqmfRealization(relay, g, w_pilot, ghat, x_data, w_data, y,
                                    y_scaled, q, y_scaled + q, lam, x_relay))
    return tuple(out)


def mc_scaling_gain(rho_sq: float, mc: McConfig) -> dict:
    """Mean of ``|g/ghat|^2`` and ``log2 |g/ghat|^2`` for ``g ~ CN(0, rho^2)``."""
    def draw(rng, m):
        g = sample_cgauss(rho_sq, m, rng)
        w = sample_cgauss(1.0, m, rng)
        ratio = np.abs(g / make_ghat(g + w)) ** 2
        return np.vstack([ratio, np.log2(ratio)])
    est = mc_mean(draw, mc)
    return {"mean": float(est.mean[0]), "se": float(est.se[0]),
            "mean_log2": float(est.mean[1]), "se_log2": float(est.se[1])}


# ---------------------------------------------------------------------------
# Train-scale point-to-point components
# ---------------------------------------------------------------------------

def _theorem7_draw(rho_sq):
    def draw(rng, m):
        g = sample_cgauss(rho_sq, m, rng)
        w = sample_cgauss(1.0, m, rng)
        z = g + w
        ghat = make_ghat(z)
        den = 1.0 + np.abs(z) ** 2
        return np.vstack([
            np.log2(np.abs(g / ghat) ** 2),      # E log2 |g/ghat|^2
            np.log2(np.abs(g) ** 2),             # E log2 |g|^2
            np.log2(2.0 * den),                  # E log2 2(1+|g+w'|^2)
            np.log2(den),                        # E log2 (1+|g+w'|^2)
            2.0 * np.abs(w) ** 2 / den,          # E 2|w'|^2/(1+|g+w'|^2)
            1.0 / den,                           # E 1/(1+|g+w'|^2)
        ])
    return draw


def theorem7_point(rho_sq: float, T: int, mc: McConfig) -> dict:
    """Constituent expectations of the train-scale analysis at one ``rho^2``."""
    if T < 2:
        raise ParameterError("T must be >= 2")
    est = mc_mean(_theorem7_draw(rho_sq), mc)
    m, se = est.mean, est.se
    e_log_ratio, e_log_g, e_log_2den, e_log_den, e_noise, e_inv = map(float, m)
    ln_term = math.log(2.0 + rho_sq) / (rho_sq + 1.0)
    pie = math.pi * math.e
    # conditional-entropy upper-bound assembly, bits
    assembly = (math.log2(pie * ((T - 1) * e_noise + 2.0 * T * ln_term))
                + (T - 2) * math.log2(pie * 2.0 * ln_term))
    target_split = math.log2(rho_sq / (2.0 * (2.0 + rho_sq)))
    gaps = {
        # sample-wise |ghat|^2 <= 2(1+|g+w'|^2)
        "scaling_sandwich": e_log_ratio - (e_log_g - e_log_2den),
        # exponential Jensen sandwich on E log|g|^2 and E log(1+|g+w'|^2)
        "jensen_split": (e_log_g - e_log_2den) - (target_split - EULER_GAMMA * LOG2E),
        # reciprocal-mean step inside the assembly
        "reciprocal_step": 2.0 * ln_term - 2.0 * e_inv,
        # Jensen sandwich of E log(1+|g+w'|^2) around log(2+rho^2)
        "log_upper": math.log2(2.0 + rho_sq) - e_log_den,
        "log_lower": e_log_den - (math.log2(2.0 + rho_sq) - EULER_GAMMA * LOG2E),
    }
    hq_const = math.log2(1.0 / rho_sq) + e_log_2den
    return {"rho_sq": rho_sq, "e_log2_ratio": e_log_ratio, "se_log2_ratio": float(se[0]),
            "e_log2_g": e_log_g, "e_log2_2den": e_log_2den, "e_log2_den": e_log_den,
            "e_noise_term": e_noise, "e_inverse": e_inv,
            "assembly_bits": assembly, "assembly_per_symbol": assembly / (T - 1),
            "direct_gap": e_log_ratio - target_split,
            "gaps": gaps, "hq_const_bits": hq_const, "se_max": float(np.max(se))}


def mc_theorem7_components(rho_sq_list: Sequence[float], T: int, mc: McConfig,
                           slope_tol: float = 0.05) -> LemmaReport:
    """Slope and gap checks on the train-scale point-to-point analysis.

    ``estimate`` is the fitted slope of the conditional-entropy assembly
    divided by ``T-1`` against ``log2 rho^2`` and the bounds are
    ``-1 +/- slope_tol``. ``checks`` holds the gap and constant checks.
    """
    pts = [theorem7_point(r, T, mc) for r in rho_sq_list]
    x = np.log2(rho_sq_list)
    slope, _ = fit_slope(x, [p["assembly_per_symbol"] for p in pts])
    ratio_slope, _ = fit_slope(x, [p["e_log2_ratio"] for p in pts])
    tol = N_SE * max(p["se_max"] for p in pts)
    checks = {
        "gaps_nonnegative": all(v >= -tol for p in pts for v in p["gaps"].values()),
        "scaling_gain_flat": abs(ratio_slope) <= slope_tol,
        "hq_constant": all(p["hq_const_bits"] <= EULER_GAMMA * LOG2E + 2.0 + tol for p in pts),
    }
    rep = LemmaReport("train_scale_components", slope, 0.0, -1.0 - slope_tol,
                      -1.0 + slope_tol, mc.samples, checks,
                      {"points": pts, "scaling_gain_slope": ratio_slope, "T": T})
    return rep
