"""Closed-form rectangular waveguide and SIW design mathematics.

All lengths are in meters and all frequencies in hertz.  Only TE_n0 modes are
modelled, since a post-wall guide cannot support anything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

C0 = 299_792_458.0
ETA0 = 376.730313668


@dataclass(frozen=True)
class Substrate:
    h: float
    eps_r: float
    tan_d: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"substrate height must be positive, got {self.h}")
        if not self.eps_r >= 1:
            raise ValueError(f"relative permittivity must be >= 1, got {self.eps_r}")
        if not self.tan_d >= 0:
            raise ValueError(f"loss tangent must be >= 0, got {self.tan_d}")


@dataclass(frozen=True)
class SiwSpec:
    """Post-wall guide: two rows of vias of diameter ``d`` at pitch ``p``,
    rows ``w_siw`` apart (center to center)."""

    substrate: Substrate
    d: float
    p: float
    w_siw: float

    def __post_init__(self):
        if not 0 < self.d < self.p:
            raise ValueError(f"need 0 < d < p, got d={self.d}, p={self.p}")
        if not self.w_siw > self.d:
            raise ValueError(f"row spacing {self.w_siw} must exceed via diameter {self.d}")

    @property
    def w_eq(self) -> float:
        return equivalent_width(self)

    def equivalent_guide(self) -> RectGuideSpec:
        return RectGuideSpec(self.w_eq, self.substrate)


@dataclass(frozen=True)
class RectGuideSpec:
    a: float
    substrate: Substrate

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"guide width must be positive, got {self.a}")


@dataclass(frozen=True)
class DispersionTable:
    """Propagation constants sampled on a frequency grid.

    ``beta[i, k]`` and ``alpha[i, k]`` hold the phase and attenuation constant
    of mode ``modes[k]`` at ``frequencies[i]``; exactly one of the two is
    populated, the other is NaN.
    """

    frequencies: np.ndarray
    modes: tuple[int, ...]
    beta: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequencies must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        shape = (f.size, len(self.modes))
        if np.shape(self.beta) != shape or np.shape(self.alpha) != shape:
            raise ValueError(f"beta/alpha must have shape {shape}")
        populated = np.isfinite(self.beta) ^ np.isfinite(self.alpha)
        if not populated.all():
            raise ValueError("exactly one of beta/alpha must be set per entry")

    def propagating(self, mode: int) -> np.ndarray:
        return np.isfinite(self.beta[:, self.modes.index(mode)])

    def to_csv(self) -> str:
        lines = ["freq_hz,mode,beta_rad_per_m,alpha_np_per_m"]
        for i, f in enumerate(self.frequencies):
            for k, n in enumerate(self.modes):
                b, a = self.beta[i, k], self.alpha[i, k]
                lines.append(
                    f"{f:.9g},{n},{'' if np.isnan(b) else f'{b:.9g}'},"
                    f"{'' if np.isnan(a) else f'{a:.9g}'}"
                )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RuleCheck:
    rule: str
    passed: bool
    measured: float
    limit: float
    description: str = ""


@dataclass(frozen=True)
class DesignRuleReport:
    entries: tuple[RuleCheck, ...]
    notes: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def format(self) -> str:
        lines = []
        for e in self.entries:
            status = "PASS" if e.passed else "FAIL"
            lines.append(
                f"rule {e.rule}: {status}  {e.description}  "
                f"measured = {e.measured * 1e3:.4g} mm, limit = {e.limit * 1e3:.4g} mm"
            )
        lines.extend(f"note: {n}" for n in self.notes)
        lines.append(f"design rules: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def te_cutoff_frequency(guide: RectGuideSpec, n: int = 1) -> float:
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    if not guide.a > 0:
        raise ValueError("guide width must be positive")
    return n * C0 / (2.0 * guide.a * math.sqrt(guide.substrate.eps_r))


def propagation_constant(guide: RectGuideSpec, f: float, n: int = 1) -> complex:
    """Return gamma = alpha + j*beta of the TE_n0 mode at frequency ``f``.

    Above cutoff gamma is purely imaginary, below it purely real.
    """
    if not f > 0:
        raise ValueError(f"frequency must be positive, got {f}")
    k0 = 2.0 * math.pi * f / C0
    kc = n * math.pi / guide.a
    kz2 = k0 * k0 * guide.substrate.eps_r - kc * kc
    if kz2 >= 0:
        return complex(0.0, math.sqrt(kz2))
    return complex(math.sqrt(-kz2), 0.0)


def dispersion_curve(
    guide: RectGuideSpec,
    band: tuple[float, float],
    modes: Sequence[int],
    npoints: int,
) -> DispersionTable:
    if not modes:
        raise ValueError("mode list is empty")
    f_lo, f_hi = band
    if not (f_lo > 0 and f_hi >= f_lo):
        raise ValueError(f"invalid band {band}")
    if f_hi == f_lo:
        freqs = np.array([f_lo])
    else:
        if npoints < 2:
            raise ValueError("npoints must be >= 2")
        freqs = np.linspace(f_lo, f_hi, npoints)
    beta = np.full((freqs.size, len(modes)), np.nan)
    alpha = np.full_like(beta, np.nan)
    for i, f in enumerate(freqs):
        for k, n in enumerate(modes):
            if f >= te_cutoff_frequency(guide, n):
                beta[i, k] = propagation_constant(guide, f, n).imag
            else:
                alpha[i, k] = propagation_constant(guide, f, n).real
    return DispersionTable(freqs, tuple(int(n) for n in modes), beta, alpha)


def equivalent_width(spec: SiwSpec) -> float:
    w = spec.w_siw - spec.d**2 / (0.95 * spec.p)
    if w <= 0:
        raise ValueError(f"equivalent width {w} m is not positive for {spec}")
    return w


def siw_width_for_equivalent(w_eq: float, d: float, p: float) -> float:
    """Row spacing whose equivalent width is ``w_eq`` (inverse of the
    empirical via-wall correction)."""
    if not w_eq > 0:
        raise ValueError("equivalent width must be positive")
    if d == 0:
        return w_eq
    return w_eq + d**2 / (0.95 * p)


def validate_design_rules(spec: SiwSpec, band: tuple[float, float]) -> DesignRuleReport:
    f_lo, f_hi = band
    if not 0 < f_lo <= f_hi:
        raise ValueError(f"invalid band {band}")
    lam0 = C0 / f_hi
    # Rule A reads the printed bound as the in-dielectric half wavelength.
    limit_a = lam0 / (2.0 * math.sqrt(spec.substrate.eps_r))
    rule_a = RuleCheck(
        "A", spec.p < limit_a, spec.p, limit_a,
        f"p < lambda0/(2*sqrt(er)) at {f_hi / 1e9:.4g} GHz",
    )
    limit_b = 4.0 * spec.d
    rule_b = RuleCheck("B", spec.p < limit_b, spec.p, limit_b, "p < 4d")
    note = (
        "rule A bounds the pitch by half the free-space wavelength scaled by "
        "1/sqrt(er), i.e. the half wavelength inside the dielectric"
    )
    return DesignRuleReport((rule_a, rule_b), (note,))


def ferrite_radius(f0: float, eps_f: float) -> float:
    """Radius of a ferrite junction disk resonating at ``f0``
    (first root of J1', 1.84)."""
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    if not eps_f >= 1:
        raise ValueError("ferrite permittivity must be >= 1")
    omega0 = 2.0 * math.pi * f0
    return 1.84 * C0 / (omega0 * math.sqrt(eps_f))


# Microstrip quasi-static formulas (Hammerstad).


def microstrip_eps_eff(w: float, h: float, eps_r: float) -> float:
    u = w / h
    a = (
        1
        + math.log((u**4 + (u / 52) ** 2) / (u**4 + 0.432)) / 49
        + math.log(1 + (u / 18.1) ** 3) / 18.7
    )
    b = 0.564 * ((eps_r - 0.9) / (eps_r + 3)) ** 0.053
    return (eps_r + 1) / 2 + (eps_r - 1) / 2 * (1 + 10 / u) ** (-a * b)


def microstrip_impedance(w: float, h: float, eps_r: float) -> float:
    """Quasi-static characteristic impedance of a zero-thickness microstrip."""
    u = w / h
    f1 = 6 + (2 * math.pi - 6) * math.exp(-((30.666 / u) ** 0.7528))
    z_air = ETA0 / (2 * math.pi) * math.log(f1 / u + math.sqrt(1 + (2 / u) ** 2))
    return z_air / math.sqrt(microstrip_eps_eff(w, h, eps_r))


def microstrip_width(z0: float, h: float, eps_r: float) -> float:
    """Wheeler/Hammerstad synthesis of strip width for impedance ``z0``."""
    if not z0 > 0:
        raise ValueError("impedance must be positive")
    a = z0 / 60 * math.sqrt((eps_r + 1) / 2) + (eps_r - 1) / (eps_r + 1) * (0.23 + 0.11 / eps_r)
    u = 8 * math.exp(a) / (math.exp(2 * a) - 2) if math.exp(2 * a) > 2 else math.inf
    if not 0 < u <= 2:  # wide-strip branch
        b = ETA0 * math.pi / (2 * z0 * math.sqrt(eps_r))
        if b <= 1.0:
            raise ValueError(f"impedance {z0} ohm is not reachable on er={eps_r}")
        u = 2 / math.pi * (
            b - 1 - math.log(2 * b - 1)
            + (eps_r - 1) / (2 * eps_r) * (math.log(b - 1) + 0.39 - 0.61 / eps_r)
        )
    if not (u > 0 and math.isfinite(u)):
        raise ValueError(f"impedance {z0} ohm is not reachable on er={eps_r}")
    return u * h


@dataclass(frozen=True)
class TaperDims:
    w_mst: float
    w_t: float
    l_t: float
    l: float | None = None


TAPER_PRESETS = {
    "sband-reference": TaperDims(w_mst=3.6e-3, w_t=27.1e-3, l_t=61.5e-3, l=39.8e-3),
}


def siw_wave_impedance(rsiw: SiwSpec, f: float) -> float:
    """Power-voltage impedance of the equivalent guide's TE10 mode."""
    guide = rsiw.equivalent_guide()
    fc = te_cutoff_frequency(guide, 1)
    if f <= fc:
        raise ValueError("frequency at or below TE10 cutoff")
    z_te = ETA0 / math.sqrt(rsiw.substrate.eps_r) / math.sqrt(1 - (fc / f) ** 2)
    return math.pi**2 / 8 * rsiw.substrate.h / guide.a * z_te


def taper_initial_dims(
    z0: float,
    substrate: Substrate,
    rsiw: SiwSpec,
    band: tuple[float, float] = (2.1e9, 3.0e9),
    length_multiple: float = 1.0,
) -> TaperDims:
    """Starting dimensions of a linear microstrip-to-SIW taper.

    The feed width comes from microstrip synthesis at ``z0``; the taper end
    width is the strip whose impedance equals the guide's power-voltage
    impedance at band center, clipped to [w_mst, W_eq]; the length is
    ``length_multiple`` quarter guided wavelengths of the SIW at band center.
    """
    w_mst = microstrip_width(z0, substrate.h, substrate.eps_r)
    f_mid = 0.5 * (band[0] + band[1])
    w_eq = equivalent_width(rsiw)
    z_siw = siw_wave_impedance(rsiw, f_mid)
    try:
        w_t = microstrip_width(z_siw, substrate.h, substrate.eps_r)
    except ValueError:
        w_t = w_eq
    w_t = min(max(w_t, w_mst), w_eq)
    beta = propagation_constant(rsiw.equivalent_guide(), f_mid).imag
    l_t = length_multiple * (2 * math.pi / beta) / 4
    return TaperDims(w_mst, w_t, l_t)
