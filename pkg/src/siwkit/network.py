"""N-port scattering algebra, ideal device matrices and band metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScatteringData:
    frequencies: np.ndarray
    s: np.ndarray  # shape (nfreq, N, N)
    z0: float = 50.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequencies must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if s.ndim != 3 or s.shape[0] != f.size or s.shape[1] != s.shape[2]:
            raise ValueError(f"s must have shape (nfreq, N, N), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("scattering data contains non-finite entries")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)

    @property
    def nports(self) -> int:
        return self.s.shape[1]

    def entry(self, i: int, j: int) -> np.ndarray:
        """S_ij over frequency, 1-based port numbers."""
        self._check_port(i)
        self._check_port(j)
        return self.s[:, i - 1, j - 1]

    def db(self, i: int, j: int) -> np.ndarray:
        return to_db(self.entry(i, j))

    def _check_port(self, i: int) -> None:
        if not 1 <= i <= self.nports:
            raise ValueError(f"port {i} out of range 1..{self.nports}")

    def restrict(self, band: tuple[float, float]) -> np.ndarray:
        lo, hi = band
        tol = 1e-9 * max(abs(lo), abs(hi))
        return (self.frequencies >= lo - tol) & (self.frequencies <= hi + tol)


@dataclass(frozen=True)
class BandMetrics:
    threshold_db: float
    subbands: tuple[tuple[float, float], ...]
    fractional_bandwidth: float
    worst_db: float
    best_db: float


def to_db(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(np.abs(x))


def ideal_circulator(phi: float = 0.0) -> np.ndarray:
    s = np.zeros((3, 3), dtype=complex)
    e = np.exp(1j * phi)
    s[0, 2] = s[1, 0] = s[2, 1] = e
    return s


def ideal_equal_divider() -> np.ndarray:
    a = 1 / math.sqrt(2)
    return np.array([[0, a, a], [a, 0.5, -0.5], [a, -0.5, 0.5]], dtype=complex)


def ideal_hybrid_coupler() -> np.ndarray:
    return np.array(
        [[0, 1, 1j, 0], [1, 0, 0, 1j], [1j, 0, 0, 1], [0, 1j, 1, 0]], dtype=complex
    ) / math.sqrt(2)


def is_unitary(s, tol: float = 1e-9) -> bool:
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("expected a square matrix")
    return float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0])))) <= tol


def is_reciprocal(s, tol: float = 1e-9) -> bool:
    s = np.asarray(s)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("expected a square matrix")
    return float(np.max(np.abs(s - s.T))) <= tol


def _crossing(f0, f1, y0, y1, level):
    return f0 + (level - y0) * (f1 - f0) / (y1 - y0)


def return_loss_bandwidth(data: ScatteringData, port: int, band: tuple[float, float],
                          threshold_db: float = -15.0) -> BandMetrics:
    """Fraction of ``band`` over which |S_pp| stays below ``threshold_db``.

    The curve is treated as piecewise linear in (frequency, dB) between
    samples, so sub-band edges fall on interpolated threshold crossings.
    """
    y_all = data.db(port, port)
    lo, hi = band
    if not hi > lo:
        raise ValueError(f"invalid band {band}")
    f_all = data.frequencies
    if lo < f_all[0] * (1 - 1e-12) or hi > f_all[-1] * (1 + 1e-12):
        raise ValueError("band lies outside the data's frequency range")
    inner = (f_all > lo) & (f_all < hi)
    f = np.concatenate(([lo], f_all[inner], [hi]))
    y = np.concatenate(([np.interp(lo, f_all, y_all)], y_all[inner], [np.interp(hi, f_all, y_all)]))
    below = y < threshold_db
    subbands: list[tuple[float, float]] = []
    start = lo if below[0] else None
    for k in range(len(f) - 1):
        if below[k] and not below[k + 1]:
            end = _crossing(f[k], f[k + 1], y[k], y[k + 1], threshold_db)
            subbands.append((start, end))
            start = None
        elif not below[k] and below[k + 1]:
            start = _crossing(f[k], f[k + 1], y[k], y[k + 1], threshold_db)
    if start is not None:
        subbands.append((start, hi))
    measure = sum(b - a for a, b in subbands)
    frac = min(100.0, max(0.0, 100.0 * measure / (hi - lo)))
    sel = data.restrict(band)
    return BandMetrics(threshold_db, tuple(subbands), frac,
                       float(np.max(y_all[sel])), float(np.min(y_all[sel])))


def insertion_loss_stats(data: ScatteringData, from_port: int, to_port: int,
                         band: tuple[float, float] | None = None) -> tuple[float, float, float]:
    """(min, max, mean) of |S_to,from| in dB over in-band samples; the mean
    is taken over the dB values."""
    y = data.db(to_port, from_port)
    if band is not None:
        y = y[data.restrict(band)]
    if y.size == 0:
        raise ValueError("no samples in band")
    return float(np.min(y)), float(np.max(y)), float(np.mean(y))


def unwrap_deg(deg: np.ndarray) -> np.ndarray:
    """Cumulative unwrap seeded at the first sample, +-180 degree branch."""
    out = np.array(deg, dtype=float)
    for k in range(1, out.size):
        step = out[k] - out[k - 1]
        out[k] -= 360.0 * np.round(step / 360.0)
    return out


def phase_difference_curve(data: ScatteringData, a: int, b: int, ref: int) -> np.ndarray:
    """Unwrapped angle(S_a,ref) - angle(S_b,ref) in degrees.

    The seed sample is taken on the principal branch (-180, 180] and the
    whole curve is then shifted by a multiple of 360 so that its mean lies in
    that interval.
    """
    sa, sb = data.entry(a, ref), data.entry(b, ref)
    bad = np.nonzero((np.abs(sa) == 0) | (np.abs(sb) == 0))[0]
    if bad.size:
        freqs = ", ".join(f"{data.frequencies[k]:.6g} Hz" for k in bad)
        raise ValueError(f"phase undefined (zero magnitude) at {freqs}")
    # difference of angles rather than angle of sa*conj(sb): exact for a == b
    raw = np.degrees(np.angle(sa)) - np.degrees(np.angle(sb))
    curve = unwrap_deg(raw)
    shift = 360.0 * np.round(np.mean(curve) / 360.0)
    return curve - shift


def phase_diff_from_betas(beta1: float, beta2: float, length: float) -> float:
    """Phase offset accumulated between two modes over ``length``."""
    if length < 0:
        raise ValueError("length must be non-negative")
    return (beta1 - beta2) * length


def metrics_report(items: list[tuple[str, float, str]]) -> str:
    return "".join(f"{k} = {v:.6g} {u}".rstrip() + "\n" for k, v, u in items)


def parse_metrics_report(text: str) -> dict[str, float]:
    out = {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, rest = line.split("=", 1)
        out[key.strip()] = float(rest.split()[0])
    return out
