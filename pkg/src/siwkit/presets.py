"""Reference S-band designs: substrate, guide, and device dimensions."""

from __future__ import annotations

from .waveguide import RectGuideSpec, SiwSpec, Substrate

BAND = (2.1e9, 3.0e9)

SUBSTRATE = Substrate(h=1.5e-3, eps_r=4.3, tan_d=0.0)
RSIW = SiwSpec(SUBSTRATE, d=1.0e-3, p=2.0e-3, w_siw=43.25e-3)
WR340 = RectGuideSpec(86.36e-3, Substrate(h=43.18e-3, eps_r=1.0))
W_EQ_REPORTED = 42.72e-3

DIVIDER = {"arm_length": 21.3e-3, "post_radius": 1.2e-3, "post_offset": 20.57e-3}

COUPLER = {
    "total_length": 112e-3,
    "w_s": 30e-3,
    "l_s": 8e-3,
    "w_ap": 50e-3,
    "l_ap": 3e-3,
}

CIRCULATOR = {
    "arm_length": 20e-3,
    "ferrite_radius": 6e-3,
    "ferrite_height": 1.5e-3,
    "eps_f": 13.7,
    "saturation_4piMs_gauss": 5000.0,
}

# Scalars quoted for the measured coupler prototype.
COUPLER_MEASURED = {
    "max_isolation_db": -40.02,
    "max_isolation_freq_hz": 2.97e9,
    "mean_insertion_db": -6.46,
    "mean_coupling_db": -7.68,
    "bandwidth_pct": 26.11,
}

RSIW_LENGTH = 60e-3
