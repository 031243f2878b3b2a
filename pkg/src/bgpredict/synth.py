"""Synthetic CGM cohorts for desk-scale experiments.

Each patient's trajectory is a baseline plus smooth logistic meal bumps
(peaks in 180-300 mg/dL) and nocturnal-style dips (troughs in 50-70 mg/dL),
sampled every 5 minutes. Profiles differ only in additive sensor noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CgmSeries, serialize_cgm_csv

STEP_MINUTES = 5.0


@dataclass(frozen=True)
class Profile:
    name: str
    noise_sd: float


PROFILES = {
    "noiseless": Profile("noiseless", 0.0),
    "noisy": Profile("noisy", 5.0),
}


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _pulse(t, start, width, rise, decay):
    """Smooth plateau pulse with height 1: logistic up at ``start``, down at ``start + width``."""
    return _sigmoid((t - start) / rise) * (1.0 - _sigmoid((t - start - width) / decay))


def _trajectory(rng: np.random.Generator, n_points: int) -> np.ndarray:
    t = np.arange(n_points) * STEP_MINUTES
    baseline = rng.uniform(105.0, 135.0)
    bg = np.full(n_points, baseline)
    horizon = t[-1] if n_points > 1 else STEP_MINUTES
    kinds = ["meal", "dip"]
    rng.shuffle(kinds)
    start = rng.uniform(0.0, 60.0)
    i = 0
    while start < horizon:
        kind = kinds[i] if i < 2 else ("meal" if rng.random() < 0.6 else "dip")
        if kind == "meal":
            peak = rng.uniform(200.0, 300.0)
            width = rng.uniform(40.0, 90.0)
            bg += (peak - baseline) * _pulse(t, start, width, rng.uniform(10.0, 18.0), rng.uniform(25.0, 40.0))
            start += width + rng.uniform(150.0, 230.0)
        else:
            trough = rng.uniform(48.0, 62.0)
            width = rng.uniform(50.0, 100.0)
            bg -= (baseline - trough) * _pulse(t, start, width, rng.uniform(15.0, 25.0), rng.uniform(15.0, 25.0))
            start += width + rng.uniform(120.0, 200.0)
        i += 1
    return bg


def synth_series(n_patients: int = 25, n_points: int = 160, seed: int = 0,
                 profile: str = "noisy") -> list[CgmSeries]:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    if n_patients < 1 or n_points < 1:
        raise ValueError("need at least one patient and one point")
    noise_sd = PROFILES[profile].noise_sd
    rng = np.random.default_rng(seed)
    out = []
    width = max(2, len(str(n_patients)))
    for p in range(n_patients):
        bg = _trajectory(rng, n_points)
        if noise_sd > 0:
            bg = bg + rng.normal(0.0, noise_sd, size=n_points)
        bg = np.clip(bg, 40.0, 450.0)
        out.append(CgmSeries(f"p{p + 1:0{width}d}", np.arange(n_points) * STEP_MINUTES, bg))
    return out


def synth_generate(n_patients: int = 25, n_points: int = 160, seed: int = 0,
                   profile: str = "noisy") -> bytes:
    """CSV bytes in the ingestion format; identical for identical arguments."""
    return serialize_cgm_csv(synth_series(n_patients, n_points, seed, profile))
