"""Acoustic field predictors and frequency-adaptive band selection.

Predictors here stand in for learned per-band models: each band's "prediction"
is the true band field corrupted by that band's share of the sim2real gap.
The corruption for band ``b`` at every lattice cell is

    observed = amp_b * true_b * exp(sigma_b * g) + floor_b * |h|

with ``g, h`` standard normal and ``amp_b = sqrt(s_b / max(s))`` the band's
relative source amplitude.  Weak bands therefore drown in the additive term,
noisy bands in the multiplicative one.

The all-band predictor mixes the band signals by received energy but, being
broadband, also collects the floor noise of every band (powers add).  Draws
are keyed by (seed, key, band), so all strategies see the same per-band
corruption at the same sample.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .acoustics import (
    ALL_BANDS,
    FIELD_PITCH,
    FIELD_SIZE,
    AcousticField,
    BandSpectrum,
    compute_field,
    received_band_energies,
)

DEFAULT_ALPHA = 5.0
DEFAULT_BETA = 0.8
ERROR_FLOOR = 1e-3
RANDOM_STREAM = 1_000_003
BROADBAND_STREAM = 1_000_033


class Strategy(enum.Enum):
    ORACLE = "oracle"
    ALL_FREQ = "all_freq"
    BEST_FREQ = "best_freq"
    HIGHEST_ENERGY = "highest_energy"
    FREQ_ADAPTIVE = "freq_adaptive"
    RANDOM = "random"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        key = name.strip().lower().replace("-", "_")
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown strategy {name!r}; valid: {', '.join(s.value for s in cls)}")


class NoSignalError(ValueError):
    pass


@dataclass(frozen=True)
class BandErrorPrior:
    errors: tuple[float, ...]
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        errors = tuple(float(e) for e in self.errors)
        if not errors:
            raise ValueError("prior needs at least one band")
        if any(not (e > 0 and math.isfinite(e)) for e in errors):
            raise ValueError("band errors must be positive and finite")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def best_band(self) -> int:
        return int(np.argmin(self.errors))

    def to_json(self) -> str:
        return json.dumps({"e": list(self.errors), "alpha": self.alpha, "beta": self.beta})

    @classmethod
    def from_json(cls, text: str) -> "BandErrorPrior":
        doc = json.loads(text)
        return cls(tuple(doc["e"]), doc.get("alpha", DEFAULT_ALPHA), doc.get("beta", DEFAULT_BETA))


@dataclass(frozen=True)
class WeightBreakdown:
    p: np.ndarray
    q: np.ndarray
    w: np.ndarray
    chosen: int


def band_weights(prior: BandErrorPrior, r) -> WeightBreakdown:
    """Prior weight (1/e)^alpha times energy weight (r/max r)^beta; pick the largest product."""
    r = np.asarray(getattr(r, "energies", r), dtype=float)
    e = np.asarray(prior.errors)
    if r.shape != e.shape:
        raise ValueError("energy and error vectors differ in length")
    r_max = r.max()
    if not r_max > 0:
        raise NoSignalError("no signal")
    p = (1.0 / e) ** prior.alpha
    q = (r / r_max) ** prior.beta
    w = p * q
    return WeightBreakdown(p, q, w, int(np.argmax(w)))


@dataclass(frozen=True)
class NoiseModel:
    sigma: tuple[float, ...]
    floor: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        sigma = tuple(float(s) for s in self.sigma)
        floor = tuple(0.0 for _ in sigma) if self.floor is None else tuple(float(f) for f in self.floor)
        if len(floor) != len(sigma):
            raise ValueError("sigma and floor must have one entry per band")
        if any(s < 0 for s in sigma) or any(f < 0 for f in floor):
            raise ValueError("noise parameters must be non-negative")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "floor", floor)

    @classmethod
    def silent(cls, n_bands: int, seed: int = 0) -> "NoiseModel":
        return cls((0.0,) * n_bands, (0.0,) * n_bands, seed)

    @property
    def is_identity(self) -> bool:
        return not any(self.sigma) and not any(self.floor)

    def rng(self, key: Sequence[int], stream: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), *(int(k) for k in key), int(stream)])

    def corrupt(self, values: np.ndarray, band: int, amplitude: float, key: Sequence[int]) -> np.ndarray:
        rng = self.rng(key, band)
        g = rng.standard_normal(values.shape)
        h = rng.standard_normal(values.shape)
        return amplitude * values * np.exp(self.sigma[band] * g) + self.floor[band] * np.abs(h)

    def gap_only(self, values: np.ndarray, band: int, amplitude: float, key: Sequence[int]) -> np.ndarray:
        """The multiplicative part of ``corrupt`` with the identical draw."""
        g = self.rng(key, band).standard_normal(values.shape)
        return amplitude * values * np.exp(self.sigma[band] * g)

    def broadband_floor(self, shape, key: Sequence[int]) -> np.ndarray:
        scale = math.sqrt(math.fsum(f * f for f in self.floor))
        return scale * np.abs(self.rng(key, BROADBAND_STREAM).standard_normal(shape))


def field_peak(f: AcousticField) -> tuple[tuple[int, int], float]:
    """Argmax cell and value; ties go to the smallest (ix, iy)."""
    flat = int(np.argmax(f.values))
    cell = np.unravel_index(flat, f.values.shape)
    cell = (int(cell[0]), int(cell[1]))
    return cell, float(f.values[cell])


def peak_distance(a: AcousticField, b: AcousticField) -> float:
    (ai, aj), _ = field_peak(a)
    (bi, bj), _ = field_peak(b)
    return a.pitch * math.hypot(ai - bi, aj - bj)


def peak_bearing(f: AcousticField) -> float | None:
    """Bearing of the peak from the field centre, or None when the peak is the centre."""
    (i, j), _ = field_peak(f)
    c = f.size // 2
    if (i, j) == (c, c):
        return None
    return math.atan2(j - c, i - c)


def peak_angle_error(pred: AcousticField, truth: AcousticField) -> float:
    """Absolute bearing difference in [0, pi].

    An undefined bearing (peak at the centre) scores 0 against another centre
    peak and pi/2, the uniform-guess expectation, against anything else.
    """
    a, b = peak_bearing(pred), peak_bearing(truth)
    if a is None and b is None:
        return 0.0
    if a is None or b is None:
        return math.pi / 2
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def band_amplitudes(spectrum: BandSpectrum) -> np.ndarray:
    s = spectrum.energies
    return np.sqrt(s / s.max())


def observed_band_field(
    env,
    source,
    spectrum: BandSpectrum,
    receiver,
    band: int,
    noise: NoiseModel,
    key: Sequence[int] = (0,),
    size: int = FIELD_SIZE,
    pitch: float = FIELD_PITCH,
) -> AcousticField:
    """One band's prediction: the true band field passed through the noise model."""
    true = compute_field(env, source, receiver, band, size, pitch)
    amp = float(band_amplitudes(spectrum)[band])
    return true.with_values(noise.corrupt(true.values, band, amp, key))


def predict_field(
    strategy: Strategy,
    env,
    source,
    spectrum: BandSpectrum,
    receiver,
    noise: NoiseModel,
    prior: BandErrorPrior | None = None,
    key: Sequence[int] = (0,),
    size: int = FIELD_SIZE,
    pitch: float = FIELD_PITCH,
) -> AcousticField:
    """Predicted acoustic field at ``receiver``; the returned field's ``band`` is the band used."""
    strategy = Strategy.parse(strategy) if isinstance(strategy, str) else strategy
    r = received_band_energies(env, source, spectrum, receiver)
    if not np.any(r > 0):
        raise NoSignalError("no signal")

    def band_field(b):
        return observed_band_field(env, source, spectrum, receiver, b, noise, key, size, pitch)

    if strategy is Strategy.ORACLE:
        return compute_field(env, source, receiver, int(np.argmax(r)), size, pitch)
    if strategy is Strategy.RANDOM:
        true = compute_field(env, source, receiver, int(np.argmax(r)), size, pitch)
        vals = noise.rng(key, RANDOM_STREAM).random(true.values.shape)
        return true.with_values(vals, band=ALL_BANDS)
    if strategy is Strategy.ALL_FREQ:
        weights = r / math.fsum(r)
        amps = band_amplitudes(spectrum)
        total = np.zeros((size, size))
        for b in np.nonzero(r > 0)[0]:
            true = compute_field(env, source, receiver, int(b), size, pitch)
            total += weights[b] * noise.gap_only(true.values, int(b), float(amps[b]), key)
        total += noise.broadband_floor(total.shape, key)
        return AcousticField(total, receiver, ALL_BANDS, pitch)
    if prior is None:
        raise ValueError(f"{strategy.value} needs a band error prior")
    if strategy is Strategy.BEST_FREQ:
        return band_field(prior.best_band)
    if strategy is Strategy.HIGHEST_ENERGY:
        return band_field(int(np.argmax(r)))
    if strategy is Strategy.FREQ_ADAPTIVE:
        return band_field(band_weights(prior, r).chosen)
    raise ValueError(f"unhandled strategy {strategy}")


# ----------------------------------------------------------------------
# Calibration
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationReport:
    mean: tuple[float, ...]
    std: tuple[float, ...]
    n_samples: int

    def prior(self, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA, floor: float = ERROR_FLOOR) -> BandErrorPrior:
        return BandErrorPrior(tuple(max(m, floor) for m in self.mean), alpha, beta)

    def to_csv(self) -> str:
        lines = ["band,mean_error_m,std_error_m,n_samples"]
        for b, (m, s) in enumerate(zip(self.mean, self.std)):
            lines.append(f"{b},{m!r},{s!r},{self.n_samples}")
        return "\n".join(lines) + "\n"


def calibrate_band_errors(eval_set, noise: NoiseModel, size: int = FIELD_SIZE, pitch: float = FIELD_PITCH) -> CalibrationReport:
    """Per-band peak-location error of the noisy predictors on white-noise samples.

    ``eval_set`` holds ``(env, source, spectrum, receiver)`` tuples.  The error
    of one prediction is the metric distance between the noisy and the
    noise-free argmax cells.  Silent samples are skipped.
    """
    eval_set = list(eval_set)
    if not eval_set:
        raise ValueError("calibration needs at least one sample")
    n_bands = len(noise.sigma)
    per_band: list[list[float]] = [[] for _ in range(n_bands)]
    for k, (env, source, spectrum, receiver) in enumerate(eval_set):
        if not spectrum.is_flat():
            raise ValueError("calibration requires white-noise source")
        if not np.any(received_band_energies(env, source, spectrum, receiver) > 0):
            continue
        for b in range(n_bands):
            truth = compute_field(env, source, receiver, b, size, pitch)
            noisy = truth.with_values(noise.corrupt(truth.values, b, 1.0, (k,)))
            per_band[b].append(peak_distance(noisy, truth))
    n = len(per_band[0])
    if n == 0:
        raise ValueError("every calibration sample was silent")
    means, stds = [], []
    for errs in per_band:
        m = math.fsum(errs) / n
        var = math.fsum((e - m) ** 2 for e in errs) / (n - 1) if n > 1 else 0.0
        means.append(m)
        stds.append(math.sqrt(var))
    return CalibrationReport(tuple(means), tuple(stds), n)
