"""Two-tone spectroscopy reduction and coherence fits.

Scans are stored long-form as CSV with columns ``phi_e_phi0, amp, freq_GHz,
response``, rows ordered flux-major, then amplitude, then frequency, every
grid point present. Multi-photon lines appear on the drive axis at f_0k / k,
so a fitted centre is tabulated as is under the label ``f0k/k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateFitError, FitError
from .lsq import levenberg_marquardt
from .tables import read_csv, write_csv

__all__ = [
    "TwoToneScan",
    "ScanParseError",
    "load_scan",
    "save_scan",
    "average_over_amplitude",
    "lorentzian",
    "PeakFit",
    "fit_lorentzian",
    "TransitionRow",
    "CellFailure",
    "TransitionTable",
    "ExtractionConfig",
    "extract_transitions",
    "synthesize_scan",
    "DecayFit",
    "RamseyFit",
    "fit_exponential_decay",
    "fit_ramsey",
    "LABEL_DIVISORS",
]

LABEL_DIVISORS = {"f01": 1, "f02/2": 2, "f03/3": 3, "f04/4": 4, "f_res": 1}
SCAN_HEADER = ("phi_e_phi0", "amp", "freq_GHz", "response")
TABLE_HEADER = ("phi_e_phi0", "label", "freq_GHz", "err_GHz")


class ScanParseError(ConfigError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def _strictly_increasing(a) -> bool:
    return bool(np.all(np.diff(a) > 0))


@dataclass(frozen=True)
class TwoToneScan:
    """Response cube indexed ``[flux, amplitude, frequency]``."""

    flux: np.ndarray
    amp: np.ndarray
    freq: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        for name in ("flux", "amp", "freq", "response"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.amp.size == 0 or self.freq.size == 0:
            raise ConfigError("scan needs non-empty amplitude and frequency axes")
        for name in ("flux", "amp", "freq"):
            if not _strictly_increasing(getattr(self, name)):
                raise ConfigError(f"{name} axis is not strictly increasing")
        shape = (self.flux.size, self.amp.size, self.freq.size)
        if self.response.shape != shape:
            raise ConfigError(f"response shape {self.response.shape} != {shape}")
        if not np.all(np.isfinite(self.response)):
            raise ConfigError("response contains non-finite values")


def save_scan(scan: TwoToneScan, path):
    def rows():
        for i, fl in enumerate(scan.flux):
            for j, a in enumerate(scan.amp):
                for k, f in enumerate(scan.freq):
                    yield (fl, a, f, scan.response[i, j, k])

    return write_csv(path, SCAN_HEADER, rows())


def load_scan(path) -> TwoToneScan:
    """Read and validate a long-form scan CSV.

    Raises ScanParseError (a ConfigError) naming the 1-based data row for
    malformed values, misordered rows and incomplete grids.
    """
    header, rows = read_csv(path)
    if tuple(header) != SCAN_HEADER:
        raise ScanParseError(f"expected header {','.join(SCAN_HEADER)}, got {','.join(header)}")
    if not rows:
        raise ScanParseError("scan file has no data rows")
    data = np.empty((len(rows), 4))
    for i, row in enumerate(rows, start=1):
        if len(row) != 4:
            raise ScanParseError(f"expected 4 fields, got {len(row)}", i)
        try:
            data[i - 1] = [float(v) for v in row]
        except ValueError:
            raise ScanParseError(f"non-numeric field in {row}", i) from None
        if not np.all(np.isfinite(data[i - 1])):
            raise ScanParseError("non-finite value", i)

    flux = np.unique(data[:, 0])
    amp = np.unique(data[:, 1])
    freq = np.unique(data[:, 2])
    n = flux.size * amp.size * freq.size
    for i in range(min(len(data), n)):
        expect = (flux[i // (amp.size * freq.size)], amp[(i // freq.size) % amp.size], freq[i % freq.size])
        if tuple(data[i, :3]) != expect:
            raise ScanParseError(
                f"grid point {tuple(data[i, :3])} out of order, expected {expect}", i + 1
            )
    if len(data) != n:
        raise ScanParseError(f"incomplete grid: {len(data)} rows for {n} grid points", min(len(data), n) + 1)
    return TwoToneScan(flux, amp, freq, data[:, 3].reshape(flux.size, amp.size, freq.size))


def average_over_amplitude(scan: TwoToneScan, amp_window=None) -> np.ndarray:
    """Mean response over amplitudes in ``amp_window`` (inclusive), per flux.

    Returns an array of shape (n_flux, n_freq). ``None`` uses the full range.
    """
    if amp_window is None:
        sel = np.ones(scan.amp.size, bool)
    else:
        lo, hi = amp_window
        sel = (scan.amp >= lo) & (scan.amp <= hi)
    if not sel.any():
        raise ConfigError(f"amplitude window {amp_window} selects no rows")
    return scan.response[:, sel, :].mean(axis=1)


def lorentzian(f, f0, gamma, amplitude, offset):
    """A / (1 + ((f - f0)/gamma)^2) + B, gamma the half width at half maximum."""
    return amplitude / (1.0 + ((np.asarray(f) - f0) / gamma) ** 2) + offset


@dataclass(frozen=True)
class PeakFit:
    f0: float
    gamma: float
    amplitude: float
    offset: float
    stderr: dict
    rms: float

    @property
    def f0_err(self) -> float:
        return self.stderr["f0"]


def _peak_seed(freq, trace):
    base = float(np.median(trace))
    dev = trace - base
    i = int(np.argmax(np.abs(dev)))
    amp = float(dev[i])
    # point-to-point scatter is insensitive to the smooth line shape
    noise = 1.4826 * float(np.median(np.abs(np.diff(trace)))) / math.sqrt(2)
    above = np.abs(dev) >= abs(amp) / 2
    # contiguous half-maximum region around the extremum
    lo = i
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = i
    while hi < len(trace) - 1 and above[hi + 1]:
        hi += 1
    step = float(np.median(np.diff(freq)))
    gamma = max(0.5 * (freq[hi] - freq[lo]), step)
    return np.array([freq[i], gamma, amp, base]), noise


def fit_lorentzian(freq, trace, init=None, max_iter: int = 200) -> PeakFit:
    """Least-squares Lorentzian fit; ``init`` is (f0, gamma, A, B) or None.

    Dips are fitted with A < 0. Raises FitError for traces without a
    resolvable peak or when the fitted centre leaves the window.
    """
    freq = np.asarray(freq, dtype=float)
    trace = np.asarray(trace, dtype=float)
    if freq.size < 5 or freq.size != trace.size:
        raise ConfigError("need at least 5 matching frequency/response points")
    seed, noise = _peak_seed(freq, trace)
    if init is not None:
        seed = np.asarray(init, dtype=float)
    if np.ptp(trace) == 0 or (noise > 0 and abs(seed[2]) < 5 * noise):
        raise FitError("no resolvable peak in trace", {"seed": seed.tolist(), "noise": noise})
    span = freq[-1] - freq[0]
    step = float(np.min(np.diff(freq)))
    bounds = (
        [freq[0], step / 20, -np.inf, -np.inf],
        [freq[-1], 2 * span, np.inf, np.inf],
    )

    def resid(x):
        return lorentzian(freq, *x) - trace

    res = levenberg_marquardt(resid, seed, bounds=bounds, max_iter=max_iter)
    f0, gamma, a, b = res.x
    if res.at_bound[0]:
        raise FitError("fitted centre at the window edge", {"x": res.x.tolist()})
    err = res.stderr()
    rms = float(np.sqrt(np.mean(res.residuals**2)))
    names = ("f0", "gamma", "amplitude", "offset")
    return PeakFit(float(f0), float(abs(gamma)), float(a), float(b),
                   {k: float(e) for k, e in zip(names, err)}, rms)


@dataclass(frozen=True)
class TransitionRow:
    phi_e_phi0: float
    label: str
    freq: float
    err: float

    @property
    def divisor(self) -> int:
        return LABEL_DIVISORS[self.label]


@dataclass(frozen=True)
class CellFailure:
    phi_e_phi0: float
    label: str
    message: str


@dataclass
class TransitionTable:
    """Measured transitions, one row per (flux, label); frequencies in GHz.

    Multi-photon labels carry f_0k / k, the quantity read off the drive axis.
    """

    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for r in self.rows:
            if r.label not in LABEL_DIVISORS:
                raise ConfigError(f"unknown transition label {r.label!r}")
            if not (math.isfinite(r.freq) and r.freq > 0):
                raise ConfigError(f"invalid frequency {r.freq} for {r.label}")
            key = (r.phi_e_phi0, r.label)
            if key in seen:
                raise ConfigError(f"duplicate row for {key}")
            seen.add(key)

    def __len__(self):
        return len(self.rows)

    @property
    def fluxes(self) -> np.ndarray:
        return np.unique([r.phi_e_phi0 for r in self.rows])

    def labels_at(self, phi_e_phi0: float) -> list[str]:
        return [r.label for r in self.rows if r.phi_e_phi0 == phi_e_phi0]

    def to_csv(self, path):
        return write_csv(path, TABLE_HEADER, [(r.phi_e_phi0, r.label, r.freq, r.err) for r in self.rows])

    @classmethod
    def from_csv(cls, path) -> "TransitionTable":
        header, rows = read_csv(path)
        if tuple(header) != TABLE_HEADER:
            raise ScanParseError(f"expected header {','.join(TABLE_HEADER)}")
        out = []
        for i, row in enumerate(rows, start=1):
            try:
                out.append(TransitionRow(float(row[0]), row[1].strip(), float(row[2]),
                                         float(row[3]) if row[3] else 0.0))
            except (ValueError, IndexError):
                raise ScanParseError(f"malformed row {row}", i) from None
        return cls(out)


@dataclass(frozen=True)
class TransitionWindow:
    label: str
    amp_window: tuple | None
    freq_windows: dict  # phi_e_phi0 -> (lo, hi)


@dataclass(frozen=True)
class ExtractionConfig:
    """Per-label frequency windows (per flux) and amplitude windows.

    JSON layout::

        {"transitions": [
            {"label": "f01", "amp_window": [0.1, 0.4],
             "windows": [{"phi_e_phi0": 0.0, "freq_GHz": [5.08, 5.12]}, ...]},
            ...]}

    A flux with no window for a label is simply not extracted for it.
    """

    transitions: tuple

    @classmethod
    def from_dict(cls, doc) -> "ExtractionConfig":
        out = []
        try:
            for t in doc["transitions"]:
                label = t["label"]
                if label not in LABEL_DIVISORS:
                    raise ConfigError(f"unknown label {label!r}")
                aw = t.get("amp_window")
                wins = {float(w["phi_e_phi0"]): tuple(float(v) for v in w["freq_GHz"])
                        for w in t.get("windows", [])}
                for lo_hi in wins.values():
                    if len(lo_hi) != 2 or lo_hi[0] >= lo_hi[1]:
                        raise ConfigError(f"bad frequency window {lo_hi} for {label}")
                out.append(TransitionWindow(label, tuple(aw) if aw else None, wins))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed extraction config: {exc}") from None
        return cls(tuple(out))

    @classmethod
    def load(cls, path) -> "ExtractionConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "transitions": [
                {
                    "label": t.label,
                    "amp_window": list(t.amp_window) if t.amp_window else None,
                    "windows": [{"phi_e_phi0": k, "freq_GHz": list(v)} for k, v in t.freq_windows.items()],
                }
                for t in self.transitions
            ]
        }


def _window_for(t: TransitionWindow, phi0: float):
    for k, v in t.freq_windows.items():
        if abs(k - phi0) < 1e-9:
            return v
    return None


def extract_transitions(scan: TwoToneScan, config: ExtractionConfig) -> TransitionTable:
    """Amplitude-average, window and Lorentzian-fit every configured cell.

    Failed fits are recorded in ``table.failures``; they never produce rows.
    """
    rows, failures = [], []
    for t in config.transitions:
        if scan.flux.size == 0:
            break
        try:
            traces = average_over_amplitude(scan, t.amp_window)
        except ConfigError as exc:
            failures.extend(CellFailure(float(x), t.label, str(exc)) for x in scan.flux)
            continue
        for i, phi0 in enumerate(scan.flux):
            win = _window_for(t, float(phi0))
            if win is None:
                continue
            sel = (scan.freq >= win[0]) & (scan.freq <= win[1])
            try:
                fit = fit_lorentzian(scan.freq[sel], traces[i, sel])
            except (FitError, ConfigError) as exc:
                failures.append(CellFailure(float(phi0), t.label, str(exc)))
                continue
            rows.append(TransitionRow(float(phi0), t.label, fit.f0, fit.f0_err))
    rows.sort(key=lambda r: (r.phi_e_phi0, LABEL_DIVISORS[r.label]))
    return TransitionTable(rows, failures)


def synthesize_scan(fluxes, amps, freqs, centers, gamma=0.003, noise=0.0, height=1.0,
                    onsets=None, rng=None) -> TwoToneScan:
    """Forward-generate a two-tone scan with Lorentzian lines.

    ``centers[i]`` maps labels to drive-axis line positions (GHz) at flux
    ``fluxes[i]``. A line of multi-photon order k appears once the drive
    amplitude exceeds ``onsets[label]`` (default 0.2 (k - 1)) and grows
    linearly to ``height`` at the top of the amplitude axis. ``noise`` is the
    Gaussian standard deviation relative to ``height``.
    """
    rng = np.random.default_rng(rng)
    fluxes, amps, freqs = (np.asarray(x, float) for x in (fluxes, amps, freqs))
    resp = np.zeros((fluxes.size, amps.size, freqs.size))
    amax = amps.max()
    for i, lines in enumerate(centers):
        for label, fc in lines.items():
            k = LABEL_DIVISORS[label]
            a0 = (onsets or {}).get(label, 0.2 * (k - 1))
            scale = np.clip((amps - a0) / max(amax - a0, 1e-12), 0, 1) * height
            resp[i] += scale[:, None] * lorentzian(freqs, fc, gamma, 1.0, 0.0)[None, :]
    if noise:
        resp += rng.normal(0, noise * height, resp.shape)
    return TwoToneScan(fluxes, amps, freqs, resp)


# --------------------------------------------------------------------------
# coherence


@dataclass(frozen=True)
class DecayFit:
    T1: float
    amplitude: float
    offset: float
    stderr: dict


@dataclass(frozen=True)
class RamseyFit:
    T2star: float
    detuning: float
    phase: float
    amplitude: float
    offset: float
    stderr: dict


def _check_samples(t, y):
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 5 or t.size != y.size:
        raise ConfigError("need at least 5 matching samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ConfigError("non-finite samples")
    return t, y


def fit_exponential_decay(times, values) -> DecayFit:
    """Fit A exp(-t/T1) + B. Times and T1 share units."""
    t, y = _check_samples(times, values)
    span = float(np.ptp(t))
    tail = y[-max(len(y) // 10, 1):].mean()
    amp = y[0] - tail
    if np.ptp(y) == 0 or abs(amp) < 1e-12 * max(abs(tail), 1.0):
        raise DegenerateFitError("no decay in data (T1 unresolvable)")
    frac = (y - tail) / amp
    below = np.nonzero(frac < math.exp(-1))[0]
    t1 = (t[below[0]] - t[0]) if below.size and t[below[0]] > t[0] else span / 3
    seed = np.array([max(t1, span / 100), amp, tail])

    def resid(x):
        return x[1] * np.exp(-(t - t[0]) / x[0]) + x[2] - y

    res = levenberg_marquardt(resid, seed, bounds=([span * 1e-4, -np.inf, -np.inf], [np.inf] * 3))
    T1, a, b = res.x
    if T1 > 100 * span:
        raise DegenerateFitError(f"fitted T1={T1:.3g} far beyond the sampled window")
    a = a * math.exp(t[0] / T1)
    err = res.stderr()
    return DecayFit(float(T1), float(a), float(b), {"T1": float(err[0]), "amplitude": float(err[1]), "offset": float(err[2])})


def fit_ramsey(times, values) -> RamseyFit:
    """Fit A exp(-t/T2*) cos(2 pi delta t + phase) + B.

    ``delta`` comes out in inverse time units (MHz for microseconds).
    """
    t, y = _check_samples(times, values)
    span = float(np.ptp(t))
    base = float(np.mean(y[len(y) // 2:]))
    dev = y - base
    if np.ptp(y) == 0 or np.max(np.abs(dev)) < 1e-12 * max(abs(base), 1.0):
        raise DegenerateFitError("no oscillation in Ramsey data")
    # detuning seed from a zero-padded periodogram on the uniform-in-index samples
    dt = float(np.median(np.diff(t)))
    nfft = 16 * len(t)
    spec = np.abs(np.fft.rfft(dev - dev.mean(), nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    spec[0] = 0
    delta0 = float(freqs[int(np.argmax(spec))])
    amp0 = float(np.max(np.abs(dev)))

    def resid(x):
        T2, d, ph, a, b = x
        return a * np.exp(-t / T2) * np.cos(2 * np.pi * d * t + ph) + b - y

    best = None
    lo = [span * 1e-3, 0.0, -np.inf, 0.0, -np.inf]
    hi = [np.inf, 0.5 / dt, np.inf, np.inf, np.inf]
    for ph in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        try:
            res = levenberg_marquardt(resid, [span / 3, delta0, ph, amp0, base], bounds=(lo, hi))
        except FitError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("Ramsey fit did not converge from any seed")
    T2, d, ph, a, b = best.x
    noise = math.sqrt(2 * best.cost / max(len(t) - 5, 1))
    if a < 3 * noise / math.sqrt(len(t)) or a == 0:
        raise DegenerateFitError("oscillation amplitude not resolved")
    if T2 > 100 * span:
        raise DegenerateFitError(f"fitted T2*={T2:.3g} far beyond the sampled window")
    err = best.stderr()
    ph = float((ph + np.pi) % (2 * np.pi) - np.pi)
    names = ("T2star", "detuning", "phase", "amplitude", "offset")
    return RamseyFit(float(T2), float(d), ph, float(a), float(b), {k: float(e) for k, e in zip(names, err)})
