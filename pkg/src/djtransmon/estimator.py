"""Circuit-parameter estimation, harmonic analysis and model comparison.

All fits go through :func:`djtransmon.lsq.levenberg_marquardt`. Transition
tables hold f_0k / k for multi-photon labels, so model values are divided by
k before subtraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from ._parallel import pmap
from .circuit import DeviceParams
from .errors import ConfigError, FitError, NumericError, ParameterError
from .lsq import levenberg_marquardt
from .models import (
    DEFAULT_K_POT,
    HarmonicSpec,
    ModelKind,
    TRANSITION_LABELS,
    spectrum,
)
from .specfit import TransitionRow, TransitionTable
from .tables import write_csv

__all__ = [
    "FIT_NC",
    "FitSpec",
    "ResidualSet",
    "FitReport",
    "HarmonicContent",
    "residuals",
    "simulate_table",
    "fit_device_parameters",
    "harmonic_transitions",
    "fit_harmonic_content",
    "potential_fourier",
    "ModelDiscrepancy",
    "model_discrepancy_report",
    "write_discrepancy_report",
    "write_harmonics_csv",
]

# N_c = 12 reproduces N_c = 15 transitions to ~1e-6 GHz at a third of the cost
FIT_NC = 12
HARMONIC_LABELS = ("f01", "f02/2", "f03/3", "f04/4")


# --------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class ResidualSet:
    """Model-minus-data per table row (GHz); NaN marks excluded rows."""

    rows: tuple
    model: np.ndarray
    values: np.ndarray
    flagged: tuple  # (phi_e_phi0, label, reason)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def used(self) -> np.ndarray:
        return self.values[self.valid]

    @property
    def mean_abs(self) -> float:
        u = self.used
        return float(np.mean(np.abs(u))) if u.size else float("nan")


def _spectrum_or_reason(phi0, kind, params, nc, k_pot):
    try:
        return spectrum(kind, params, phi0, nc=nc, k_pot=k_pot)
    except (NumericError, ConfigError) as exc:
        return str(exc)


def _row_value(res, label):
    if isinstance(res, str):
        return None, res
    if label in TRANSITION_LABELS:
        k = TRANSITION_LABELS[label][0]
        bad = [s for s in ((0, 0), (k, 0)) if s in res.ambiguous]
        if bad:
            return None, f"ambiguous state labels {bad}"
    try:
        return res.observable(label), ""
    except ConfigError as exc:
        return None, str(exc)


def residuals(params: DeviceParams, table: TransitionTable, kind="two-mode", nc: int = FIT_NC,
              k_pot: int = DEFAULT_K_POT, labels=None, workers: int = 1) -> ResidualSet:
    """Evaluate the model at every table flux and subtract the data.

    Rows whose spectrum fails, whose states are ambiguously labeled, or whose
    observable the model lacks (f_res without a resonator) are flagged and
    carry NaN.
    """
    kind = ModelKind.parse(kind)
    rows = tuple(r for r in table.rows if labels is None or r.label in labels)
    if not rows:
        raise ConfigError("no table rows to compare against")
    fluxes = sorted({r.phi_e_phi0 for r in rows})
    fn = partial(_spectrum_or_reason, kind=kind, params=params, nc=nc, k_pot=k_pot)
    spectra = dict(zip(fluxes, pmap(fn, fluxes, workers)))
    model = np.full(len(rows), np.nan)
    flagged = []
    for i, r in enumerate(rows):
        val, reason = _row_value(spectra[r.phi_e_phi0], r.label)
        if val is None:
            flagged.append((r.phi_e_phi0, r.label, reason))
        else:
            model[i] = val
    data = np.array([r.freq for r in rows])
    return ResidualSet(rows, model, model - data, tuple(flagged))


def simulate_table(params: DeviceParams, fluxes, labels=("f01", "f02/2"), kind="two-mode",
                   nc: int = FIT_NC, noise: float = 0.0, rng=None, workers: int = 1) -> TransitionTable:
    """Forward-generate a transition table, optionally with Gaussian noise (GHz).

    ``f_res`` in ``labels`` requires the two-mode-resonator kind.
    """
    rng = np.random.default_rng(rng)
    kind = ModelKind.parse(kind)
    fluxes = [float(x) for x in fluxes]
    fn = partial(_spectrum_or_reason, kind=kind, params=params, nc=nc, k_pot=DEFAULT_K_POT)
    rows = []
    for phi0, res in zip(fluxes, pmap(fn, fluxes, workers)):
        for label in labels:
            val, reason = _row_value(res, label)
            if val is None:
                raise NumericError(f"cannot simulate {label} at {phi0} Phi0: {reason}")
            err = noise if noise > 0 else 0.0
            rows.append(TransitionRow(phi0, label, float(val + (rng.normal(0, noise) if noise else 0.0)), err))
    return TransitionTable(rows)


# --------------------------------------------------------------------------
# device-parameter fits


@dataclass(frozen=True)
class FitSpec:
    """Which parameters to fit, against which observables, with which model.

    ``x0`` and ``bounds`` default to the base value and (x0 / 2, 2 x0) for
    every free parameter not listed.
    """

    base: DeviceParams
    free: tuple
    kind: ModelKind = ModelKind.TWO_MODE
    transitions: tuple = ("f01", "f02/2")
    x0: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    nc: int = FIT_NC

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        object.__setattr__(self, "free", tuple(self.free))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        names = DeviceParams.field_names()
        unknown = [f for f in self.free if f not in names]
        if unknown:
            raise ConfigError(f"unknown free parameters {unknown}; choose from {names}")
        if len(set(self.free)) != len(self.free):
            raise ConfigError("duplicate free parameters")
        extra = set(self.x0) - set(self.free) | set(self.bounds) - set(self.free)
        if extra:
            raise ConfigError(f"x0/bounds given for fixed parameters {sorted(extra)}")
        for lab in self.transitions:
            if lab not in TRANSITION_LABELS and lab != "f_res":
                raise ConfigError(f"unknown transition {lab!r}")
        if "f_res" in self.transitions and self.kind is not ModelKind.TWO_MODE_RESONATOR:
            raise ConfigError("fitting f_res needs the two-mode-resonator model")
        if self.kind is ModelKind.HARMONIC:
            raise ConfigError("use fit_harmonic_content for the harmonic model")
        x0 = {f: float(self.x0.get(f, getattr(self.base, f))) for f in self.free}
        bounds = {}
        for f in self.free:
            lo, hi = self.bounds.get(f, (0.5 * x0[f], 2.0 * x0[f]))
            if not lo < hi or not lo <= x0[f] <= hi:
                raise ConfigError(f"bounds {lo, hi} for {f} do not bracket x0={x0[f]}")
            bounds[f] = (float(lo), float(hi))
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def from_dict(cls, doc: dict, base: DeviceParams | None = None) -> "FitSpec":
        try:
            if "params" in doc:
                base = DeviceParams.from_json_dict(doc["params"])
            if base is None:
                raise ConfigError("fit spec needs 'params' or an explicit base parameter set")
            return cls(
                base=base,
                free=tuple(doc.get("free", ())),
                kind=doc.get("model", "two-mode"),
                transitions=tuple(doc.get("transitions", ("f01", "f02/2"))),
                x0=dict(doc.get("x0", {})),
                bounds={k: tuple(v) for k, v in doc.get("bounds", {}).items()},
                nc=int(doc.get("nc", FIT_NC)),
            )
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"malformed fit spec: {exc}") from None

    @classmethod
    def load(cls, path, base: DeviceParams | None = None) -> "FitSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base)

    def to_dict(self) -> dict:
        return {
            "params": self.base.to_json_dict(),
            "free": list(self.free),
            "model": self.kind.value,
            "transitions": list(self.transitions),
            "x0": self.x0,
            "bounds": {k: list(v) for k, v in self.bounds.items()},
            "nc": self.nc,
        }

    def params_at(self, x) -> DeviceParams:
        return self.base.replace(**{f: float(v) for f, v in zip(self.free, x)})


@dataclass(frozen=True)
class FitReport:
    params: DeviceParams
    kind: ModelKind
    free: tuple
    stderr: dict
    residuals: ResidualSet
    converged: bool
    message: str
    n_iter: int
    n_fev: int
    cost_history: tuple
    at_bound: tuple
    rank_deficient: bool
    weighted: bool

    @property
    def mean_abs_residual(self) -> float:
        return self.residuals.mean_abs

    @property
    def errors_reliable(self) -> bool:
        return not (self.rank_deficient or self.at_bound)

    def to_dict(self) -> dict:
        used = self.residuals.used
        return {
            "model": self.kind.value,
            "free": list(self.free),
            "params": self.params.to_json_dict(),
            "stderr": self.stderr,
            "mean_abs_residual_GHz": self.mean_abs_residual,
            "rms_residual_GHz": float(np.sqrt(np.mean(used**2))) if used.size else None,
            "n_rows": int(used.size),
            "n_flagged": len(self.residuals.flagged),
            "flagged": [list(f) for f in self.residuals.flagged],
            "converged": self.converged,
            "message": self.message,
            "n_iter": self.n_iter,
            "n_fev": self.n_fev,
            "cost_history": list(self.cost_history),
            "at_bound": list(self.at_bound),
            "rank_deficient": self.rank_deficient,
            "errors_reliable": self.errors_reliable,
            "weighted": self.weighted,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def write_residuals_csv(self, path) -> Path:
        rs = self.residuals
        return write_csv(
            path,
            ("phi_e_phi0", "label", "data_GHz", "model_GHz", "residual_GHz"),
            [(r.phi_e_phi0, r.label, r.freq, m if np.isfinite(m) else None, v if np.isfinite(v) else None)
             for r, m, v in zip(rs.rows, rs.model, rs.values)],
        )


def fit_device_parameters(spec: FitSpec, table: TransitionTable, workers: int = 1,
                          max_iter: int = 200) -> FitReport:
    """Least-squares fit of the free circuit parameters to a transition table.

    Rows are weighted by 1/err when every used row carries a positive error,
    uniformly otherwise. Rows flagged at the current point contribute zero.
    """
    rows = [r for r in table.rows if r.label in spec.transitions]
    n_free = len(spec.free)
    if len(rows) < n_free + 2:
        raise ConfigError(f"{len(rows)} table rows cannot constrain {n_free} free parameters (need {n_free + 2})")
    sub = TransitionTable(rows)
    errs = np.array([r.err for r in rows])
    weighted = bool(np.all(errs > 0))
    w = 1.0 / errs if weighted else np.ones(len(rows))

    def evaluate(x):
        return residuals(spec.params_at(x), sub, spec.kind, spec.nc, workers=workers)

    def fun(x):
        try:
            rs = evaluate(x)
        except ParameterError:
            return np.full(len(rows), np.nan)
        return np.where(rs.valid, rs.values * w, 0.0)

    x0 = np.array([spec.x0[f] for f in spec.free])
    lo = np.array([spec.bounds[f][0] for f in spec.free])
    hi = np.array([spec.bounds[f][1] for f in spec.free])
    res = levenberg_marquardt(fun, x0, bounds=(lo, hi), max_iter=max_iter)
    final = evaluate(res.x)
    if not final.used.size:
        raise FitError("every table row is flagged at the optimum")
    err = res.stderr() if n_free else np.zeros(0)
    at_bound = tuple(f for f, b in zip(spec.free, res.at_bound) if b)
    return FitReport(
        params=spec.params_at(res.x),
        kind=spec.kind,
        free=spec.free,
        stderr={f: float(e) for f, e in zip(spec.free, err)},
        residuals=final,
        converged=res.converged,
        message=res.message,
        n_iter=res.n_iter,
        n_fev=res.n_fev,
        cost_history=tuple(res.history),
        at_bound=at_bound,
        rank_deficient=res.rank_deficient,
        weighted=weighted,
    )


# --------------------------------------------------------------------------
# harmonic content


@dataclass(frozen=True)
class HarmonicContent:
    """cos(k phi) coefficients normalised to c_1 = 1 (index 0 holds k = 1)."""

    coefficients: np.ndarray
    raw: np.ndarray | None = None
    E_C: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, float))

    @property
    def K(self) -> int:
        return self.coefficients.size

    def ratio(self, k: int) -> float:
        return float(self.coefficients[k - 1])


def harmonic_transitions(E_C: float, U, nc: int = 15) -> np.ndarray:
    """(f01, f02/2, f03/3, f04/4) of 4 E_C n^2 - sum_k U_k cos(k phi)."""
    res = spectrum("harmonic", HarmonicSpec(E_C, tuple(U)), nc=nc)
    return np.array([res.observable(lab) for lab in HARMONIC_LABELS])


def fit_harmonic_content(transitions, E_C_init: float, n_harmonics: int = 4,
                         fit_charging_energy: bool = False, nc: int = 15,
                         max_residual: float = 1e-4) -> HarmonicContent:
    """Fit cos(k phi) amplitudes U_1..U_K (and optionally E_C) to f01..f04/4.

    Four observables fix four unknowns: either K = 4 harmonics at known
    E_C (the default), or E_C together with K = 3 harmonics. A square system
    should be solved exactly, so a residual above ``max_residual`` (GHz)
    means no such potential reproduces the data and raises FitError.
    """
    f = np.asarray(transitions, dtype=float)
    if f.shape != (len(HARMONIC_LABELS),):
        raise ConfigError("expected the four observables f01, f02/2, f03/3, f04/4")
    n_unknown = n_harmonics + int(fit_charging_energy)
    if n_harmonics < 1 or n_unknown > f.size:
        raise ConfigError(f"{n_unknown} unknowns cannot be fixed by {f.size} transitions")
    if E_C_init <= 0:
        raise ConfigError("E_C_init must be > 0")
    # plain-transmon seed: f01 ~ sqrt(8 E_J E_C) - E_C
    u1 = (f[0] + E_C_init) ** 2 / (8 * E_C_init)
    x0 = np.r_[[E_C_init] if fit_charging_energy else [], u1, np.zeros(n_harmonics - 1)]

    def unpack(x):
        return (x[0], x[1:]) if fit_charging_energy else (E_C_init, x)

    def fun(x):
        ec, u = unpack(x)
        try:
            return harmonic_transitions(ec, u, nc) - f
        except ConfigError:
            return np.full(f.size, np.nan)

    lo = np.full(x0.size, -np.inf)
    lo[int(fit_charging_energy)] = 0.0  # U_1
    if fit_charging_energy:
        lo[0] = 1e-6
    res = levenberg_marquardt(fun, x0, bounds=(lo, np.full(x0.size, np.inf)), ftol=1e-14)
    ec, u = unpack(res.x)
    if res.rank_deficient:
        raise FitError("harmonic amplitudes not identifiable from these transitions",
                       {"x": res.x.tolist()})
    worst = float(np.max(np.abs(res.residuals)))
    if n_unknown == f.size and worst > max_residual:
        raise FitError(f"no {n_harmonics}-harmonic potential reproduces the transitions "
                       f"(max residual {worst:.3g} GHz)", {"x": res.x.tolist(), "residuals": res.residuals.tolist()})
    return HarmonicContent(u / u[0], np.asarray(u, float), float(ec))


def potential_fourier(potential, K: int, nodes: int = 2048, rtol: float = 1e-8,
                      max_nodes: int = 2**22) -> HarmonicContent:
    """cos(k phi) coefficients of a 2 pi-periodic potential, normalised to c_1.

    c_k = (1/pi) int_0^{2 pi} V cos(k phi) d phi by the periodic trapezoid rule.
    The node count doubles from ``nodes`` until no coefficient moves by more
    than ``rtol`` relative to max |c_k|; past ``max_nodes`` a NumericError is
    raised. The rule is spectrally accurate for smooth potentials; a cusp
    (lambda = 1) converges algebraically and needs many doublings.
    """
    if K < 1:
        raise ConfigError("K must be >= 1")
    if nodes < 2048:
        raise ConfigError("use at least 2048 quadrature nodes")
    ks = np.arange(1, K + 1)

    def coeffs(m):
        phi = 2 * np.pi * np.arange(m) / m
        v = np.asarray(potential(phi), dtype=float)
        if v.shape != phi.shape or not np.all(np.isfinite(v)):
            raise ConfigError("potential must return finite values on the grid")
        # rfft gives sum V e^{-i k phi}; the real part is the cosine sum
        return 2.0 / m * np.fft.rfft(v)[ks].real

    m = nodes
    c = coeffs(m)
    while True:
        m2 = 2 * m
        if m2 > max_nodes:
            raise NumericError(f"Fourier coefficients not converged at {m} nodes")
        c2 = coeffs(m2)
        scale = max(np.max(np.abs(c2)), 1e-300)
        done = np.max(np.abs(c2 - c)) <= rtol * scale
        m, c = m2, c2
        if done:
            break
    if abs(c[0]) <= 1e-14 * max(np.max(np.abs(c)), 1e-300):
        raise NumericError("fundamental vanishes; cannot normalise")
    return HarmonicContent(c / c[0], c)


def write_harmonics_csv(content: HarmonicContent, path, raw_name: str = "raw") -> Path:
    """CSV of (k, c_k), plus the unnormalised coefficient when available."""
    ks = range(1, content.K + 1)
    if content.raw is None:
        return write_csv(path, ("k", "c_k"), zip(ks, content.coefficients))
    return write_csv(path, ("k", "c_k", raw_name), zip(ks, content.coefficients, content.raw))


# --------------------------------------------------------------------------
# model comparison


@dataclass(frozen=True)
class ModelDiscrepancy:
    kind: ModelKind
    residuals: ResidualSet
    fluxes: np.ndarray
    alpha: np.ndarray  # GHz, NaN where the spectrum failed

    @property
    def mean_abs(self) -> float:
        return self.residuals.mean_abs


def _alpha_at(phi0, kind, params, nc, k_pot):
    try:
        return spectrum(kind, params, phi0, nc=nc, k_pot=k_pot).anharmonicity
    except (NumericError, ConfigError):
        return float("nan")


def model_discrepancy_report(params: DeviceParams, table: TransitionTable, nc: int = FIT_NC,
                             k_pot: int = DEFAULT_K_POT, workers: int = 1,
                             kinds=("two-mode", "bo", "reduced")) -> list[ModelDiscrepancy]:
    """Residuals and anharmonicity of each model on the table's flux grid."""
    fluxes = np.array(sorted({r.phi_e_phi0 for r in table.rows}))
    labels = tuple(lab for lab in TRANSITION_LABELS)
    out = []
    for kind in kinds:
        kind = ModelKind.parse(kind)
        rs = residuals(params, table, kind, nc, k_pot, labels=labels, workers=workers)
        fn = partial(_alpha_at, kind=kind, params=params, nc=nc, k_pot=k_pot)
        alpha = np.array(pmap(fn, list(fluxes), workers))
        out.append(ModelDiscrepancy(kind, rs, fluxes, alpha))
    return out


def write_discrepancy_report(report: list[ModelDiscrepancy], outdir, stem: str = "discrepancy"):
    """Write ``<stem>_residuals.csv``, ``<stem>_alpha.csv`` and ``<stem>_summary.csv``."""
    outdir = Path(outdir)
    res_rows, sum_rows = [], []
    for d in report:
        for r, v in zip(d.residuals.rows, d.residuals.values):
            res_rows.append((d.kind.value, r.phi_e_phi0, r.label, v if np.isfinite(v) else None))
        sum_rows.append((d.kind.value, d.mean_abs, int(d.residuals.used.size), len(d.residuals.flagged)))
    fluxes = report[0].fluxes if report else np.zeros(0)
    alpha_rows = [(x, *(d.alpha[i] for d in report)) for i, x in enumerate(fluxes)]
    return [
        write_csv(outdir / f"{stem}_residuals.csv", ("model", "phi_e_phi0", "label", "residual_GHz"), res_rows),
        write_csv(outdir / f"{stem}_alpha.csv",
                  ("phi_e_phi0", *(f"alpha_{d.kind.value}_GHz" for d in report)), alpha_rows),
        write_csv(outdir / f"{stem}_summary.csv", ("model", "mean_abs_residual_GHz", "n_rows", "n_flagged"), sum_rows),
    ]
