"""Command-line entry point: ``djtransmon <subcommand> ...``.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure.
Every output file is plain CSV/JSON with fixed float formatting.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__, circuit, dispersive, estimator, models, specfit
from ._parallel import default_workers
from .errors import ConfigError, NumericError
from .tables import write_csv

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _flux_grid(spec) -> np.ndarray:
    start, stop, count = spec
    count = int(count)
    if count < 1:
        raise ConfigError("flux grid count must be >= 1")
    return np.linspace(float(start), float(stop), count) if count > 1 else np.array([float(start)])


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args) -> circuit.DeviceParams:
    if not args.params:
        raise ConfigError("--params is required")
    return circuit.load_params(args.params)


def _report(*paths):
    for p in paths:
        print(p)


def cmd_spectrum(args) -> int:
    params = _params(args)
    fluxes = _flux_grid(args.flux)
    out = _outdir(args.out)
    kinds = [models.ModelKind.parse(m) for m in args.model.split(",")]
    for kind in kinds:
        if kind is models.ModelKind.HARMONIC:
            raise ConfigError("the harmonic model is only available through 'harmonics'")
        res = models.sweep(kind, params, fluxes, workers=args.workers, nc=args.nc, nf=args.nf)
        _report(models.write_spectrum_csv(res, out / f"spectrum_{kind.value}.csv"))
    return 0


def cmd_chi(args) -> int:
    params = _params(args)
    rows = dispersive.chi_sweep(params, _flux_grid(args.flux), nc=args.nc, workers=args.workers)
    out = _outdir(args.out)
    _report(dispersive.write_chi_csv(rows, out / "chi.csv"))
    crossings = dispersive.chi_zero_crossings(rows)
    for a, b in crossings:
        print(f"chi_0 changes sign between {a:.6g} and {b:.6g} Phi0", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    if not args.scan or not args.extract_config:
        raise ConfigError("analyze needs --scan and --extract-config")
    scan = specfit.load_scan(args.scan)
    config = specfit.ExtractionConfig.load(args.extract_config)
    table = specfit.extract_transitions(scan, config)
    out = _outdir(args.out)
    _report(table.to_csv(out / "transitions.csv"))
    _report(write_csv(out / "failures.csv", ("phi_e_phi0", "label", "message"),
                      [(f.phi_e_phi0, f.label, f.message) for f in table.failures]))
    if table.failures:
        print(f"{len(table.failures)} cells failed; see failures.csv", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    if not args.fit_spec or not args.table:
        raise ConfigError("fit needs --fit-spec and --table")
    base = circuit.load_params(args.params) if args.params else None
    spec = estimator.FitSpec.load(args.fit_spec, base)
    table = specfit.TransitionTable.from_csv(args.table)
    report = estimator.fit_device_parameters(spec, table, workers=args.workers)
    out = _outdir(args.out)
    _report(report.write_json(out / "fit_report.json"), report.write_residuals_csv(out / "fit_residuals.csv"))
    disc = estimator.model_discrepancy_report(report.params, table, nc=spec.nc, workers=args.workers)
    _report(*estimator.write_discrepancy_report(disc, out))
    if not report.errors_reliable:
        print("warning: optimum at a bound or Jacobian rank-deficient; standard errors unreliable",
              file=sys.stderr)
    return 0


def _reduced_shape(phi, lam):
    """(sqrt(1 - lam sin^2(phi/2)) - 1) / lam, finite as lam -> 0.

    Shift and scale leave the normalised coefficients unchanged, and the
    lam -> 0 limit -sin^2(phi/2) is a pure cosine.
    """
    s2 = np.sin(phi / 2) ** 2
    if lam == 0:
        return -s2
    return (np.sqrt(1.0 - lam * s2) - 1.0) / lam


def cmd_harmonics(args) -> int:
    out = _outdir(args.out)
    if args.transitions is not None:
        if args.ec is None:
            raise ConfigError("fit mode needs --ec (charging energy, GHz)")
        k = args.K if args.K is not None else (3 if args.fit_ec else 4)
        hc = estimator.fit_harmonic_content(args.transitions, args.ec, n_harmonics=k,
                                            fit_charging_energy=args.fit_ec, nc=args.nc)
        _report(estimator.write_harmonics_csv(hc, out / "harmonics.csv", raw_name="U_k_GHz"))
        print(f"E_C = {hc.E_C:.9g} GHz", file=sys.stderr)
        return 0
    k = args.K if args.K is not None else 4
    if args.lam is not None:
        if not 0 <= args.lam <= 1:
            raise ConfigError("--lambda must lie in [0, 1]")
        hc = estimator.potential_fourier(partial(_reduced_shape, lam=args.lam), k)
        _report(estimator.write_harmonics_csv(hc, out / "harmonics.csv"))
        return 0
    params = _params(args)
    kind = models.ModelKind.parse(args.model)
    if kind not in (models.ModelKind.BORN_OPPENHEIMER, models.ModelKind.REDUCED):
        raise ConfigError("potential mode supports the bo and reduced models")
    ec_int = circuit.energies_bo(params).E_Cint
    rows = []
    for x in _flux_grid(args.flux):
        sq = circuit.squid_params(params, x)
        pot = partial(models.bo_potential, squid=sq, E_Cint=ec_int,
                      zero_point=kind is models.ModelKind.BORN_OPPENHEIMER)
        hc = estimator.potential_fourier(pot, k)
        rows.extend((x, i, c) for i, c in enumerate(hc.coefficients, start=1))
    _report(write_csv(out / f"harmonics_{kind.value}.csv", ("phi_e_phi0", "k", "c_k"), rows))
    return 0


def cmd_version(args) -> int:
    print(__version__)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="device parameter JSON")
    common.add_argument("--flux", nargs=3, metavar=("START", "STOP", "COUNT"), default=("0", "0.5", "51"),
                        help="flux grid in units of Phi_0 (default 0 0.5 51)")
    common.add_argument("--model", default="two-mode",
                        help="two-mode, two-mode-resonator, bo, reduced (comma list for spectrum)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=default_workers())
    common.add_argument("--nc", type=int, default=models.DEFAULT_NC, help="charge cutoff")
    common.add_argument("--nf", type=int, default=models.DEFAULT_NF, help="resonator Fock cutoff")

    p = argparse.ArgumentParser(prog="djtransmon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="flux sweep of transition frequencies")
    sub.add_parser("chi", parents=[common], help="dispersive shift sweep")
    a = sub.add_parser("analyze", parents=[common], help="extract transitions from a two-tone scan")
    a.add_argument("--scan")
    a.add_argument("--extract-config")
    f = sub.add_parser("fit", parents=[common], help="fit circuit parameters to a transition table")
    f.add_argument("--fit-spec")
    f.add_argument("--table", help="transition table CSV")
    h = sub.add_parser("harmonics", parents=[common], help="harmonic content by fit or potential analysis")
    h.add_argument("--transitions", nargs=4, type=float, metavar=("F01", "F02_2", "F03_3", "F04_4"))
    h.add_argument("--ec", type=float, help="charging energy (GHz)")
    h.add_argument("--fit-ec", action="store_true", help="fit E_C too (three harmonics)")
    h.add_argument("--K", type=int, help="number of harmonics")
    h.add_argument("--lambda", dest="lam", type=float, help="analyse the reduced potential at this lambda")
    sub.add_parser("version", help="print the package version")
    return p


COMMANDS = {
    "spectrum": cmd_spectrum,
    "chi": cmd_chi,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "harmonics": cmd_harmonics,
    "version": cmd_version,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
