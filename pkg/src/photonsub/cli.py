"""Command-line front end.

Commands:
    predict  analytic joint distribution, marginals, witnesses from parameters
    mc       protocol simulation compared against the folded analytics
    fit      maximum-likelihood (z, eta, nu) from a counts CSV
    tes      pulse-trace pipeline: energies, mixture fit, photon-number pmf
    report   witnesses for an existing joint matrix file

All randomness comes from --seed (default fixed, never wall-clock), so every
command is byte-deterministic. Exit codes: 0 success, 2 input error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import (DEFAULT_SEED, DEFAULTS, DomainError, TruncationError,
                     UndefinedWitnessError, __version__)
from .estimation import bootstrap_errors, fit_parameters
from .montecarlo import ProtocolConfig, simulate_run, tv_distance
from .states import (DetectorModel, JointPND, build_subtracted_state,
                     detected_joint_pnd, squeezing_from_pump)
from .tes import (assign_photon_numbers, default_template, fit_mixture,
                  synth_batch, wiener_project)
from .witnesses import witness_report

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonsub",
        description="Photon-subtracted squeezed-pair states: predictions, "
                    "simulation, fitting, pulse processing.")
    parser.add_argument("--version", action="version", version=f"photonsub {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_state_flags(p, need_detector=True):
        p.add_argument("--z", type=float, default=None,
                       help="squeezing amplitude, 0 <= z < 1")
        p.add_argument("--pump", type=str, default=None,
                       help="derive z from 'chi_eff,omega_p,L,I_p,n0' instead of --z")
        p.add_argument("--l1", type=int, default=0, help="photons subtracted from the signal arm")
        p.add_argument("--l2", type=int, default=None,
                       help="photons subtracted from the idler arm (default: --l1)")
        if need_detector:
            p.add_argument("--eta", type=float, default=1.0, help="detector efficiency in (0, 1]")
            p.add_argument("--nu", type=float, default=0.0, help="mean dark counts per window")
        p.add_argument("--nmax", type=int, default=None,
                       help="largest photon number on the output grid (default: auto)")
        p.add_argument("--tail-tol", type=float, default=DEFAULTS.tail_tol,
                       help="relative truncation tolerance")

    def add_common(p):
        p.add_argument("--out-dir", type=str, default=".", help="directory for output files")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help="seed for all randomness (fixed default)")
        p.add_argument("--emit-plots", action="store_true",
                       help="also write gnuplot data+script pairs")

    p = sub.add_parser("predict", help="analytic prediction and witnesses")
    add_state_flags(p)
    add_common(p)

    p = sub.add_parser("mc", help="simulate the subtraction protocol")
    add_state_flags(p)
    p.add_argument("--tap-t", type=float, default=0.999,
                   help="tap beam-splitter transmission T in (0, 1]")
    p.add_argument("--shots", type=int, default=10**6, help="source shots to simulate")
    p.add_argument("--workers", type=int, default=1, help="worker threads for sharding")
    add_common(p)

    p = sub.add_parser("fit", help="maximum-likelihood parameters from counts")
    p.add_argument("--in", dest="in_path", type=str, required=True,
                   help="counts CSV (write_matrix_csv layout)")
    p.add_argument("--l1", type=int, default=0, help="photons subtracted from the signal arm")
    p.add_argument("--l2", type=int, default=None,
                   help="photons subtracted from the idler arm (default: --l1)")
    p.add_argument("--tail-tol", type=float, default=DEFAULTS.tail_tol,
                   help="relative truncation tolerance")
    p.add_argument("--bootstrap", type=int, default=200,
                   help="bootstrap resamples for errors (>= 10)")
    add_common(p)

    p = sub.add_parser("tes", help="pulse traces to photon numbers")
    p.add_argument("--in", dest="in_path", type=str, default=None,
                   help="traces CSV, one record per line")
    p.add_argument("--synth", type=float, default=None, metavar="SEP",
                   help="generate synthetic pulses with peak-separation/sigma SEP "
                        "from the predicted signal marginal instead of reading --in")
    add_state_flags(p)
    p.add_argument("--shots", type=int, default=10**4,
                   help="synthetic pulse count for --synth")
    add_common(p)

    p = sub.add_parser("report", help="witness report for a stored joint matrix")
    p.add_argument("--in", dest="in_path", type=str, required=True,
                   help="joint matrix CSV: probabilities or integer counts")
    add_common(p)
    return parser


def _resolve_z(args) -> float:
    if (args.z is None) == (args.pump is None):
        raise DomainError("exactly one of --z or --pump is required")
    if args.z is not None:
        return args.z
    parts = args.pump.split(",")
    if len(parts) != 5:
        raise DomainError(f"--pump needs 5 comma-separated values "
                          f"'chi_eff,omega_p,L,I_p,n0', got {len(parts)}")
    try:
        chi, omega, length, intensity, n0 = (float(x) for x in parts)
    except ValueError:
        raise DomainError(f"--pump: unparseable number in '{args.pump}'") from None
    return squeezing_from_pump(chi, omega, length, intensity, n0)


def _l_pair(args):
    l1 = args.l1
    l2 = args.l1 if args.l2 is None else args.l2
    return l1, l2


def _tool_section():
    return {"name": "photonsub", "version": __version__}


def _witness_sections(pnd: JointPND, zero_band=DEFAULTS.zero_band):
    """Witness + marginal-fit report sections; Agarwal may be undefined."""
    try:
        rep = witness_report(pnd, zero_band=zero_band)
        witness = {
            "agarwal": rep.agarwal,
            "moment_det": rep.moment_det,
            "lambda_min": rep.lambda_min,
            "zero_band": rep.zero_band,
            "cs_violated": rep.cs_violated,
            "det_negative": rep.det_negative,
            "eig_negative": rep.eig_negative,
        }
        fits = {
            "signal_thermal_nbar": rep.signal_thermal.nbar,
            "signal_thermal_r2": rep.signal_thermal.r_squared,
            "signal_poisson_nbar": rep.signal_poisson.nbar,
            "signal_poisson_r2": rep.signal_poisson.r_squared,
            "idler_thermal_nbar": rep.idler_thermal.nbar,
            "idler_thermal_r2": rep.idler_thermal.r_squared,
            "idler_poisson_nbar": rep.idler_poisson.nbar,
            "idler_poisson_r2": rep.idler_poisson.r_squared,
        }
        return witness, fits
    except UndefinedWitnessError:
        # vanishing F(1,1): the ratio witness does not exist for this data,
        # which the report states instead of faking a zero
        from .witnesses import (det_moment_matrix, fit_marginal, min_eigenvalue,
                                moment_matrix)
        mm = moment_matrix(pnd)
        det = det_moment_matrix(mm)
        lam = min_eigenvalue(mm)
        sig, idl = pnd.marginals()
        witness = {
            "agarwal": "undefined",
            "moment_det": det,
            "lambda_min": lam,
            "zero_band": zero_band,
            "cs_violated": False,
            "det_negative": bool(det < -zero_band),
            "eig_negative": bool(lam < -zero_band),
        }
        fits = {}
        for name, marg in (("signal", sig), ("idler", idl)):
            for model in ("thermal", "poisson"):
                f = fit_marginal(marg, model)
                fits[f"{name}_{model}_nbar"] = f.nbar
                fits[f"{name}_{model}_r2"] = f.r_squared
        return witness, fits


def cmd_predict(args) -> int:
    z = _resolve_z(args)
    l1, l2 = _l_pair(args)
    det = DetectorModel(eta=args.eta, nu=args.nu)
    state = build_subtracted_state(z, l1, l2, tail_tol=args.tail_tol)
    pnd = detected_joint_pnd(state, det, n_max=args.nmax, tail_tol=args.tail_tol)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    io.write_matrix_csv(out / "predict_joint.csv", pnd.probs)
    sig, idl = pnd.marginals()
    io.write_columns_csv(out / "predict_marginals.csv", ["signal", "idler"], [sig, idl])

    witness, fits = _witness_sections(pnd)
    sections = {
        "tool": _tool_section(),
        "inputs": {"z": z, "l1": l1, "l2": l2, "eta": args.eta, "nu": args.nu,
                   "nmax": pnd.n_max, "tail_tol": args.tail_tol, "seed": args.seed},
        "state": {"j_min": state.j_min, "j_max": state.j_max,
                  "tail_mass": state.tail_mass},
        "joint": {"n_max": pnd.n_max, "total": pnd.total,
                  "p00": float(pnd.probs[0, 0])},
        "witness": witness,
        "marginal_fits": fits,
        "files": {"joint": "predict_joint.csv", "marginals": "predict_marginals.csv"},
    }
    io.write_report(out / "predict_report.txt", sections)
    if args.emit_plots:
        io.write_gnuplot_heatmap(out, "predict_joint", pnd.probs,
                                 f"joint detected distribution z={z} l=({l1},{l2})")
        io.write_gnuplot_series(out, "predict_marginals", [sig, idl],
                                ["signal", "idler"],
                                f"detected marginals z={z} l=({l1},{l2})")
    return 0


def cmd_mc(args) -> int:
    z = _resolve_z(args)
    l1, l2 = _l_pair(args)
    cfg = ProtocolConfig(z=z, tap_transmission=args.tap_t, l_signal=l1, l_idler=l2,
                         tap_detector=DetectorModel(eta=1.0, nu=0.0),
                         main_detector=DetectorModel(eta=args.eta, nu=args.nu),
                         shots=args.shots, seed=args.seed,
                         n_max=args.nmax)
    result = simulate_run(cfg, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix_csv(out / "mc_counts.csv", result.counts)

    sections = {
        "tool": _tool_section(),
        "inputs": {"z": z, "l1": l1, "l2": l2, "tap_t": args.tap_t,
                   "eta": args.eta, "nu": args.nu, "shots": args.shots,
                   "seed": args.seed},
        "run": {"accepted": result.accepted,
                "acceptance_rate": result.acceptance_rate,
                "empty": result.empty},
    }
    if not result.empty:
        # analytic reference folds the tap transmission into the efficiency
        eta_fold = args.tap_t * args.eta
        state = build_subtracted_state(z, l1, l2, tail_tol=args.tail_tol)
        pnd = detected_joint_pnd(state, DetectorModel(eta=eta_fold, nu=args.nu),
                                 n_max=result.counts.shape[0] - 1,
                                 tail_tol=args.tail_tol)
        sections["comparison"] = {
            "folded_eta": eta_fold,
            "tv_distance": tv_distance(result.empirical, pnd.probs),
        }
        if args.emit_plots:
            io.write_gnuplot_heatmap(out, "mc_empirical", result.empirical,
                                     f"empirical joint distribution T={args.tap_t}")
    sections["files"] = {"counts": "mc_counts.csv"}
    io.write_report(out / "mc_report.txt", sections)
    return 0


def cmd_fit(args) -> int:
    counts = io.read_matrix_csv(args.in_path, dtype=int)
    l1 = args.l1
    l2 = args.l1 if args.l2 is None else args.l2
    fit = fit_parameters(counts, l1, l2)
    errors = bootstrap_errors(counts, l1, l2, fit=fit, b=args.bootstrap,
                              seed=args.seed)
    fit = fit.with_errors(errors)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sections = {
        "tool": _tool_section(),
        "inputs": {"counts_file": str(args.in_path), "l1": l1, "l2": l2,
                   "total_counts": int(counts.sum()),
                   "bootstrap": args.bootstrap, "seed": args.seed},
        "fit": {"z_hat": fit.z_hat, "eta_hat": fit.eta_hat, "nu_hat": fit.nu_hat,
                "nll": fit.nll, "converged": fit.converged,
                "degenerate": fit.degenerate,
                "nu_pinned_at_zero": bool(fit.nu_hat == 0.0)},
        "errors": {"z_err": fit.z_err, "eta_err": fit.eta_err,
                   "nu_err": fit.nu_err, "resamples": args.bootstrap},
    }
    io.write_report(out / "fit_report.txt", sections)
    return 0


def cmd_tes(args) -> int:
    if (args.in_path is None) == (args.synth is None):
        raise DomainError("exactly one of --in or --synth is required")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tmpl = default_template()
    model_pmf = None

    if args.synth is not None:
        if args.synth <= 0:
            raise DomainError("--synth separation/sigma must be > 0")
        if args.shots <= 0:
            raise DomainError("--shots must be > 0")
        z = _resolve_z(args)
        l1, l2 = _l_pair(args)
        state = build_subtracted_state(z, l1, l2, tail_tol=args.tail_tol)
        pnd = detected_joint_pnd(state, DetectorModel(eta=args.eta, nu=args.nu),
                                 n_max=args.nmax, tail_tol=args.tail_tol)
        sig, _ = pnd.marginals()
        model_pmf = sig / sig.sum()
        rng = np.random.default_rng(args.seed)
        ns = rng.choice(model_pmf.size, size=args.shots, p=model_pmf)
        traces = synth_batch(ns, tmpl, 1.0, 1.0 / args.synth, rng)
        inputs = {"mode": "synth", "separation_over_sigma": args.synth,
                  "z": z, "l1": l1, "l2": l2, "eta": args.eta, "nu": args.nu,
                  "pulses": args.shots, "seed": args.seed}
    else:
        traces = io.read_traces_csv(args.in_path)
        if traces.shape[1] < len(tmpl):
            raise DomainError(f"records have {traces.shape[1]} samples; "
                              f"template needs {len(tmpl)}")
        inputs = {"mode": "file", "traces_file": str(args.in_path),
                  "records": traces.shape[0], "seed": args.seed}

    energies = wiener_project(traces, tmpl)
    k_max = (model_pmf.size - 1 if model_pmf is not None
             else args.nmax if args.nmax is not None else 8)
    mix = fit_mixture(energies, k_max)
    labels, pmf = assign_photon_numbers(energies, mix)

    io.write_columns_csv(out / "tes_energies.csv", ["energy"], [energies])
    pmf_cols, pmf_labels = [pmf], ["assigned"]
    if model_pmf is not None:
        pmf_cols.append(model_pmf)
        pmf_labels.append("model")
    io.write_columns_csv(out / "tes_pmf.csv", pmf_labels, pmf_cols)

    sections = {
        "tool": _tool_section(),
        "inputs": inputs,
        "mixture": {"k_max": mix.k_max, "converged": mix.converged,
                    "loglik": mix.loglik, "iterations": mix.n_iter,
                    "weights": tuple(mix.weights),
                    "means": tuple(mix.means),
                    "stds": tuple(mix.stds)},
        "assignment": {"pulses": int(energies.size),
                       "mean_photons": float(labels.mean())},
        "files": {"energies": "tes_energies.csv", "pmf": "tes_pmf.csv"},
    }
    if model_pmf is not None:
        sections["assignment"]["tv_vs_model"] = tv_distance(pmf, model_pmf)
    io.write_report(out / "tes_report.txt", sections)
    if args.emit_plots:
        hist, edges = np.histogram(energies, bins=128)
        centers = 0.5 * (edges[:-1] + edges[1:])
        io.write_gnuplot_series(out, "tes_hist", [centers, hist.astype(float)],
                                ["energy", "count"], "pulse energy histogram")
    return 0


def cmd_report(args) -> int:
    m = io.read_matrix_csv(args.in_path, dtype=float)
    if np.any(m < 0):
        raise DomainError(f"{args.in_path}: negative entries")
    total_in = float(m.sum())
    if total_in <= 0:
        raise DomainError(f"{args.in_path}: matrix sums to zero")
    is_counts = bool(np.all(m == np.floor(m)) and total_in > 1.5)
    probs = m / total_in if is_counts else m
    side = max(probs.shape)
    sq = np.zeros((side, side))
    sq[:probs.shape[0], :probs.shape[1]] = probs
    pnd = JointPND(probs=sq, n_max=side - 1, total=float(sq.sum()))

    witness, fits = _witness_sections(pnd)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sections = {
        "tool": _tool_section(),
        "inputs": {"matrix_file": str(args.in_path),
                   "interpreted_as": "counts" if is_counts else "probabilities",
                   "n_max": pnd.n_max, "total": total_in},
        "witness": witness,
        "marginal_fits": fits,
    }
    io.write_report(out / "report.txt", sections)
    if args.emit_plots:
        sig, idl = pnd.marginals()
        io.write_gnuplot_series(out, "report_marginals", [sig, idl],
                                ["signal", "idler"], "marginals")
    return 0


_HANDLERS = {
    "predict": cmd_predict,
    "mc": cmd_mc,
    "fit": cmd_fit,
    "tes": cmd_tes,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (DomainError, TruncationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (UndefinedWitnessError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
