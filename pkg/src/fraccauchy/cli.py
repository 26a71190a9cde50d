"""Command line entry point: ``fraccauchy <command> [options]``.

Exit codes: 0 success, 1 invariant violation, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .cauchy import InvalidDelta, run_scheme
from .harness import ConfigError, RunConfig, build_setup, compute_reference, \
    convergence_csv, convergence_sweep, relative_error, write_solution_csv

log = logging.getLogger("fraccauchy")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file mirroring the run configuration")
    parser.add_argument("--n", type=int, help="intervals per side of the unit square")
    parser.add_argument("--alpha", type=float, help="fractional power, 0 < alpha < 1")
    parser.add_argument("--delta", type=float, help="shift below lambda_1 (default 0.99 lambda_1)")
    parser.add_argument("--preset", help="paper5, constant_c or a coefficient JSON file")
    parser.add_argument("--scheme", choices=["two", "three"])
    parser.add_argument("--sigma", help="weight, a number or 'opt'")
    parser.add_argument("--N", type=int, dest="N", help="number of pseudo-time steps")
    parser.add_argument("--init", choices=["sym", "euler", "corrected", "fine"])
    parser.add_argument("--m", type=int, help="fine-grid factor (default N)")
    parser.add_argument("--nref", type=int, help="steps of the reference solution")
    parser.add_argument("--cg-tol", type=float, dest="cg_tol")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--cache", help="reference cache directory")
    parser.add_argument("-v", "--verbose", action="store_true")


_FIELDS = ("n", "alpha", "delta", "preset", "scheme", "sigma", "N", "init", "m", "nref",
           "cg_tol", "out", "cache")


def config_from_args(args, **defaults) -> RunConfig:
    overrides = {k: getattr(args, k) for k in _FIELDS if getattr(args, k, None) is not None}
    if args.config:
        base = json.loads(Path(args.config).read_text()) if Path(args.config).is_file() else None
        if base is None:
            raise ConfigError(f"config file {args.config} not found")
        merged = {**defaults, **base, **overrides}
    else:
        merged = {**defaults, **overrides}
    return RunConfig.from_dict(merged)


def _parse_list(text, cast):
    return [cast(tok) for tok in text.split(",") if tok.strip()] if text else []


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _resolved(setup) -> dict:
    cfg = setup.config
    d = {k: getattr(cfg, k) for k in _FIELDS}
    d.update(sigma=cfg.resolved_sigma(), m=cfg.resolved_m(), delta=setup.problem.delta,
             lambda1=setup.problem.lambda1, dimension=setup.problem.n)
    return d


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    t0 = time.perf_counter()
    setup = build_setup(cfg)
    t_setup = time.perf_counter() - t0
    t0 = time.perf_counter()
    trace = run_scheme(setup.problem, cfg.scheme, cfg.resolved_sigma(), cfg.N, cfg.init,
                       cfg.resolved_m())
    t_run = time.perf_counter() - t0
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_solution_csv(setup.mesh, trace.w_final, out / "solution.csv")
    report = {"config": _resolved(setup),
              "timings": {"setup_s": t_setup, "run_s": t_run},
              "cg_iterations": trace.cg_iterations,
              "l2_norms": trace.l2_norms,
              "energies": trace.energies}
    if args.compare:
        ref = compute_reference(cfg, setup)
        report["epsilon1"] = relative_error(trace.w_final, ref, setup.system.M)
        report["epsilon2"] = relative_error(trace.w_final, ref, setup.h1_matrix)
        print(f"eps1 = {report['epsilon1']:.6e}  eps2 = {report['epsilon2']:.6e}")
    _write_json(out / "report.json", report)
    print(f"wrote {out / 'solution.csv'} and {out / 'report.json'}")
    return EXIT_OK


def cmd_reference(args) -> int:
    cfg = config_from_args(args)
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    compute_reference(cfg, setup, refresh=args.refresh)
    print(f"reference ready (n={cfg.n}, alpha={cfg.alpha}, nref={cfg.nref}) "
          f"in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = config_from_args(args)
    Ns = _parse_list(args.N_list, int)
    sigmas = _parse_list(args.sigma_list, str)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = Path(args.csv) if args.csv else out / "convergence.csv"
    t0 = time.perf_counter()
    setup = build_setup(cfg) if (Ns and sigmas) else None
    rows = convergence_sweep(cfg, Ns, sigmas, setup=setup)
    csv_path.write_text(convergence_csv(rows))
    meta = {"config": _resolved(setup) if setup else {k: getattr(cfg, k) for k in _FIELDS},
            "N_list": Ns, "sigma_list": sigmas,
            "runs": [r.metadata() for r in rows],
            "timings": {"total_s": time.perf_counter() - t0}}
    _write_json(csv_path.with_suffix(".json"), meta)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from .checks import run_checks

    cfg = config_from_args(args, n=8)
    results = run_checks(cfg)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_spectrum(args) -> int:
    from .oracle import dense_generalized_eig, write_spectrum_csv

    cfg = config_from_args(args, n=8)
    setup = build_setup(cfg)
    e = dense_generalized_eig(setup.system.K, setup.system.M)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(args.csv) if args.csv else out / "spectrum.csv"
    write_spectrum_csv(e, path)
    print(f"wrote {len(e)} eigenvalues to {path} (lambda_1 = {e.lambdas[0]:.10g})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraccauchy", description=(
        "Solve A^alpha v = psi through the pseudo-time Cauchy problem with two- and "
        "three-level weighted schemes."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one run; writes solution CSV and report JSON")
    _common(p)
    p.add_argument("--compare", action="store_true", help="also report eps1/eps2 vs reference")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reference", help="build or refresh the cached reference solution")
    _common(p)
    p.add_argument("--refresh", action="store_true", help="recompute even if cached")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("convergence", help="sigma x N sweep to CSV")
    _common(p)
    p.add_argument("--N-list", dest="N_list", default="16,32,64,128")
    p.add_argument("--sigma-list", dest="sigma_list", default="0.5,opt,1.0")
    p.add_argument("--csv", help="output CSV path (default <out>/convergence.csv)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("oracle-check", help="small-mesh invariant suite against the dense oracle")
    _common(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("spectrum", help="dump generalized eigenvalues of (K, M)")
    _common(p)
    p.add_argument("--csv", help="output CSV path (default <out>/spectrum.csv)")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidDelta as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
