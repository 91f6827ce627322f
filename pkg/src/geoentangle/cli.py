"""
Command-line interface.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure,
3 invariant or validation failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import geoent, harness, imps, models, oracle
from .errors import CanonicalViolation, GeoEntError, InvalidInput, InvariantViolation, IoError

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("block sizes must be positive")
    return values


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def cmd_gs(args):
    model = models.make_model(args.model, args.h)
    opts = models.ITEBDOptions(chi_max=args.chi)
    mps, info = models.itebd_ground_state(model, opts, seed=args.seed, return_info=True)
    imps.save_imps(mps, args.out)
    print(f"energy per site   {info['energy']:.12f}")
    print(f"bond dimension    {mps.chi}")
    print(f"lambda1           {mps.lam[0]:.12f}")
    print(f"saved             {args.out}")
    return EXIT_OK


def cmd_analyze(args):
    mps = imps.load_imps(args.state)
    nu2 = geoent.second_eigenvalue_modulus(mps)
    print(f"chi               {mps.chi}")
    print(f"lambda1           {mps.lam[0]:.12f}")
    print(f"|nu2|             {nu2:.12f}")
    try:
        print(f"xi                {geoent.correlation_length(mps, nu2):.10f}")
        print(f"E_asym            {geoent.geoent_asymptotic(mps, nu2):.12f}")
    except GeoEntError as err:
        print(f"xi                n/a ({err})")
    for L in args.L:
        print(f"{f'E1(L={L})':18s}{geoent.single_copy(mps, L, imps.reduced_density_spectrum(mps, L)):.12f}")
    return EXIT_OK


def cmd_geoent(args):
    mps = imps.load_imps(args.state)
    res = geoent.geoent_finite(mps, args.L, starts=args.starts, seed=args.seed)
    print(f"E                 {res.E:.12f}")
    print(f"max |r^+ B r|     {res.d_max_abs:.12f}")
    print(f"converged         {res.converged}")
    print(f"iterations        {res.iterations}")
    print(f"best start        {res.start_index} of {res.starts_used}")
    if res.radius_mismatch:
        print(f"spectral radius   {res.spectral_radius:.12f} (differs from the numerical radius)")
    return EXIT_OK


def cmd_sweep(args):
    if args.points < 2:
        raise InvalidInput("--points must be at least 2")
    h_list = np.linspace(args.h_min, args.h_max, args.points)
    records, fit = harness.sweep_offcritical(args.model, h_list, args.chi, seed=args.seed, finite=not args.no_finite)
    paths = harness.emit_report(records, fit, args.out_dir, mode="offcritical")
    print(f"c_est = {fit.c_est:.6f}  r2 = {fit.r2:.6f}  points = {fit.n_points}")
    for key in sorted(paths):
        print(f"wrote {paths[key]}")
    return EXIT_OK


def cmd_critical(args):
    records, fit, violations = harness.critical_scan(
        args.model, args.L_list, args.chi, seed=args.seed, finite=not args.no_finite
    )
    paths = harness.emit_report(records, fit, args.out_dir, violations=violations, mode="critical")
    for r in records:
        flag = "  saturated" if r.saturated else ""
        fin = "" if r.E_finite is None else f"  E_finite = {r.E_finite:.10f}"
        print(f"L = {r.L:4d}  E1 = {r.E1:.10f}{fin}{flag}")
    if fit is None:
        print("fit refused: fewer than two unsaturated block sizes")
    else:
        print(f"c_est = {fit.c_est:.6f}  r2 = {fit.r2:.6f}  points = {fit.n_points}")
    print(f"bound violations = {violations}")
    for key in sorted(paths):
        print(f"wrote {paths[key]}")
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_verify(args):
    checks = harness.run_verify(corpus_seed=args.corpus_seed, n_states=args.states)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name:40s} cases={c.cases:4d} violations={c.violations:4d} worst excess={c.worst:.3g}")
        for line in c.details:
            print(f"      {line}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT


def cmd_oracle_check(args):
    model = models.make_model(args.model, args.h)
    state = oracle.ed_ground_state(model, args.N)
    bf = oracle.brute_force_ge(state, args.L, starts=args.starts, seed=args.seed)
    print(f"ED energy per site       {state.energy / args.N:.12f}")
    print(f"E per block (dense)      {bf.E_per_block:.12f}")
    if bf.grid_overlap_sq is not None:
        print(f"grid overlap             {bf.grid_overlap_sq:.12f}")
    print(f"solver overlap           {bf.best_overlap_sq:.12f}")
    if args.chi:
        mps = harness.ground_state(args.model, args.h, args.chi, args.seed)
        inf = geoent.geoent_finite(mps, args.L, starts=args.starts, seed=args.seed)
        print(f"E per block (infinite)   {inf.E:.12f}")
        print(f"relative difference      {abs(bf.E_per_block - inf.E) / max(inf.E, 1e-300):.4f}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="geoentangle", description="Geometric entanglement of infinite matrix product states.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gs", help="iTEBD ground state saved as JSON")
    s.add_argument("--model", default="tfim", choices=sorted(models.MODELS))
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--chi", type=_positive_int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gs)

    s = sub.add_parser("analyze", help="correlation length, lambda1, E_asym and E1 of a saved state")
    s.add_argument("--state", required=True)
    s.add_argument("--L", type=_int_list, default=[1, 2, 4], help="comma-separated block sizes")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("geoent", help="geometric entanglement per block of a saved state")
    s.add_argument("--state", required=True)
    s.add_argument("--L", type=_positive_int, required=True)
    s.add_argument("--starts", type=_positive_int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_geoent)

    s = sub.add_parser("sweep", help="off-critical sweep and central-charge fit")
    s.add_argument("--model", default="tfim", choices=sorted(models.MODELS))
    s.add_argument("--h-min", type=float, required=True)
    s.add_argument("--h-max", type=float, required=True)
    s.add_argument("--points", type=int, default=5)
    s.add_argument("--chi", type=_positive_int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-finite", action="store_true", help="skip the finite-L double maximisation")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("critical", help="critical scan of E1 and E against L")
    s.add_argument("--model", default="tfim", choices=sorted(models.MODELS))
    s.add_argument("--chi", type=_positive_int, default=64)
    s.add_argument("--L-list", type=_int_list, default=[4, 8, 16, 32])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-finite", action="store_true", help="skip the finite-L double maximisation")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("verify", help="run the invariant corpus")
    s.add_argument("--corpus-seed", type=int, default=0)
    s.add_argument("--states", type=_positive_int, default=100, help="number of random states")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("oracle-check", help="compare with exact diagonalisation of a finite ring")
    s.add_argument("--model", default="tfim", choices=sorted(models.MODELS))
    s.add_argument("--N", type=_positive_int, required=True)
    s.add_argument("--L", type=_positive_int, default=1)
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--starts", type=_positive_int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--chi", type=int, default=0, help="also compute the infinite-chain value at this bond dimension")
    s.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvariantViolation, CanonicalViolation) as err:
        print(f"invariant violated: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InvalidInput, IoError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except GeoEntError as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
