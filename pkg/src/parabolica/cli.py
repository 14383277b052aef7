"""Command-line front end.

    parabolica kepler span   --alpha A [--mu M]
    parabolica kepler shoot  --alpha A [--mu M] --theta1 T1 --theta2 T2 --l L [--out DIR]
    parabolica kepler action --alpha A [--mu M] --theta1 T1 --theta2 T2 --l L [--out DIR]
    parabolica kepler index  --alpha A [--mu M] [--out DIR]
    parabolica solve CONFIG --R R [--out DIR]
    parabolica continue CONFIG [--out DIR]

Exit codes: 0 success, 2 no arc in the requested rotation class, 3 solver
did not converge or returned Morse index above one, 4 collision at
beta = 0 (the last collision-free candidate is saved), 5 a boundedness
check of the radius schedule failed, 64 bad flags or configuration.

``PARABOLICA_THREADS`` caps the number of BLAS/OpenMP threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_NO_SOLUTION = 2
EXIT_NOT_CONVERGED = 3
EXIT_COLLISION = 4
EXIT_HYPOTHESIS = 5
EXIT_USAGE = 64

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def apply_thread_cap(environ=os.environ) -> int | None:
    raw = environ.get("PARABOLICA_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"PARABOLICA_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise UsageError("PARABOLICA_THREADS must be at least 1")
    for var in _THREAD_VARS:
        environ[var] = str(n)
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="parabolica", description="Parabolic trajectories of the N-centre problem.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("kepler", help="homogeneous one-centre problem")
    k.add_argument("action", choices=["span", "shoot", "action", "index"])
    k.add_argument("--alpha", type=float, required=True)
    k.add_argument("--mu", type=float, default=1.0)
    k.add_argument("--theta1", type=float)
    k.add_argument("--theta2", type=float)
    k.add_argument("--l", type=int, default=0)
    k.add_argument("--out", type=Path, default=Path("."))
    k.add_argument("--samples", type=int, default=2048)

    s = sub.add_parser("solve", help="fixed-endpoint solution at one radius")
    s.add_argument("config", type=Path)
    s.add_argument("--R", type=float, required=True)
    s.add_argument("--out", type=Path)

    c = sub.add_parser("continue", help="solutions along the configured radius schedule")
    c.add_argument("config", type=Path)
    c.add_argument("--out", type=Path)
    return p


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# kepler


def cmd_kepler(args) -> int:
    import numpy as np

    from . import kepler as kp
    from .config import write_toml
    from .errors import DegenerateEndpoints, NoSolutionInClass

    try:
        problem = kp.HomogeneousProblem(args.mu, args.alpha)
        kp.index_counters(args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    i, i_star = kp.index_counters(args.alpha)
    summary = {"alpha": args.alpha, "mu": args.mu, "i": i, "i_star": i_star, "action_bound": kp.action_bound(problem)}
    if args.action == "span":
        span = kp.entire_span(problem)
        print(_fmt(span))
        summary["span"] = span
        return EXIT_OK
    if args.action == "index":
        idx, L = kp.perpendicular_index_search(problem, target=None)
        summary.update(perpendicular_index=idx, L=L)
        print(f"i={i} i_star={i_star} perpendicular_index={idx} L={_fmt(L)}")
        args.out.mkdir(parents=True, exist_ok=True)
        write_toml(summary, args.out / "kepler_index.toml")
        return EXIT_OK
    if args.theta1 is None or args.theta2 is None:
        raise UsageError(f"kepler {args.action} needs --theta1 and --theta2")
    try:
        arc = kp.shoot(problem, args.theta1, args.theta2, args.l, n_samples=args.samples)
    except NoSolutionInClass as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except DegenerateEndpoints as exc:
        raise UsageError(str(exc)) from exc
    action = kp.action_of_arc(arc)
    summary.update(
        span=kp.entire_span(problem),
        theta1=args.theta1,
        theta2=args.theta2,
        l=args.l,
        c=arc.angular_momentum,
        action=action,
        energy_residual=float(np.max(np.abs(arc.energy_residual))),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    arc.to_csv(args.out / "kepler_arc.csv")
    write_toml(summary, args.out / "kepler_summary.toml")
    if args.action == "action":
        print(f"action={_fmt(action)} bound={_fmt(summary['action_bound'])}")
    else:
        print(f"c={_fmt(arc.angular_momentum)} action={_fmt(action)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve / continue


def _load(path):
    from .config import load_run_config
    from .errors import InvalidConfiguration

    try:
        return load_run_config(path)
    except (OSError, InvalidConfiguration) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _record_doc(rec, config, constants) -> dict:
    from .continuation import diagnostics

    doc = {"record": rec.summary(), "critical_point": rec.critical_point.summary()}
    rep = diagnostics(rec, config, constants)
    doc["diagnostics"] = {
        "lagrange_jacobi": rep.lagrange_jacobi,
        "angular_momentum": rep.angular_momentum,
        "travel_time": rep.travel_time,
        "s_variation": rep.s_variation,
        "worst": rep.worst,
    }
    return doc


def cmd_solve(args) -> int:
    from . import continuation as ct
    from . import potential as pot
    from .config import write_toml, write_trajectory_csv
    from .errors import CollisionEncountered, IndexViolation, NotConverged

    rc = _load(args.config)
    out = args.out or rc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    constants = pot.certify_constants(rc.problem)
    if args.R <= constants.K:
        raise UsageError(f"--R must exceed K = {constants.K!r}")
    try:
        rec = ct.solve_at_R(rc.problem, rc.xi_plus, rc.xi_minus, args.R, rc.solver, constants)
    except CollisionEncountered as exc:
        cand = exc.candidate
        doc = {"error": str(exc), "generalized_candidate": True}
        if cand is not None:
            doc["critical_point"] = cand.summary()
            doc["path"] = cand.path.to_dict()
        write_toml(doc, out / "candidate.toml")
        print(f"collision: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except (NotConverged, IndexViolation) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    write_trajectory_csv(rec.trajectory, out / "trajectory.csv", rc.problem)
    doc = _record_doc(rec, rc.problem, constants)
    doc["config"] = rc.to_dict()
    doc["constants"] = {k: v for k, v in constants.to_dict().items() if k != "certificate"}
    write_toml(doc, out / "solution.toml")
    write_toml({"path": rec.critical_point.path.to_dict()}, out / "critical_path.toml")
    print(f"R={_fmt(rec.R)} action={_fmt(rec.action)} index={rec.morse_index} "
          f"energy_residual={rec.energy_residual:.3e} min_distance={min(rec.min_centre_distances):.6g}")
    ok = rec.morse_index <= 1 and min(rec.min_centre_distances) > rc.solver.collision_threshold
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_continue(args) -> int:
    from . import continuation as ct
    from . import potential as pot
    from .config import write_csv, write_toml, write_trajectory_csv
    from .errors import CollisionEncountered, IndexViolation, InsufficientTail, NotConverged

    rc = _load(args.config)
    out = args.out or rc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    constants = pot.certify_constants(rc.problem)
    radii = rc.schedule(constants.K)
    if not radii:
        raise UsageError("the configuration has no [schedule]")
    try:
        records, report = ct.run_schedule(rc.problem, rc.xi_plus, rc.xi_minus, radii, rc.solver, constants,
                                          raise_on_violation=False)
    except CollisionEncountered as exc:
        print(f"collision: {exc}", file=sys.stderr)
        return EXIT_COLLISION
    except (NotConverged, IndexViolation) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    per_R = []
    for k, rec in enumerate(records):
        write_trajectory_csv(rec.trajectory, out / f"trajectory_{k:02d}.csv", rc.problem)
        doc = _record_doc(rec, rc.problem, constants)
        for side in ("-", "+"):
            try:
                fit = ct.asymptotic_fit(rec, side=side)
                doc[f"asymptotic_fit_{'minus' if side == '-' else 'plus'}"] = {
                    "exponent": fit.exponent,
                    "prefactor": fit.prefactor,
                    "residual": fit.residual,
                    "window": list(fit.window),
                    "direction": fit.direction,
                    "s_variation": fit.s_variation,
                }
            except InsufficientTail as exc:
                logging.getLogger(__name__).warning("R=%g: %s", rec.R, exc)
        per_R.append(doc)
    write_csv(out / "records.csv", ["R", "action", "omega_R", "min_radius", "min_centre_distance", "t_minus", "t_plus",
                                    "morse_index", "energy_residual"],
              [[r.R for r in records], [r.action for r in records], [r.omega_R for r in records],
               [r.min_radius for r in records], [min(r.min_centre_distances) for r in records],
               [r.t_minus for r in records], [r.t_plus for r in records], [r.morse_index for r in records],
               [r.energy_residual for r in records]])
    scaling = ct.level_scaling(records, rc.problem)
    write_toml({"records": per_R, "hypotheses": {"checks": report.checks, **report.series()}, "scaling": scaling,
                "config": rc.to_dict()}, out / "report.toml")
    for name, ok in report.checks.items():
        print(f"{name}: {'ok' if ok else 'VIOLATED'}")
    if not scaling.get("skipped"):
        print(f"slope={_fmt(scaling['fitted_slope'])} theory={_fmt(scaling['theory_slope'])}")
    if not report.ok:
        print("hypothesis violated; series written to report.toml", file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        apply_thread_cap()
        handler = {"kepler": cmd_kepler, "solve": cmd_solve, "continue": cmd_continue}[args.command]
        return handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"parabolica: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
