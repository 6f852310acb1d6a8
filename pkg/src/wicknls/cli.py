"""Command line runner: one subcommand per experiment, outputs tagged with the config hash."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import BudgetError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET = 0, 1, 2


def _set_threads(n: int) -> None:
    import warnings

    import numba

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _out(cfg: ExperimentConfig, name: str) -> Path:
    return Path(cfg.out) / name


def cmd_enumerate(cfg: ExperimentConfig, args) -> dict:
    from .combinatorics import enumerate_couples, enumerate_regular_couples
    from .io import write_json

    order = cfg.order if args.order is None else args.order
    if order < 0:
        raise ValidationError("order: must be non-negative")
    couples = (enumerate_regular_couples if args.regular else enumerate_couples)(order, limit=args.limit)
    report = {"order": order, "regular": bool(args.regular), "count": len(couples),
              "couples": [c.encode() for c in couples]}
    write_json(_out(cfg, f"enumerate_order{order}{'_regular' if args.regular else ''}.json"), report, cfg.hash())
    print(f"{'regular ' if args.regular else ''}couples of order {order}: {len(couples)}")
    return report


def cmd_count_lattice(cfg: ExperimentConfig, args) -> list[dict]:
    from .combinatorics import enumerate_couples
    from .decorations import LatticeSpec, count_quasi_resonant, nonregular_order2_couple
    from .io import write_csv

    d = cfg.d
    reg, non = enumerate_couples(1)[0], nonregular_order2_couple()
    rows = []
    for L in cfg.L_sweep:
        spec = LatticeSpec(L, d, cfg.radius or 1.0)
        gamma = float(L) ** cfg.alpha
        a = count_quasi_resonant(reg, cfg.k, spec, gamma=gamma)
        b = count_quasi_resonant(non, cfg.k, spec, gamma=gamma)
        rows.append({"L": float(L), "gamma": gamma, "regular_count": int(a), "nonregular_count": int(b),
                     "regular_normalized": a / L ** (2 * d - cfg.alpha),
                     "nonregular_normalized": b / L ** (2 * (2 * d - cfg.alpha))})
        print(f"L={L:g}: order-1 {a} ({rows[-1]['regular_normalized']:.4f}), "
              f"non-regular {b} ({rows[-1]['nonregular_normalized']:.4f})")
    write_csv(_out(cfg, "count_lattice.csv"), rows, cfg.hash())
    return rows


def cmd_theta(cfg: ExperimentConfig, args) -> list[dict]:
    from .io import write_csv
    from .timeorder import OrderedForest, decay_bound, theta

    rng = np.random.default_rng(cfg.seed)
    rows = []
    for n in range(1, max(cfg.order, 1) + 1):
        for shape, G in (("chain", OrderedForest.chain(n)), ("antichain", OrderedForest.antichain(n))):
            omega = rng.uniform(-2.0, 2.0, n)
            val = complex(theta(G, omega)(cfg.t))
            rows.append({"n": n, "shape": shape, "t": cfg.t, "omega": omega.tolist(), "re": val.real,
                         "im": val.imag, "abs": abs(val), "decay_bound": decay_bound(G, omega, cfg.t)})
    write_csv(_out(cfg, "theta.csv"), rows, cfg.hash())
    for r in rows:
        print(f"n={r['n']} {r['shape']:9s} |theta|={r['abs']:.6g} bound={r['decay_bound']:.6g}")
    return rows


def cmd_osc_converge(cfg: ExperimentConfig, args) -> list[dict]:
    from .io import write_csv
    from .oscillatory import convergence_sweep

    rows = convergence_sweep(tuple(int(L) for L in cfg.L_sweep), (cfg.alpha,))
    write_csv(_out(cfg, "osc_converge.csv"), rows, cfg.hash())
    for r in rows:
        print(f"L={r['L']} alpha={r['alpha']}: error {r['abs_error']:.6g}")
    return rows


def cmd_spectrum(cfg: ExperimentConfig, args) -> list[dict]:
    from .combinatorics import enumerate_regular_couples
    from .io import write_csv
    from .spectra import finite_L_spectrum, kinetic_limit_spectrum

    profile = cfg.profile.build()
    quad = cfg.quadrature.build()
    k = np.asarray(cfg.k, float)
    rows = []
    for c in enumerate_regular_couples(cfg.order):
        limit = float(kinetic_limit_spectrum(c, cfg.t, k, profile, quad))
        for L in cfg.L_sweep:
            val = finite_L_spectrum(c, cfg.t / cfg.lam(L) ** 2, k, L, cfg.alpha, profile, radius=cfg.radius,
                                    max_decorations=1e8)
            rows.append({"couple": c.encode(), "L": float(L), "t": cfg.t, "finite_re": val.real,
                         "finite_im": val.imag, "kinetic": limit, "abs_error": abs(val - limit)})
            print(f"{c.encode()} L={L:g}: finite {val.real:.6g} kinetic {limit:.6g}")
    write_csv(_out(cfg, "spectrum.csv"), rows, cfg.hash())
    return rows


def cmd_kinetic_solve(cfg: ExperimentConfig, args) -> dict:
    from .io import save_trajectory, slice_rows, write_csv
    from .kinetic import KGrid, initial_E, initial_W, solve

    profile = cfg.profile.build()
    g = cfg.grid
    regime = cfg.regime
    inhom = regime != "homogeneous"
    grid = KGrid(cfg.d, g.k_max, g.m, g.x_extent if inhom else None, g.x_points if inhom else None,
                 g.zeta_extent, g.zeta_points)
    state0 = initial_E(profile, grid) if cfg.variant == "E" else initial_W(profile, grid)
    traj = solve(state0, cfg.T, cfg.dt, cfg.scheme, regime, cfg.quadrature.build())
    npz, side = save_trajectory(_out(cfg, f"trajectory_{cfg.variant}"), traj, cfg.hash())
    write_csv(_out(cfg, f"trajectory_{cfg.variant}_slice.csv"), slice_rows(traj), cfg.hash())
    print(f"{cfg.variant} trajectory ({regime}) to T={cfg.T}: {len(traj.times)} states -> {npz}")
    return {"npz": str(npz), "sidecar": str(side)}


def cmd_mc_validate(cfg: ExperimentConfig, args) -> dict:
    from .io import write_json
    from .montecarlo import wick_crosscheck

    profile = cfg.profile.build()
    L = cfg.L_sweep[0]
    k_prime = cfg.k if args.k_prime is None else tuple(args.k_prime)
    n_prime = cfg.order if args.order_prime is None else args.order_prime
    rep = wick_crosscheck(cfg.order, n_prime, cfg.t, cfg.k, k_prime, L, cfg.alpha, profile, cfg.nsamples,
                          cfg.seed, cfg.radius)
    write_json(_out(cfg, "mc_validate.json"), rep.to_dict(), cfg.hash())
    print(f"MC {rep.mc_estimate:.6g} +- {rep.stderr:.3g}, diagrammatic {rep.diagrammatic:.6g}, z = {rep.z_score:.2f}")
    return rep.to_dict()


def cmd_acceptance(cfg: ExperimentConfig, args) -> dict:
    from .acceptance import run_all
    from .io import write_json

    results = run_all(args.criteria)
    report = {"criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail}
                           for r in results],
              "all_passed": all(r.passed for r in results)}
    write_json(_out(cfg, "acceptance.json"), report, cfg.hash())
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return report


COMMANDS: dict[str, Callable] = {
    "enumerate": cmd_enumerate,
    "count-lattice": cmd_count_lattice,
    "theta": cmd_theta,
    "osc-converge": cmd_osc_converge,
    "spectrum": cmd_spectrum,
    "kinetic-solve": cmd_kinetic_solve,
    "mc-validate": cmd_mc_validate,
    "acceptance": cmd_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--threads", type=int, help="worker threads for compiled kernels")
    common.add_argument("--seed", type=int, help="overrides the first configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--alpha", type=float, help="scaling exponent, 0 < alpha < 2")
    common.add_argument("--beta", type=float, help="envelope exponent, beta >= alpha")

    p = argparse.ArgumentParser(prog="wicknls", description="Diagrammatic and kinetic experiments for cubic NLS.")
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("enumerate", parents=[common], help="enumerate couples")
    e.add_argument("--order", type=int)
    e.add_argument("--regular", action="store_true")
    e.add_argument("--limit", type=int, help="refuse to emit more couples than this")
    for name, text in (("count-lattice", "quasi-resonant lattice counts"), ("theta", "time-kernel tables"),
                       ("osc-converge", "oscillatory Riemann-sum sweep"), ("spectrum", "finite-L vs kinetic"),
                       ("kinetic-solve", "kinetic trajectories")):
        sub.add_parser(name, parents=[common], help=text)
    m = sub.add_parser("mc-validate", parents=[common], help="Monte Carlo Wick cross-check")
    m.add_argument("--order-prime", type=int)
    m.add_argument("--k-prime", type=float, nargs="+")
    a = sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    a.add_argument("--criteria", type=int, nargs="+", help="subset of criterion numbers")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"out": args.out, "threads": args.threads, "alpha": args.alpha, "beta": args.beta}
        if args.seed is not None:
            overrides["seeds"] = [args.seed]
        cfg = load_config(args.config, **overrides)
        _set_threads(cfg.threads)
        result = COMMANDS[args.command](cfg, args)
    except ValidationError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except BudgetError as err:
        print(f"budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    if args.command == "acceptance" and not result["all_passed"]:
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "COMMANDS"]
