"""Command-line front end.

Subcommands::

    analyze            full spectral pipeline -> analysis.json (+ TV curve CSV)
    verify-hypothesis  continuity and reachability audits with verdicts
    yaglom             conditioned-law TV curve and rate fit
    simulate           Monte Carlo estimates with standard errors
    lobo               exact vs predicted leading term of cumulative sums
    fixtures           regenerate oracle fixtures and bundled spec files

``--spec`` accepts either a bundled name (see ``qsdlab.registry``) or a path
to a spec JSON file.  ``--seed`` falls back to the QSDLAB_SEED environment
variable, then to 0.  With ``--canonical`` the timestamp field is omitted so
repeated runs are byte-identical.

Exit codes: 0 success, 2 validation/schema error, 3 numerical refusal.
"""

import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import registry, specfile
from .errors import NumericalError, ValidationError
from .kernels import build_operator, check_h1_modulus, check_h2_reachability
from .measures import tv_distance
from .oracle import FiniteChain, fixture_dict, lobo_leading_term, lobo_sum
from .qsd import (
    cesaro_fit,
    cyclic_components,
    fit_yaglom_rate,
    mass_decay_check,
    quasi_ergodic_measure,
    quasi_stationary_measure,
)
from .errors import NeverSubunit, NotApplicable
from .simulate import estimate_birkhoff, estimate_yaglom
from .spectral import PERIPHERAL_TOL_DEFAULT, peripheral_spectrum

SCHEMA_VERSION = 1


def _resolve_spec(value, grid_size=None):
    try:
        return registry.get_spec(value, grid_size=grid_size)
    except KeyError:
        pass
    spec = specfile.load_spec(value)
    if grid_size and not spec.is_explicit:
        spec = specfile.spec_from_dict(
            {**specfile.spec_to_dict(spec), "grid_size": grid_size})
    return spec


def _seed_from(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QSDLAB_SEED")
    return int(env) if env else 0


def _write_json(doc, path, canonical):
    if not canonical:
        doc = {**doc, "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    with open(path, "w") as fp:
        json.dump(doc, fp, indent=2, sort_keys=True)
        fp.write("\n")


def _write_curve(path, rows):
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(["n", "tv"])
        for n, tv in rows:
            w.writerow([int(n), repr(float(tv))])


def _rate_doc(fit):
    return {"model": fit.model, "rate": fit.fitted_rate,
            "constant": fit.fitted_constant, "r2": fit.r_squared,
            "passed": fit.passed}


def _analysis_doc(spec, op, sd, args):
    mu, lam = quasi_stationary_measure(sd)
    eta = quasi_ergodic_measure(sd)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "spec": specfile.spec_to_dict(spec),
        "lambda": lam,
        "m": sd.period_m,
        "subdominant_radius": sd.subdominant_radius,
        "escape_indices": sorted(op.escape.indices),
        "qsd": mu.tolist(),
        "qed": eta.tolist(),
        "classes": None,
        "rates": {},
        "decay": {},
    }
    keep = op.nonescape_indices()
    # generic start: off-center, so symmetric kernels do not annihilate the
    # odd modes (a center start can reach the limit law in one step)
    nu0 = np.zeros(op.size)
    nu0[keep[len(keep) // 4]] = 1.0
    n_max = args.n_max or (200 if spec.is_explicit else 120)
    if sd.period_m == 1:
        fit = fit_yaglom_rate(op, nu0, n_max=n_max, sd=sd)
        doc["rates"]["yaglom"] = _rate_doc(fit)
    else:
        part = cyclic_components(sd, op)
        doc["classes"] = [list(c) for c in part.classes]
        nu0 = np.zeros(op.size)
        nu0[part.classes[0][0]] = 1.0
        fit = cesaro_fit(op, nu0, n_max=n_max, sd=sd, partition=part)
        doc["rates"]["cesaro"] = _rate_doc(fit)
    try:
        decay = mass_decay_check(op, n_max=min(n_max, 60))
        doc["decay"] = {"n0": decay.n0, "alpha": decay.alpha, "never_subunit": False}
    except NeverSubunit:
        doc["decay"] = {"n0": None, "alpha": None, "never_subunit": True}
    return doc, fit


def cmd_analyze(args):
    spec = _resolve_spec(args.spec, args.grid_size)
    op = build_operator(spec)
    sd = peripheral_spectrum(op, peripheral_tol=args.peripheral_tol)
    doc, fit = _analysis_doc(spec, op, sd, args)
    os.makedirs(args.out, exist_ok=True)
    _write_json(doc, os.path.join(args.out, "analysis.json"), args.canonical)
    _write_json({"schema_version": SCHEMA_VERSION, **sd.to_json_dict()},
                os.path.join(args.out, "spectral.json"), args.canonical)
    _write_curve(os.path.join(args.out, "tv_curve.csv"), fit.data)
    return 0


def cmd_verify_hypothesis(args):
    spec = _resolve_spec(args.spec, args.grid_size)
    op = build_operator(spec)
    reach = check_h2_reachability(op)
    try:
        rep = check_h1_modulus(spec)
        h1 = {"verdict": rep.verdict,
              "deltas": rep.deltas.tolist(),
              "sup_distances": rep.sup_distances.tolist(),
              "probes": rep.probes, "grid_step": rep.grid_step}
    except NotApplicable:
        h1 = {"verdict": "INDETERMINATE",
              "note": "finite chains have no density to probe"}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "spec": specfile.spec_to_dict(spec),
        "h1": h1,
        "h2": {
            "verdict": reach.verdict,
            "strongly_connected": reach.strongly_connected,
            "n_components": reach.n_components,
            "graph_period": reach.graph_period,
            "escape_indices": list(reach.escape_indices),
            "nonescape_mass_positive": reach.nonescape_mass_positive,
        },
    }
    os.makedirs(args.out, exist_ok=True)
    _write_json(doc, os.path.join(args.out, "hypothesis_report.json"), args.canonical)
    return 0


def cmd_yaglom(args):
    spec = _resolve_spec(args.spec, args.grid_size)
    op = build_operator(spec)
    sd = peripheral_spectrum(op, peripheral_tol=args.peripheral_tol)
    keep = op.nonescape_indices()
    nu0 = np.zeros(op.size)
    nu0[keep[len(keep) // 4]] = 1.0
    n_max = args.n_max or (200 if spec.is_explicit else 120)
    if sd.period_m == 1:
        fit = fit_yaglom_rate(op, nu0, n_max=n_max, sd=sd)
    else:
        fit = cesaro_fit(op, nu0, n_max=n_max, sd=sd)
    doc = {"schema_version": SCHEMA_VERSION, "spec": specfile.spec_to_dict(spec),
           "rate_fit": _rate_doc(fit)}
    os.makedirs(args.out, exist_ok=True)
    _write_json(doc, os.path.join(args.out, "yaglom.json"), args.canonical)
    _write_curve(os.path.join(args.out, "tv_curve.csv"), fit.data)
    return 0


def cmd_simulate(args):
    spec = _resolve_spec(args.spec, args.grid_size)
    op = build_operator(spec)
    sd = peripheral_spectrum(op, peripheral_tol=args.peripheral_tol)
    mu, lam = quasi_stationary_measure(sd)
    seed = _seed_from(args)
    n = args.n
    if args.x0 is not None:
        x0 = args.x0
    else:
        x0 = 0 if spec.is_explicit else float(np.mean(spec.domain))
    if spec.is_explicit:
        x0 = int(x0)

    rows = []
    est = estimate_yaglom(spec, x0, n, args.n_paths, seed=seed,
                          lam_hint=lam, grid=op.grid)
    tv = tv_distance(est.value, mu)
    rows.append(["yaglom_histogram", n, args.n_paths, est.effective_samples,
                 ";".join(repr(float(v)) for v in est.value), repr(est.stderr)])
    rows.append(["yaglom_tv_vs_qsd", n, args.n_paths, est.effective_samples,
                 repr(tv), repr(est.stderr)])

    if spec.is_explicit:
        k = min(1, op.size - 1)
        h = lambda s: (s == k).astype(float)
        h_label = f"state:{k}"
    else:
        h = lambda y: y
        h_label = "y"
    est_b = estimate_birkhoff(spec, x0, n, h, args.n_paths, seed=seed, lam_hint=lam)
    rows.append([f"birkhoff_average[{h_label}]", n, args.n_paths,
                 est_b.effective_samples, repr(est_b.value), repr(est_b.stderr)])

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "estimates.csv"), "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(["kind", "n", "n_paths", "survivors", "value", "stderr"])
        w.writerows(rows)
    return 0


def cmd_lobo(args):
    spec = _resolve_spec(args.spec, args.grid_size)
    if not spec.is_explicit:
        raise ValidationError("the exact cumulative-sum table needs an explicit chain")
    chain = FiniteChain(Q=np.asarray(spec.params["matrix"], dtype=float))
    h = np.zeros(chain.size)
    h[args.h_state] = 1.0
    ns = [int(v) for v in args.n_list.split(",")]
    rows = []
    for n in ns:
        exact = lobo_sum(chain, h, args.x0 or 0, n)
        pred = lobo_leading_term(chain, h, args.x0 or 0, n)
        rows.append({"n": n, "exact": exact, "predicted": pred,
                     "ratio": exact / pred if pred else float("nan")})
    doc = {"schema_version": SCHEMA_VERSION, "spec": specfile.spec_to_dict(spec),
           "h_state": args.h_state, "x0": args.x0 or 0, "table": rows}
    os.makedirs(args.out, exist_ok=True)
    _write_json(doc, os.path.join(args.out, "lobo_table.json"), args.canonical)
    with open(os.path.join(args.out, "lobo_table.csv"), "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(["n", "exact", "predicted", "ratio"])
        for r in rows:
            w.writerow([r["n"], repr(r["exact"]), repr(r["predicted"]), repr(r["ratio"])])
    return 0


def cmd_fixtures(args):
    os.makedirs(args.out, exist_ok=True)
    for name in ("sym2", "cycle2", "cycle3", "ds3"):
        spec = registry.get_spec(name)
        chain = FiniteChain(Q=np.asarray(spec.params["matrix"], dtype=float))
        _write_json(fixture_dict(name, chain),
                    os.path.join(args.out, f"{name}.json"), canonical=True)
    for name in registry.builtin_names():
        specfile.dump_spec(registry.get_spec(name),
                           os.path.join(args.out, f"{name}.spec.json"))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="qsdlab",
                                description="conditioned-measure toolkit for absorbed chains")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_spec=True):
        if needs_spec:
            sp.add_argument("--spec", required=True,
                            help="bundled name or path to a spec JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--grid-size", type=int, default=None)
        sp.add_argument("--n-max", type=int, default=None)
        sp.add_argument("--n-paths", type=int, default=10 ** 5)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--peripheral-tol", type=float, default=PERIPHERAL_TOL_DEFAULT)
        sp.add_argument("--canonical", action="store_true",
                        help="omit the timestamp so outputs are byte-identical")

    sp = sub.add_parser("analyze", help="spectral pipeline report")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("verify-hypothesis", help="continuity/reachability audits")
    common(sp)
    sp.set_defaults(func=cmd_verify_hypothesis)

    sp = sub.add_parser("yaglom", help="conditioned-law TV curve and rate fit")
    common(sp)
    sp.set_defaults(func=cmd_yaglom)

    sp = sub.add_parser("simulate", help="Monte Carlo cross-check")
    common(sp)
    sp.add_argument("--n", type=int, default=10, help="time horizon")
    sp.add_argument("--x0", type=float, default=None, help="starting point/state")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("lobo", help="exact vs predicted cumulative-sum table")
    common(sp)
    sp.add_argument("--n-list", default="60,120,240")
    sp.add_argument("--x0", type=int, default=0)
    sp.add_argument("--h-state", type=int, default=0,
                    help="state whose indicator is the summed test function")
    sp.set_defaults(func=cmd_lobo)

    sp = sub.add_parser("fixtures", help="regenerate oracle fixtures and bundled specs")
    common(sp, needs_spec=False)
    sp.set_defaults(func=cmd_fixtures)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
