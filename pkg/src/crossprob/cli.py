"""Command-line surface: probabilities, curve tabulation, simulation,
and the self-verification suite.

Exit codes: 0 success, 1 verification failure, 2 condition or domain
violation, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analytics, montecarlo
from .barriers import (
    HermiteBarrier,
    ImagesLambertBarrier,
    LinearBarrier,
    LogRemainingBarrier,
    SqrtRemainingBarrier,
    TimeInvertedBarrier,
    TwoSidedConstantBarrier,
    TwoSidedCurvedBarrier,
    barrier_from_dict,
    time_invert,
)
from .errors import ConditionError, DomainError
from .measures import (
    barrier_time_grid,
    images_condition_residual,
    verify_barrier_identity,
)
from .special import norm_cdf

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONDITION = 2
EXIT_USAGE = 64

FAMILIES = (
    "linear",
    "sqrt-remaining",
    "log-remaining",
    "hermite",
    "time-inverted",
    "two-sided-constant",
    "two-sided-curved",
    "images-lambert",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_spec(args):
    if getattr(args, "spec", None):
        with open(args.spec, "r", encoding="utf-8") as fh:
            return barrier_from_dict(json.load(fh))
    if not args.family:
        raise DomainError("provide --family or --spec FILE")
    fam = args.family
    T = args.T
    if T is None:
        raise DomainError("--T is required with --family")
    need = {"a": args.a, "b": args.b}
    for key, val in need.items():
        if val is None:
            raise DomainError(f"--{key} is required for family {fam}")
    a, b = args.a, args.b
    if fam == "linear":
        return LinearBarrier(a, b, T)
    if fam == "sqrt-remaining":
        return SqrtRemainingBarrier(a, b, T)
    if fam == "log-remaining":
        return LogRemainingBarrier(a, b, T, mirrored=args.mirrored)
    if fam == "hermite":
        if args.n is None:
            raise DomainError("--n is required for family hermite")
        return HermiteBarrier(a, b, args.n, T)
    if fam == "time-inverted":
        return TimeInvertedBarrier(SqrtRemainingBarrier(a, b, T))
    if fam == "two-sided-constant":
        return TwoSidedConstantBarrier(a, b, T)
    if fam == "two-sided-curved":
        if args.c is None:
            raise DomainError("--c is required for family two-sided-curved")
        return TwoSidedCurvedBarrier(a, b, args.c, T)
    if fam == "images-lambert":
        return ImagesLambertBarrier(a, b, T)
    raise DomainError(f"unknown family {fam!r}")


def _print(args, payload: dict, human: str):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human)


# ---------------------------------------------------------------------------
# prob
# ---------------------------------------------------------------------------


def run_prob(args) -> int:
    spec = _build_spec(args)
    if isinstance(spec, ImagesLambertBarrier):
        res = analytics.images_crossing(spec, start=args.start)
    else:
        res = analytics.crossing_prob(spec, start=args.start)
    payload = {
        "family": spec.family,
        "probability": res.probability,
        "conditions": [{"text": text, "ok": ok} for text, ok in res.conditions],
        "conditions_met": res.conditions_met,
    }
    lines = [f"family: {spec.family}"]
    if res.conditions_met:
        lines.append(f"probability: {res.probability!r}")
    else:
        lines.append("probability: refused (conditions not met)")
    for text, ok in res.conditions:
        lines.append(f"  [{'ok' if ok else 'VIOLATED'}] {text}")
    _print(args, payload, "\n".join(lines))
    return EXIT_OK if res.conditions_met else EXIT_CONDITION


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------


def run_density(args) -> int:
    spec = _build_spec(args)
    curve = analytics.density_curve(spec, args.kind, n=args.points,
                                    t_min=args.t_min, t_max=args.t_max)
    rows = ["t,cdf,pdf"]
    for t, c, p in zip(curve.grid, curve.cdf, curve.pdf):
        rows.append(f"{t:.17g},{c:.17g},{p:.17g}")
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {len(curve.grid)} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mc
# ---------------------------------------------------------------------------


def _analytic_for(spec) -> tuple[float | None, str]:
    if isinstance(spec, ImagesLambertBarrier):
        res = analytics.images_crossing(spec)
        return res.probability, "first-hit probability on [0, horizon]"
    if isinstance(spec, TimeInvertedBarrier):
        edge = montecarlo.INVERTED_WINDOW * spec.horizon
        return (analytics.hitting_cdf_inverted(spec, edge),
                f"hitting CDF at the simulation window edge {edge:g}")
    res = analytics.crossing_prob(spec)
    if res.probability is None:
        return None, "analytic formula refuses for this configuration"
    return res.probability, "crossing probability"


def run_mc(args) -> int:
    spec = _build_spec(args)
    cfg = montecarlo.McConfig(paths=args.paths, steps=args.steps,
                              seed=args.seed, bridge_correction=args.bridge,
                              start=args.start)
    if args.fortet:
        if args.v is None:
            raise DomainError("--fortet requires --v")
        res = montecarlo.mc_fortet_check(spec, v=args.v, u=args.start,
                                         cfg=cfg, workers=args.workers)
        z = ((res.rhs.estimate - res.lhs) / res.rhs.std_error
             if res.rhs.std_error > 0 else 0.0)
        payload = {
            "check": "fortet", "u": args.start, "v": args.v,
            "lhs": res.lhs, "rhs": res.rhs.estimate,
            "std_error": res.rhs.std_error, "z": z,
        }
        human = (f"integral-equation check (u={args.start}, v={args.v})\n"
                 f"  lhs (analytic): {res.lhs!r}\n"
                 f"  rhs (simulated): {res.rhs.estimate!r} "
                 f"+/- {res.rhs.std_error:.3g}\n  z: {z:.3f}")
        _print(args, payload, human)
        return EXIT_OK
    if args.times:
        times = [float(x) for x in args.times.split(",")]
        if isinstance(spec, (TwoSidedConstantBarrier, TwoSidedCurvedBarrier)):
            res = montecarlo.mc_last_outside(spec, cfg, times,
                                             workers=args.workers)
            ana = [analytics.two_sided_sigma_cdf(spec, float(t))
                   for t in res.times]
            rows = [
                {"t": float(t), "sigma_mc": e.estimate,
                 "sigma_se": e.std_error, "sigma_analytic": a}
                for t, e, a in zip(res.times, res.sigma, ana)
            ]
        else:
            res = montecarlo.mc_last_exit(spec, cfg, times,
                                          workers=args.workers)
            rows = []
            for j, t in enumerate(res.times):
                row = {"t": float(t),
                       "sigma_mc": res.sigma[j].estimate,
                       "sigma_se": res.sigma[j].std_error,
                       "sigma_analytic": analytics.sigma_cdf(spec, float(t)),
                       "lambda_mc": res.lam[j].estimate,
                       "lambda_se": res.lam[j].std_error}
                try:
                    row["lambda_analytic"] = analytics.lambda_cdf(spec, float(t))
                except DomainError:
                    row["lambda_analytic"] = None
                rows.append(row)
        payload = {"check": "last-exit", "rows": rows}
        lines = ["last-exit empirical CDFs (times snapped to the step grid)"]
        for row in rows:
            lines.append("  " + json.dumps(row, sort_keys=True))
        _print(args, payload, "\n".join(lines))
        return EXIT_OK

    est = montecarlo.mc_crossing(spec, cfg, workers=args.workers)
    analytic, what = _analytic_for(spec)
    z = None
    if analytic is not None and est.std_error > 0:
        z = (est.estimate - analytic) / est.std_error
    lo, hi = est.ci95
    payload = {
        "family": spec.family, "estimate": est.estimate,
        "std_error": est.std_error, "ci95": [lo, hi],
        "paths": cfg.paths, "steps": cfg.steps, "seed": cfg.seed,
        "bridge_correction": cfg.bridge_correction,
        "analytic": analytic, "analytic_meaning": what, "z": z,
    }
    lines = [
        f"family: {spec.family}",
        f"estimate: {est.estimate!r} +/- {est.std_error:.3g} "
        f"(95% CI [{lo:.6f}, {hi:.6f}])",
        f"paths={cfg.paths} steps={cfg.steps} seed={cfg.seed} "
        f"bridge={'on' if cfg.bridge_correction else 'off'}",
    ]
    if analytic is not None:
        lines.append(f"analytic ({what}): {analytic!r}")
        lines.append(f"z: {z:.3f}")
    else:
        lines.append(f"analytic: unavailable ({what})")
    _print(args, payload, "\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _canonical_certified():
    e = math.e
    return [
        ("linear", LinearBarrier(1.0, 0.5, 1.0)),
        ("sqrt-remaining", SqrtRemainingBarrier(1.0, 1.0, 1.0)),
        ("log-remaining", LogRemainingBarrier(1.5, e, 1.0)),
        ("hermite-n1", HermiteBarrier(1.5, math.sqrt(e), 1, 1.0)),
        ("hermite-n2", HermiteBarrier(2.0, 10.0, 2, 1.0)),
        ("hermite-n3", HermiteBarrier(3.0, 7.0, 3, 2.0)),
    ]


def identity_checks(points: int = 1000) -> list[dict]:
    """Max deviation of the certifying identity from 1 along each barrier,
    plus the pointwise multiplicative condition for the image family."""
    rows = []
    for name, bar in _canonical_certified():
        grid = barrier_time_grid(bar.horizon, points)
        rep = verify_barrier_identity(bar.measure(), bar.value, grid=grid)
        rows.append({
            "check": f"identity:{name}",
            "max_deviation": rep.max_deviation,
            "bounded": rep.bounded,
            "pass": bool(rep.identity_holds and rep.bounded),
        })
    im = ImagesLambertBarrier(1.0, 2.0, 1.0)
    grid = barrier_time_grid(im.horizon, points)
    dev = max(abs(images_condition_residual(im.measure(), im.value, float(t))
                  - 1.0) for t in grid)
    rows.append({"check": "identity:images-lambert", "max_deviation": dev,
                 "bounded": True, "pass": bool(dev < 1e-9)})
    return rows


def exact_identity_checks() -> list[dict]:
    rows = []

    def add(check, dev, tol):
        rows.append({"check": check, "max_deviation": dev, "tol": tol,
                     "pass": bool(dev < tol)})

    # flat barrier: the crossing probability collapses to the reflection
    # value 2 N(-a/sqrt(T))
    dev = 0.0
    for a, T in ((1.0, 1.0), (0.25, 4.0), (2.0, 0.5)):
        p = analytics.crossing_prob(LinearBarrier(a, 0.0, T)).probability
        dev = max(dev, abs(p - 2.0 * norm_cdf(-a / math.sqrt(T))))
    add("reflection-flat-barrier", dev, 1e-14)

    # last-touch density of the zero barrier is the arcsine density for
    # both shipped lambda families
    T = 1.0
    ts = np.linspace(0.01, 0.99, 99)
    dev = 0.0
    for bar in (LinearBarrier(0.0, 0.0, T), SqrtRemainingBarrier(0.0, 0.0, T)):
        for t in ts:
            target = 1.0 / (math.pi * math.sqrt(t * (T - t)))
            dev = max(dev, abs(analytics.lambda_pdf(bar, float(t)) - target))
    add("arcsine-zero-barrier", dev, 1e-13)

    # inversion preserves the total crossing probability
    base = SqrtRemainingBarrier(1.0, 1.0, 1.0)
    inv = time_invert(base)
    dev = abs(analytics.crossing_prob(inv).probability
              - analytics.crossing_prob(base).probability)
    add("time-inversion-probability", dev, 1e-14)

    # double inversion is the identity map on barrier values
    back = time_invert(inv)
    ts = np.linspace(0.0, 1.0, 101)
    dev = float(np.max(np.abs(back.grid(ts) - base.grid(ts))))
    add("double-inversion-involution", dev, 1e-14)

    # curved corridor walls are mirror images around (a+b)/2
    cv = TwoSidedCurvedBarrier(1.0, -1.0, 0.5, 1.0)
    dev = 0.0
    for t in np.linspace(0.0, 1.0, 41):
        g0, g1 = cv.value(float(t))
        dev = max(dev, abs(g0 + g1 - (cv.a + cv.b)))
    add("curved-corridor-symmetry", dev, 1e-12)
    return rows


def fd_checks(h: float = 1e-5, points: int = 20) -> list[dict]:
    """Central finite differences of each CDF against its density."""
    rows = []

    def add(name, pts, cdf, pdf):
        rel = 0.0
        for t in pts:
            fd = (cdf(t + h) - cdf(t - h)) / (2.0 * h)
            p = pdf(t)
            rel = max(rel, abs(fd - p) / max(abs(p), 1e-12))
        rows.append({"check": f"fd:{name}", "max_rel_error": rel,
                     "pass": bool(rel < 1e-5)})

    one_sided = [
        ("linear", LinearBarrier(1.0, 0.5, 1.0)),
        ("sqrt-remaining", SqrtRemainingBarrier(1.0, 1.0, 1.0)),
        ("log-remaining", LogRemainingBarrier(1.5, math.e, 1.0)),
        ("hermite-n2", HermiteBarrier(2.0, 10.0, 2, 1.0)),
    ]
    for name, bar in one_sided:
        pts = np.linspace(0.15, 0.95, points) * bar.horizon
        add(name, pts,
            lambda t, b=bar: analytics.sigma_cdf(b, float(t)),
            lambda t, b=bar: analytics.sigma_pdf(b, float(t)))

    im = ImagesLambertBarrier(1.0, 2.0, 1.0)
    pts = np.linspace(0.3, 0.98, points) * im.horizon
    add("images-lambert", pts,
        lambda t: analytics.images_crossing(im, probe=float(t)).probability,
        lambda t: analytics.images_hitting_pdf(im, float(t)))

    for name, bar in (
        ("two-sided-constant", TwoSidedConstantBarrier(1.0, -1.0, 1.0)),
        ("two-sided-curved", TwoSidedCurvedBarrier(1.0, -1.0, 0.5, 1.0)),
    ):
        pts = np.linspace(0.15, 0.95, points) * bar.horizon
        add(name, pts,
            lambda t, b=bar: analytics.two_sided_sigma_cdf(b, float(t)),
            lambda t, b=bar: analytics.two_sided_sigma_pdf(b, float(t)))

    inv = TimeInvertedBarrier(SqrtRemainingBarrier(1.0, 1.0, 1.0))
    pts = np.linspace(1.2, 5.0, points) * inv.horizon
    add("time-inverted", pts,
        lambda t: analytics.hitting_cdf_inverted(inv, float(t)),
        lambda t: analytics.hitting_pdf_inverted(inv, float(t)))
    return rows


def gstar_rows(expect_unbounded: bool) -> list[dict]:
    """The mirrored variant passes the identity but fails boundedness.

    With expect_unbounded=True the rows assert that the detector flags
    it (default suite); otherwise the rows present the misconfiguration
    as if it were a shipped barrier, so the boundedness row fails.
    """
    bar = LogRemainingBarrier(1.5, math.e, 1.0, mirrored=True)
    rep = verify_barrier_identity(bar.measure(), bar.value,
                                  grid=barrier_time_grid(bar.horizon, 1000))
    id_ok = bool(rep.identity_holds)
    refused = analytics.crossing_prob(bar)
    rows = [{
        "check": "gstar:identity-along-barrier",
        "max_deviation": rep.max_deviation,
        "pass": id_ok,
    }]
    if expect_unbounded:
        rows.append({
            "check": "gstar:unboundedness-detected",
            "bounded": rep.bounded,
            "formula_refuses": not refused.conditions_met,
            "pass": bool((not rep.bounded) and not refused.conditions_met),
        })
    else:
        rows.append({
            "check": "gstar:bounded-below-barrier",
            "bounded": rep.bounded,
            "pass": bool(rep.bounded),
        })
    return rows


def build_verification_report(include_mc: bool = False, gstar: bool = False,
                              paths: int = 1_000_000, steps: int = 4096,
                              seed: int = 0, exit_paths: int = 250_000,
                              workers: int | None = None) -> dict:
    checks = identity_checks() + exact_identity_checks() + fd_checks()
    checks += gstar_rows(expect_unbounded=not gstar)
    report = {"checks": checks}
    if include_mc:
        report["mc"] = montecarlo.agreement_suite(
            paths=paths, steps=steps, seed=seed, exit_paths=exit_paths,
            workers=workers)
    ok = all(c["pass"] for c in checks)
    if include_mc:
        ok = ok and report["mc"]["all_pass"]
    report["all_pass"] = ok
    return report


def run_verify(args) -> int:
    report = build_verification_report(
        include_mc=args.include_mc, gstar=args.gstar, paths=args.paths,
        steps=args.steps, seed=args.seed, exit_paths=args.exit_paths,
        workers=args.workers)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        for c in report["checks"]:
            status = "PASS" if c["pass"] else "FAIL"
            detail = {k: v for k, v in c.items() if k not in ("check", "pass")}
            print(f"[{status}] {c['check']} {json.dumps(detail, sort_keys=True)}")
        if "mc" in report:
            mc = report["mc"]
            for section in ("crossing", "fortet", "last_exit"):
                for row in mc[section]:
                    status = "PASS" if row["pass"] else "FAIL"
                    label = row.get("law", section)
                    print(f"[{status}] mc:{section}:{row['name']}:{label}")
        print(f"overall: {'PASS' if report['all_pass'] else 'FAIL'}")
    return EXIT_OK if report["all_pass"] else EXIT_VERIFY_FAIL


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _add_spec_args(p):
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--spec", help="JSON barrier spec file (schema 1)")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--mirrored", action="store_true",
                   help="mirrored log-remaining variant (refused by formulas)")


def make_parser() -> _Parser:
    parser = _Parser(prog="crossprob", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="crossing probability with conditions")
    _add_spec_args(p)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=run_prob)

    p = sub.add_parser("density", help="tabulate cdf/pdf columns as CSV")
    _add_spec_args(p)
    p.add_argument("--kind", choices=analytics.KINDS, default="sigma")
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=run_density)

    p = sub.add_parser("mc", help="Monte Carlo estimate vs analytic value")
    _add_spec_args(p)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=float, default=0.0)
    bridge = p.add_mutually_exclusive_group()
    bridge.add_argument("--bridge", dest="bridge", action="store_true",
                        default=True)
    bridge.add_argument("--no-bridge", dest="bridge", action="store_false")
    p.add_argument("--fortet", action="store_true",
                   help="check the hitting-time integral equation")
    p.add_argument("--v", type=float, help="probe point for --fortet")
    p.add_argument("--times", help="comma-separated times for last-exit CDFs")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=run_mc)

    p = sub.add_parser("verify", help="run the self-verification suite")
    p.add_argument("--include-mc", action="store_true")
    p.add_argument("--gstar", action="store_true",
                   help="present the mirrored misconfiguration as shipped "
                        "(expected verification failure)")
    p.add_argument("--paths", type=int, default=1_000_000)
    p.add_argument("--exit-paths", type=int, default=250_000)
    p.add_argument("--steps", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=run_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (DomainError, ConditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
