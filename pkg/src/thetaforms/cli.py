"""Command line front end: identity suites, decomposability verdicts, the
differential form omega and E8 counts, all reported as JSON.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or input error,
3 infeasible truncation, ill-conditioned action or exhausted node budget.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, e8lattice, forms, linalg, symplectic, theta
from .f2char import Characteristic, enumerate_characteristics, f2_vectors, f2vec

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

SUITES = ("heat", "bilinear", "addition", "conversion", "transformation", "adjoint",
          "adjoint_W", "det_weight", "binet", "pairing_parity")
GROUPS = {"identities": ("heat", "bilinear", "addition", "conversion")}

# pass thresholds per suite; the effective threshold is max(this, 1e3 * tol)
THRESHOLDS = {
    "heat": 1e-9, "bilinear": 1e-9, "addition": 1e-9, "conversion": 1e-9,
    "transformation": 1e-8, "adjoint": 1e-7, "adjoint_W": 1e-7, "det_weight": 1e-6,
    "binet": 1e-12, "pairing_parity": 1e-9,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    tolerance: float = theta.DEFAULT_TOL
    rank_tol: float = linalg.DEFAULT_RANK_TOL
    seed: int = 0
    g: int = 2
    tau_source: str = "random"
    samples: int = 1
    output_path: str | None = None

    def __post_init__(self):
        if not 0 < self.tolerance < 1 or not 0 < self.rank_tol < 1:
            raise UsageError("tolerances must lie in (0, 1)")
        if self.g < 0:
            raise UsageError("g must be nonnegative")


@dataclass
class Report:
    config: RunConfig
    checks: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, name: str, inputs, residual: float, tolerance: float, elapsed: float) -> None:
        digest = hashlib.sha256(json.dumps(inputs, sort_keys=True).encode()).hexdigest()[:16]
        self.checks.append({
            "check": name, "inputs_digest": digest, "residual": float(residual),
            "tolerance": tolerance, "pass": bool(residual <= tolerance), "elapsed": round(elapsed, 4),
        })

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> dict:
        out = {"version": __version__, "config": asdict(self.config), "checks": self.checks}
        out.update(self.extra)
        out["pass"] = self.passed
        return out


# --- tau sources -----------------------------------------------------------------


def load_tau(path: str) -> theta.PeriodMatrix:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return theta.PeriodMatrix.from_json(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: invalid period matrix: {exc}") from None


def tau_samples(args, cfg: RunConfig) -> list[theta.PeriodMatrix]:
    if args.tau:
        tau = load_tau(args.tau)
        cfg.g = tau.g
        cfg.tau_source = f"file:{args.tau}"
        return [tau]
    rng = np.random.default_rng(cfg.seed)
    if args.product:
        try:
            parts = [int(x) for x in args.product.split(",")]
        except ValueError:
            raise UsageError("--product expects g1,g2") from None
        if any(p < 1 for p in parts):
            raise UsageError("--product block sizes must be positive")
        cfg.g = sum(parts)
        cfg.tau_source = f"product({args.product})"
        return [theta.product_period_matrix(*(theta.random_period_matrix(p, rng) for p in parts))
                for _ in range(cfg.samples)]
    if cfg.g < 1:
        raise UsageError("g must be at least 1 for theta computations")
    cfg.tau_source = "random"
    return [theta.random_period_matrix(cfg.g, rng) for _ in range(cfg.samples)]


def _tau_json(tau: theta.PeriodMatrix) -> dict:
    return tau.to_json()


def _timed(fn, *a, **kw):
    t0 = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t0


# --- suites -----------------------------------------------------------------------


def _run_suite(suite: str, report: Report, taus, cfg: RunConfig) -> None:
    tol = cfg.tolerance
    thr = max(THRESHOLDS[suite], 1e3 * tol)
    rng = np.random.default_rng(cfg.seed + 1)

    if suite == "binet":
        for n, m in [(2, 2), (2, 4), (3, 5), (4, 4)]:
            a = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
            b = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
            res, dt = _timed(linalg.binet_check, a, b)
            scale = max(1.0, abs(linalg.det(a @ b)))
            report.add(f"binet[{n}x{m}]", {"seed": cfg.seed, "n": n, "m": m}, res / scale, thr, dt)
        return

    for k, tau in enumerate(taus):
        g = tau.g
        tj = _tau_json(tau)
        vecs = f2_vectors(g)
        if suite == "heat":
            for m in enumerate_characteristics(g):
                res, dt = _timed(theta.heat_equation_residual, m, tau, tol)
                report.add(f"heat{m}#{k}", {"tau": tj, "m": str(m)}, res, thr, dt)
        elif suite == "bilinear":
            z = rng.normal(size=g) * 0.3 + 1j * rng.normal(size=g) * 0.3
            for m in enumerate_characteristics(g):
                res, dt = _timed(theta.riemann_bilinear_check, m.eps, m.delta, tau, z, tol)
                report.add(f"bilinear{m}#{k}", {"tau": tj, "m": str(m), "z": linalg.to_json(z)}, res, thr, dt)
        elif suite == "addition":
            for a in vecs:
                for e in vecs:
                    res, dt = _timed(theta.addition_relation_check, a, e, tau, tol)
                    report.add(f"addition[{_bits(a)},{_bits(e)}]#{k}", {"tau": tj, "a": a, "e": e}, res, thr, dt)
        elif suite == "conversion":
            rep, dt = _timed(forms.conversion_identities_check, tau, tol)
            report.add(f"conversion[C<-A]#{k}", {"tau": tj}, rep.c_from_a, thr, dt)
            report.add(f"conversion[A<-C]#{k}", {"tau": tj}, rep.a_from_c, thr, 0.0)
        elif suite == "transformation":
            kinds = [(symplectic.GAMMA2, "characteristic_weight_half"),
                     (symplectic.GAMMA24, "second_order"),
                     (symplectic.STAR24, "second_order_squared")]
            for j, (tag, kind) in enumerate(kinds):
                gamma = symplectic.sample_subgroup(tag, g, 2, cfg.seed * 101 + 7 * k + j)
                targets = enumerate_characteristics(g, "even") if kind == "characteristic_weight_half" else [None]
                for m in targets:
                    rep, dt = _timed(theta.transformation_check, gamma, m, tau, kind, tol, 150)
                    res = max(rep.modulus_residual, rep.root_of_unity_residual, rep.sigma_spread)
                    label = f"transformation[{kind}{'' if m is None else str(m)}]#{k}"
                    report.add(label, {"tau": tj, "gamma": gamma.to_json(), "m": str(m)}, res, thr, dt)
        elif suite in ("adjoint", "adjoint_W", "pairing_parity", "det_weight"):
            if g < 2:
                raise UsageError(f"suite {suite} needs g >= 2")
            for e, d in _pairs_for(suite, vecs):
                inputs = {"tau": tj, "eps": e, "delta": d}
                name = f"[{_bits(e)},{_bits(d)}]#{k}"
                if suite == "adjoint":
                    res, dt = _timed(forms.adjugate_theorem_check, e, d, tau, tol)
                    report.add("adjoint" + name, inputs, res, thr, dt)
                    c8 = (8j * math.pi) ** (g - 1) / math.factorial(g - 1)
                    res, dt = _timed(forms.adjugate_theorem_check, e, d, tau, tol, c8)
                    report.add("adjoint_8pi_constant" + name, inputs, res, thr, dt)
                elif suite == "adjoint_W":
                    if g > 3:
                        raise UsageError("adjoint_W is limited to g <= 3")
                    res, dt = _timed(forms.adjugate_W_identity_check, e, d, tau, tol)
                    report.add("adjoint_W" + name, inputs, res, thr, dt)
                elif suite == "pairing_parity":
                    t0 = time.perf_counter()
                    b1 = forms.freitag_pairing(e, d, tau, tol)
                    b2 = forms.freitag_pairing(d, e, tau, tol)
                    res = forms._residual(b2, (-1) ** (g + 1) * b1)
                    report.add("pairing_parity" + name, inputs, res, thr, time.perf_counter() - t0)
                else:
                    t0 = time.perf_counter()
                    srng = np.random.default_rng(cfg.seed + 17)
                    extra = [theta.random_period_matrix(g, srng) for _ in range(19)]
                    gammas = [symplectic.sample_subgroup(symplectic.STAR24, g, 2, cfg.seed * 31 + i)
                              for i in range(5)]
                    rep = forms.det_A_weight_check(e, d, [tau] + extra, gammas, tol, max_radius=150)
                    dt = time.perf_counter() - t0
                    report.add("det_weight[nonvanishing]" + name, inputs,
                               0.0 if rep.nonvanishing else 1.0, 0.5, dt)
                    report.add("det_weight[modulus]" + name, inputs, rep.max_weight_residual, thr, 0.0)


def _pairs_for(suite: str, vecs):
    """A small deterministic set of (eps, delta) with eps != delta."""
    z, last = vecs[0], vecs[-1]
    pairs = [(z, last), (vecs[1], z)]
    if len(vecs) > 2:
        pairs.append((vecs[1], vecs[2]))
    return pairs


def _bits(v) -> str:
    return "".join(str(int(b)) for b in v)


# --- commands -------------------------------------------------------------------


def cmd_verify(args, cfg: RunConfig) -> Report:
    suites = []
    for name in [args.suite_pos, args.suite]:
        if name is None:
            continue
        if name in GROUPS:
            suites.extend(GROUPS[name])
        elif name in SUITES:
            suites.append(name)
        else:
            raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES + tuple(GROUPS))}")
    if not suites:
        raise UsageError("no suite given")
    report = Report(cfg)
    taus = [] if suites == ["binet"] else tau_samples(args, cfg)
    for s in suites:
        _run_suite(s, report, taus, cfg)
    return report


def cmd_decomposable(args, cfg: RunConfig) -> Report:
    taus = tau_samples(args, cfg)
    report = Report(cfg)
    verdicts = []
    for tau in taus:
        if tau.g < 2:
            raise UsageError("decomposability needs g >= 2")
        q = forms.quadric_criterion(tau, cfg.rank_tol, cfg.tolerance)
        verdicts.append({
            "tau": tau.to_json(),
            "verdict": q.verdict, "rank": q.rank, "N": q.n,
            "singular_values": [float(s) for s in q.singular_values],
            "witnesses": [linalg.to_json(w) for w in q.witnesses],
        })
    report.extra["decomposable"] = verdicts
    return report


def cmd_omega(args, cfg: RunConfig) -> Report:
    try:
        eps, delta = f2vec(args.eps), f2vec(args.delta)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad characteristic: {exc}") from None
    if eps == delta:
        raise UsageError("eps and delta must differ")
    if args.g_given is None and not args.tau and not args.product:
        cfg.g = len(eps)
    taus = tau_samples(args, cfg)
    report = Report(cfg)
    out = []
    for tau in taus:
        if len(eps) != tau.g or len(delta) != tau.g:
            raise UsageError(f"characteristics must have length g = {tau.g}")
        coeffs = forms.omega_coefficients(eps, delta, tau, cfg.tolerance)
        bound = theta.second_order_data(tau, cfg.tolerance).trunc_bound
        out.append({
            "tau": tau.to_json(), "pairs": [[i + 1, j + 1] for i, j in theta.sym_pairs(tau.g)],
            "coefficients": linalg.to_json(coeffs), "trunc_bound": float(bound),
            "nonzero": bool(np.abs(coeffs).max() > 0),
        })
    report.extra["omega"] = out
    return report


def cmd_e8(args, cfg: RunConfig) -> Report:
    report = Report(cfg)
    threads = args.threads
    z = e8lattice.ZETA_E8
    t0 = time.perf_counter()
    if args.target == "roots":
        res = e8lattice.diophantine_count(z, [[2]], threads=threads)
        expected = 240
    elif args.target == "norm4":
        res = e8lattice.diophantine_count(z, [[4]], threads=threads)
        expected = 2160
    elif args.target == "sanity":
        res = e8lattice.sanity_count(z)
        expected = 240 * 126
    elif args.target in ("zeta", "T9"):
        if not args.slow:
            raise UsageError(f"target {args.target} enumerates ~7e8 solutions; pass --slow")
        m = z if args.target == "zeta" else e8lattice.padded_target(9, z)
        reduced = e8lattice.reduce_zero_rows(m)
        res = e8lattice.diophantine_count(z, reduced, threads=threads)
        res = e8lattice.SolutionCount(np.asarray(m), res.count, res.nodes, res.seconds)
        expected = e8lattice.AUT_E8_ORDER
    else:
        raise UsageError(f"unknown target {args.target!r}")
    out = res.to_json()
    out["target"] = args.target
    out["expected"] = expected
    report.extra["e8"] = out
    report.add(f"e8[{args.target}]", {"target": args.target}, 0.0 if res.count == expected else 1.0,
               0.5, time.perf_counter() - t0)
    return report


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--g", type=int, dest="g_given", default=None)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--tau", metavar="FILE", help='JSON {"g": n, "re": [[...]], "im": [[...]]}')
    src.add_argument("--random", action="store_true", help="sample tau (default)")
    src.add_argument("--product", metavar="G1,G2", help="block-diagonal random tau")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, default=1, help="number of sampled tau")
    common.add_argument("--tol", type=float, default=None, help="theta truncation tolerance")
    common.add_argument("--rank-tol", type=float, default=linalg.DEFAULT_RANK_TOL)
    common.add_argument("--json", metavar="OUT", dest="json_out")

    p = argparse.ArgumentParser(prog="thetaforms", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run identity suites")
    v.add_argument("suite_pos", nargs="?", metavar="SUITE")
    v.add_argument("--suite", default=None, help=", ".join(SUITES + tuple(GROUPS)))
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("decomposable", parents=[common], help="quadric criterion verdict")
    d.set_defaults(func=cmd_decomposable)

    o = sub.add_parser("omega", parents=[common], help="coefficients of tr(adj(A) dtau-check)")
    o.add_argument("--eps", required=True)
    o.add_argument("--delta", required=True)
    o.set_defaults(func=cmd_omega)

    e = sub.add_parser("e8", parents=[common], help="E8 lattice counts")
    e.add_argument("action", choices=["count"])
    e.add_argument("--target", required=True, choices=["roots", "norm4", "sanity", "zeta", "T9"])
    e.add_argument("--slow", action="store_true", help="allow the full automorphism enumeration")
    e.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    e.set_defaults(func=cmd_e8)
    return p


def _default_tol() -> float:
    env = os.environ.get("THETA_FORMS_TOL")
    if env is None:
        return theta.DEFAULT_TOL
    try:
        return float(env)
    except ValueError:
        raise UsageError(f"THETA_FORMS_TOL={env!r} is not a number") from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        tol = args.tol if args.tol is not None else _default_tol()
        cfg = RunConfig(tolerance=tol, rank_tol=args.rank_tol, seed=args.seed,
                        g=2 if args.g_given is None else args.g_given,
                        samples=max(1, args.samples), output_path=args.json_out)
        report = args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (theta.TruncationInfeasibleError, symplectic.ConditioningError,
            e8lattice.BudgetExceededError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, symplectic.DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report.to_json(), indent=2, sort_keys=True)
    print(text)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
