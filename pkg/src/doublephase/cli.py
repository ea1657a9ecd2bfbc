"""Configuration-driven experiment runner.

Subcommands: eigen, solve, sweep, verify, check.  Configs are line-oriented
key = value files with sections [domain], [exponents], [mu], [f], [lambda],
[solver], [output]; see the README for the full key list.  Exit codes:
0 success, 2 config/input error, 3 gate error, 4 convergence error,
5 verification error.

All outputs are plain text or CSV written with repr-precision floats, so a
rerun of the same config reproduces files byte for byte.
"""

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretization import (FemFunction, build_mesh, read_function_csv,
                             write_function_csv)
from .eigen import solve_first_eigenpair
from .errors import (ConfigError, ConvergenceError, DoublePhaseError,
                     GateError, InputError, PositivityError, SeedError,
                     SuperlinearityError, VerificationError)
from .operator import Problem, monotonicity_gap
from .orlicz import Exponents, check_hypotheses, check_sandwich
from .solver import (check_reaction_hypotheses, find_upper_constant,
                     original_rhs, power_reaction, reaction_f1, reaction_f2,
                     reaction_f3, solve_negative, solve_positive)
from .verify import moser_identity_check, sup_norm_report, weak_residual

_SCHEMA = {
    "domain": {"kind", "a", "b", "c", "d", "n"},
    "exponents": {"p", "q", "N", "r"},
    "mu": {"kind", "value", "a", "b", "name"},
    "f": {"kind", "r", "coeff", "a"},
    "lambda": {"value", "multiple", "sweep", "sweep_mode"},
    "solver": {"tol", "eigen_tol", "tol_bound", "max_iter", "eigen_max_iter",
               "seed"},
    "output": {"dir"},
}

_MU_NAMES = ("x1",)


@dataclass
class ExperimentConfig:
    """Validated run plan parsed from a config file."""

    domain_kind: str
    bounds: tuple
    resolution: int
    p: float
    q: float
    ambient_n: int
    eigen_r: float
    mu_kind: str
    mu_params: tuple
    f_kind: Optional[str]
    f_params: dict
    lambda_mode: Optional[str]
    lambda_values: tuple
    sweep_multiples: bool
    tol: float = 1e-8
    eigen_tol: float = 1e-8
    tol_bound: float = 1e-6
    max_iter: int = 50000
    eigen_max_iter: int = 2000
    seed: int = 0
    out_dir: Optional[str] = None

    def make_mesh(self):
        domain = self.bounds[0] if self.domain_kind == "interval" else self.bounds
        return build_mesh(domain, self.resolution)

    def exponents(self):
        return Exponents(self.p, self.q, self.ambient_n)

    def mu_field(self):
        if self.mu_kind == "constant":
            value = self.mu_params[0]
            return lambda x: value
        if self.mu_kind == "affine":
            a0, b0 = self.mu_params
            return lambda x: a0 + b0 * x[..., 0]
        return lambda x: x[..., 0]  # named: x1

    def reaction(self):
        if self.f_kind is None:
            raise ConfigError([("kind", 0, "section [f] is required for this command")])
        params = self.f_params
        if self.f_kind == "power":
            return power_reaction(params["r"], params.get("coeff", 1.0))
        if self.f_kind == "f1":
            return reaction_f1(params.get("a", 1.0), params["r"])
        if self.f_kind == "f2":
            return reaction_f2(params.get("a", 1.0), self.q)
        return reaction_f3(self.p, self.q)

    def resolve_lambdas(self, lambda_1p):
        """(label, value) pairs; labels echo the configured numbers."""
        if self.lambda_mode is None:
            raise ConfigError([("value", 0, "section [lambda] is required for this command")])
        if self.lambda_mode == "value":
            return [(repr(self.lambda_values[0]), self.lambda_values[0])]
        if self.lambda_mode == "multiple":
            m = self.lambda_values[0]
            return [(f"{m!r}*lambda_1p", m * lambda_1p)]
        out = []
        for m in self.lambda_values:
            if self.sweep_multiples:
                out.append((f"{m!r}*lambda_1p", m * lambda_1p))
            else:
                out.append((repr(m), m))
        return out

    @property
    def needs_eigenvalue(self):
        if self.lambda_mode == "multiple":
            return True
        return self.lambda_mode == "sweep" and self.sweep_multiples


class _Reader:
    """Typed access to tokenized sections, accumulating diagnostics."""

    def __init__(self, sections, diagnostics):
        self.sections = sections
        self.diagnostics = diagnostics

    def has(self, section, key=None):
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def raw(self, section, key, required=False, default=None):
        entry = self.sections.get(section, {}).get(key)
        if entry is None:
            if required:
                self.diagnostics.append((key, 0, f"missing required key in [{section}]"))
            return default, 0
        return entry

    def number(self, section, key, cast=float, required=False, default=None):
        raw, line = self.raw(section, key, required)
        if raw is None:
            return default, 0
        try:
            value = cast(raw)
        except ValueError:
            self.diagnostics.append((key, line, f"not a valid {cast.__name__}: {raw!r}"))
            return default, line
        return value, line


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def _tokenize(text):
    sections = {}
    diagnostics = []
    current = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                diagnostics.append((name, line_no, "unknown section"))
                current = None
                continue
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in line:
            diagnostics.append((line, line_no, "expected key = value"))
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if current is None:
            diagnostics.append((key, line_no, "key outside any known section"))
            continue
        if key not in _SCHEMA[current]:
            diagnostics.append((key, line_no, f"unknown key in [{current}]"))
            continue
        if key in sections[current]:
            diagnostics.append((key, line_no, "duplicate key"))
            continue
        sections[current][key] = (value, line_no)
    return sections, diagnostics


def parse_config(text):
    """Parse and validate a config; raises ConfigError with precise
    (key, line, reason) diagnostics on any problem."""
    sections, diagnostics = _tokenize(text)
    r = _Reader(sections, diagnostics)

    for required_section in ("domain", "exponents"):
        if required_section not in sections:
            diagnostics.append((required_section, 0, "missing required section"))

    kind, kind_line = r.raw("domain", "kind", required=r.has("domain"))
    if kind is not None and kind not in ("interval", "rectangle"):
        diagnostics.append(("kind", kind_line, "kind must be interval or rectangle"))
        kind = None
    a, _ = r.number("domain", "a", required=kind is not None)
    b, b_line = r.number("domain", "b", required=kind is not None)
    bounds = ()
    if a is not None and b is not None:
        if not a < b:
            diagnostics.append(("b", b_line, "a < b required"))
        bounds = ((a, b),)
    if kind == "rectangle":
        c, _ = r.number("domain", "c", required=True)
        d, d_line = r.number("domain", "d", required=True)
        if c is not None and d is not None:
            if not c < d:
                diagnostics.append(("d", d_line, "c < d required"))
            bounds = bounds + ((c, d),)
    n, n_line = r.number("domain", "n", cast=_int, required=r.has("domain"))
    if n is not None and n < 1:
        diagnostics.append(("n", n_line, "resolution must be at least 1"))

    p, p_line = r.number("exponents", "p", required=r.has("exponents"))
    q, q_line = r.number("exponents", "q", required=r.has("exponents"))
    if p is not None and p <= 1.0:
        diagnostics.append(("p", p_line, "p > 1 required"))
    if p is not None and q is not None and not p < q:
        diagnostics.append(("q", q_line, "p < q required"))
    dim = 1 if kind == "interval" else 2
    ambient_n, _ = r.number("exponents", "N", cast=_int, default=dim)
    eigen_r, _ = r.number("exponents", "r", default=p)

    mu_kind, mu_line = r.raw("mu", "kind", default="constant")
    mu_params = (0.0,)
    if mu_kind == "constant":
        value, value_line = r.number("mu", "value", default=0.0)
        if value is not None and value < 0.0:
            diagnostics.append(("value", value_line, "mu >= 0 required"))
        mu_params = (value,)
    elif mu_kind == "affine":
        a0, a0_line = r.number("mu", "a", required=r.has("mu"), default=0.0)
        b0, _ = r.number("mu", "b", default=0.0)
        mu_params = (a0 or 0.0, b0 or 0.0)
        if bounds and a0 is not None and b0 is not None:
            lo, hi = bounds[0]
            if min(a0 + b0 * lo, a0 + b0 * hi) < 0.0:
                diagnostics.append(("a", a0_line, "mu >= 0 required on the domain"))
    elif mu_kind == "named":
        name, name_line = r.raw("mu", "name", required=True)
        if name is not None and name not in _MU_NAMES:
            diagnostics.append(("name", name_line, f"unknown mu name {name!r}"))
        mu_params = (name,)
        if bounds and bounds[0][0] < 0.0:
            diagnostics.append(("name", name_line, "mu >= 0 required on the domain"))
    else:
        diagnostics.append(("kind", mu_line, "mu kind must be constant, affine, or named"))

    f_kind = None
    f_params = {}
    if r.has("f"):
        f_kind, f_line = r.raw("f", "kind", required=True)
        if f_kind is not None and f_kind not in ("power", "f1", "f2", "f3"):
            diagnostics.append(("kind", f_line, "f kind must be power, f1, f2, or f3"))
            f_kind = None
        if f_kind in ("power", "f1"):
            fr, fr_line = r.number("f", "r", required=True)
            if fr is not None:
                f_params["r"] = fr
                if q is not None and not fr > q:
                    diagnostics.append(("r", fr_line, "r > q required for superlinear growth"))
        if f_kind == "power":
            coeff, coeff_line = r.number("f", "coeff", default=1.0)
            if coeff is not None:
                if coeff <= 0.0:
                    diagnostics.append(("coeff", coeff_line, "coeff must be positive"))
                f_params["coeff"] = coeff
        if f_kind in ("f1", "f2"):
            av, _ = r.number("f", "a", default=1.0)
            if av is not None:
                f_params["a"] = av

    lambda_mode = None
    lambda_values = ()
    sweep_multiples = True
    if r.has("lambda"):
        present = [k for k in ("value", "multiple", "sweep") if r.has("lambda", k)]
        if len(present) != 1:
            line = min((sections["lambda"][k][1] for k in present), default=0)
            diagnostics.append(("lambda", line,
                                "exactly one of value, multiple, sweep required"))
        elif present[0] == "sweep":
            raw, raw_line = r.raw("lambda", "sweep")
            try:
                values = tuple(float(tok) for tok in raw.split(","))
                if not values:
                    raise ValueError
                lambda_mode = "sweep"
                lambda_values = values
            except ValueError:
                diagnostics.append(("sweep", raw_line, f"not a comma list of numbers: {raw!r}"))
            mode, mode_line = r.raw("lambda", "sweep_mode", default="multiple")
            if mode not in ("multiple", "absolute"):
                diagnostics.append(("sweep_mode", mode_line,
                                    "sweep_mode must be multiple or absolute"))
            sweep_multiples = mode == "multiple"
        else:
            value, value_line = r.number("lambda", present[0])
            if value is not None:
                if value <= 0.0:
                    diagnostics.append((present[0], value_line, "lambda must be positive"))
                lambda_mode = present[0]
                lambda_values = (value,)

    tol, _ = r.number("solver", "tol", default=1e-8)
    eigen_tol, _ = r.number("solver", "eigen_tol", default=1e-8)
    tol_bound, _ = r.number("solver", "tol_bound", default=1e-6)
    max_iter, _ = r.number("solver", "max_iter", cast=_int, default=50000)
    eigen_max_iter, _ = r.number("solver", "eigen_max_iter", cast=_int, default=2000)
    seed, _ = r.number("solver", "seed", cast=_int, default=0)
    for name, value in (("tol", tol), ("eigen_tol", eigen_tol),
                        ("tol_bound", tol_bound)):
        if value is not None and value <= 0.0:
            diagnostics.append((name, 0, f"{name} must be positive"))

    out_dir, _ = r.raw("output", "dir", default=None)

    if diagnostics:
        raise ConfigError(diagnostics)
    return ExperimentConfig(
        domain_kind=kind, bounds=bounds, resolution=n, p=p, q=q,
        ambient_n=ambient_n, eigen_r=eigen_r, mu_kind=mu_kind,
        mu_params=mu_params, f_kind=f_kind, f_params=f_params,
        lambda_mode=lambda_mode, lambda_values=lambda_values,
        sweep_multiples=sweep_multiples, tol=tol, eigen_tol=eigen_tol,
        tol_bound=tol_bound, max_iter=max_iter,
        eigen_max_iter=eigen_max_iter, seed=seed, out_dir=out_dir)


def _fmt(value):
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_kv(path, items):
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key}={_fmt(value)}\n")


def _echo(quiet, *parts):
    if not quiet:
        print(*parts)


_SUMMARY_COLUMNS = [
    "index", "lambda", "lambda_1p", "status", "u_bar", "v_bar", "phi_plus",
    "phi_minus", "sup_plus", "sup_minus", "residual_plus", "residual_minus",
    "original_residual_plus", "original_residual_minus", "iterations_plus",
    "iterations_minus",
]


def _write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col, "")) for col in _SUMMARY_COLUMNS])


def _write_eigen(out, ep):
    write_function_csv(ep.eigenfunction, os.path.join(out, "eigenpair.csv"))
    _write_kv(os.path.join(out, "eigen_summary.txt"), [
        ("r", float(ep.r)),
        ("lambda_1", ep.lambda_1),
        ("iterations", ep.iterations),
        ("residual", ep.residual_norm),
    ])


def _verification_items(problem, f, lam, u, bound):
    """Residual, truncated-test, and sup-norm report lines for one branch.

    The nonpositive branch is verified through its mirror image, so the
    truncated-test identity always sees a nonnegative function.
    """
    p = problem.exps.p
    residual = weak_residual(problem, u, original_rhs(f, lam, p))
    if float(np.min(u.nodal_values)) < 0.0:
        w = FemFunction(problem.mesh, -u.nodal_values)
        fm = f.mirrored()
    else:
        w = u
        fm = f
    rhs = original_rhs(fm, lam, p)
    sup = sup_norm_report(u, abs(bound))
    items = [
        ("residual_max_abs", residual.max_abs),
        ("residual_euclidean", residual.euclidean),
        ("sup", sup.sup),
        ("within_bar", sup.within_bar),
    ]
    if sup.sup > 0.0:
        moser = moser_identity_check(problem, w,
                                     lambda x, s, xi: rhs(x, s),
                                     h=sup.sup / 2.0, kappa=1.0)
        items += [
            ("moser_kappa", moser.kappa),
            ("moser_h", moser.h),
            ("moser_term1", moser.lhs_terms[0]),
            ("moser_term2", moser.lhs_terms[1]),
            ("moser_term3", moser.lhs_terms[2]),
            ("moser_term4", moser.lhs_terms[3]),
            ("moser_rhs", moser.rhs),
            ("moser_gap", moser.gap),
        ]
    return items


def _solve_one(cfg, problem, f, ep, lam):
    options = dict(eigen_tol=cfg.eigen_tol, eigen_max_iter=cfg.eigen_max_iter,
                   max_iter=cfg.max_iter, bound_tol_rel=cfg.tol_bound,
                   eigenpair=ep)
    rep_pos = solve_positive(problem, f, lam, tol=cfg.tol, **options)
    rep_neg = solve_negative(problem, f, lam, tol=cfg.tol, **options)
    return rep_pos, rep_neg


def _row_from_reports(index, lam, ep, rep_pos, rep_neg):
    return {
        "index": index, "lambda": lam, "lambda_1p": ep.lambda_1,
        "status": "ok", "u_bar": rep_pos.u_bar, "v_bar": rep_neg.u_bar,
        "phi_plus": rep_pos.phi_value, "phi_minus": rep_neg.phi_value,
        "sup_plus": max(abs(rep_pos.min_value), abs(rep_pos.max_value)),
        "sup_minus": max(abs(rep_neg.min_value), abs(rep_neg.max_value)),
        "residual_plus": rep_pos.residual_dual_norm,
        "residual_minus": rep_neg.residual_dual_norm,
        "original_residual_plus": rep_pos.original_residual,
        "original_residual_minus": rep_neg.original_residual,
        "iterations_plus": rep_pos.iterations,
        "iterations_minus": rep_neg.iterations,
    }


def _status_name(exc):
    return {
        GateError: "gate_error",
        ConvergenceError: "convergence_error",
        SeedError: "seed_error",
        PositivityError: "positivity_error",
        SuperlinearityError: "superlinearity_error",
        VerificationError: "verification_error",
    }.get(type(exc), "error")


def _write_branch_files(out, problem, f, lam, rep, suffix, branch):
    name = "positive" if branch == "+" else "negative"
    write_function_csv(rep.solution,
                       os.path.join(out, f"solution_{name}{suffix}.csv"))
    _write_kv(os.path.join(out, f"report_{name}{suffix}.txt"), rep.summary())
    items = _verification_items(problem, f, lam, rep.solution, rep.u_bar)
    _write_kv(os.path.join(out, f"verification_{name}{suffix}.txt"), items)


def run_eigen(cfg, out, quiet):
    mesh = cfg.make_mesh()
    r = cfg.eigen_r if cfg.eigen_r is not None else cfg.p
    ep = solve_first_eigenpair(mesh, r, tol=cfg.eigen_tol,
                               max_iter=cfg.eigen_max_iter)
    _write_eigen(out, ep)
    _echo(quiet, f"r={r:g} lambda_1={ep.lambda_1!r} iterations={ep.iterations} "
                 f"residual={ep.residual_norm:.3e}")
    return 0


def run_solve(cfg, out, quiet):
    mesh = cfg.make_mesh()
    problem = Problem(mesh, cfg.exponents(), cfg.mu_field())
    f = cfg.reaction()
    ep = solve_first_eigenpair(mesh, cfg.p, tol=cfg.eigen_tol,
                               max_iter=cfg.eigen_max_iter, quad=problem.eq.rule)
    _write_eigen(out, ep)
    lambdas = cfg.resolve_lambdas(ep.lambda_1)
    if len(lambdas) != 1:
        raise ConfigError([("sweep", 0, "solve expects a single lambda; use sweep")])
    label, lam = lambdas[0]
    rep_pos, rep_neg = _solve_one(cfg, problem, f, ep, lam)
    _write_branch_files(out, problem, f, lam, rep_pos, "", "+")
    _write_branch_files(out, problem, f, lam, rep_neg, "", "-")
    _write_summary(os.path.join(out, "summary.csv"),
                   [_row_from_reports(0, lam, ep, rep_pos, rep_neg)])
    _echo(quiet, f"lambda={lam!r} ({label}) lambda_1p={ep.lambda_1!r}")
    _echo(quiet, f"  +: phi={rep_pos.phi_value:.6e} sup={rep_pos.max_value:.6g} "
                 f"residual={rep_pos.original_residual:.3e} "
                 f"iterations={rep_pos.iterations}")
    _echo(quiet, f"  -: phi={rep_neg.phi_value:.6e} inf={rep_neg.min_value:.6g} "
                 f"residual={rep_neg.original_residual:.3e} "
                 f"iterations={rep_neg.iterations}")
    return 0


def run_sweep(cfg, out, quiet):
    mesh = cfg.make_mesh()
    problem = Problem(mesh, cfg.exponents(), cfg.mu_field())
    f = cfg.reaction()
    ep = solve_first_eigenpair(mesh, cfg.p, tol=cfg.eigen_tol,
                               max_iter=cfg.eigen_max_iter, quad=problem.eq.rule)
    _write_eigen(out, ep)
    rows = []
    for index, (label, lam) in enumerate(cfg.resolve_lambdas(ep.lambda_1)):
        suffix = f"_{index:03d}"
        try:
            rep_pos, rep_neg = _solve_one(cfg, problem, f, ep, lam)
        except DoublePhaseError as exc:
            rows.append({"index": index, "lambda": lam,
                         "lambda_1p": ep.lambda_1,
                         "status": _status_name(exc)})
            _echo(quiet, f"lambda={lam!r} ({label}): {_status_name(exc)}")
            continue
        _write_branch_files(out, problem, f, lam, rep_pos, suffix, "+")
        _write_branch_files(out, problem, f, lam, rep_neg, suffix, "-")
        rows.append(_row_from_reports(index, lam, ep, rep_pos, rep_neg))
        _echo(quiet, f"lambda={lam!r} ({label}): ok "
                     f"phi+={rep_pos.phi_value:.4e} phi-={rep_neg.phi_value:.4e}")
    _write_summary(os.path.join(out, "summary.csv"), rows)
    return 0


def run_verify(cfg, out, quiet):
    mesh = cfg.make_mesh()
    problem = Problem(mesh, cfg.exponents(), cfg.mu_field())
    f = cfg.reaction()
    lambda_1p = None
    if cfg.needs_eigenvalue:
        ep = solve_first_eigenpair(mesh, cfg.p, tol=cfg.eigen_tol,
                                   max_iter=cfg.eigen_max_iter,
                                   quad=problem.eq.rule)
        lambda_1p = ep.lambda_1
    lambdas = cfg.resolve_lambdas(lambda_1p)
    if len(lambdas) != 1:
        raise ConfigError([("sweep", 0, "verify expects a single lambda")])
    _, lam = lambdas[0]
    u_bar = find_upper_constant(f.f, lam, cfg.p, problem.eq.points_flat)
    for name, sign in (("positive", 1.0), ("negative", -1.0)):
        path = os.path.join(out, f"solution_{name}.csv")
        if not os.path.exists(path):
            raise InputError(f"missing solution file {path}; run solve first")
        u = read_function_csv(mesh, path)
        items = _verification_items(problem, f, lam, u, sign * u_bar)
        _write_kv(os.path.join(out, f"verification_{name}.txt"), items)
        _echo(quiet, f"{name}: regenerated verification report")
    return 0


def run_check(cfg, out, quiet):
    mesh = cfg.make_mesh()
    exps = cfg.exponents()
    mu = cfg.mu_field()
    problem = Problem(mesh, exps, mu)
    hyp = check_hypotheses(exps, mu, mesh)
    items = [
        ("p_lt_q", hyp.p_lt_q),
        ("q_lt_N", hyp.q_lt_N),
        ("ratio_ok", hyp.ratio_ok),
        ("mu_nonnegative", hyp.mu_nonnegative),
        ("mu_lipschitz", hyp.mu_lipschitz),
        ("critical_exponent", hyp.critical_exponent),
    ]
    if cfg.f_kind is not None:
        f = cfg.reaction()
        reaction = check_reaction_hypotheses(f.f, cfg.p, cfg.q,
                                             problem.eq.points_flat)
        items += [
            ("reaction_bounded_ok", reaction.bounded_ok),
            ("reaction_superlinear_ok", reaction.superlinear_ok),
            ("reaction_origin_ok", reaction.origin_ok),
        ]
    rng = np.random.default_rng(cfg.seed)
    trials = 200
    sandwich_violations = 0
    monotone_violations = 0
    for _ in range(trials):
        u = FemFunction(mesh, rng.standard_normal(mesh.num_vertices))
        if not check_sandwich(u, mu, exps).holds:
            sandwich_violations += 1
        v_vals = np.zeros(mesh.num_vertices)
        w_vals = np.zeros(mesh.num_vertices)
        v_vals[mesh.interior_indices] = rng.standard_normal(len(mesh.interior_indices))
        w_vals[mesh.interior_indices] = rng.standard_normal(len(mesh.interior_indices))
        gap = monotonicity_gap(problem, FemFunction(mesh, v_vals),
                               FemFunction(mesh, w_vals))
        if gap < -1e-12:
            monotone_violations += 1
    items += [
        ("random_trials", trials),
        ("sandwich_violations", sandwich_violations),
        ("monotonicity_violations", monotone_violations),
    ]
    _write_kv(os.path.join(out, "hypotheses.txt"), items)
    for key, value in items:
        _echo(quiet, f"{key}={_fmt(value)}")
    return 0


_RUNNERS = {
    "eigen": run_eigen,
    "solve": run_solve,
    "sweep": run_sweep,
    "verify": run_verify,
    "check": run_check,
}


def _exit_code(exc):
    if isinstance(exc, (ConfigError, InputError, SuperlinearityError)):
        return 2
    if isinstance(exc, GateError):
        return 3
    if isinstance(exc, (ConvergenceError, SeedError, PositivityError)):
        return 4
    if isinstance(exc, VerificationError):
        return 5
    return 1


def run(config, command="solve", out_dir=None, quiet=False):
    """Execute one subcommand for a parsed config; returns the exit code."""
    if command not in _RUNNERS:
        raise InputError(f"unknown command {command!r}")
    out = out_dir or config.out_dir
    if out is None:
        print("error: no output directory (set [output] dir or pass --out)",
              file=sys.stderr)
        return 2
    os.makedirs(out, exist_ok=True)
    try:
        return _RUNNERS[command](config, out, quiet)
    except DoublePhaseError as exc:
        print(f"error ({_status_name(exc)}): {exc}", file=sys.stderr)
        return _exit_code(exc)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="doublephase",
        description="Double phase Dirichlet problems: eigenpairs, two-solution "
                    "runs, parameter sweeps, and verification reports.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
            ("eigen", "first eigenpair of the r-Laplacian"),
            ("solve", "two constant-sign solutions for one lambda"),
            ("sweep", "two-solution runs over a lambda list"),
            ("verify", "regenerate verification reports from solution CSVs"),
            ("check", "hypothesis diagnostics and random spot checks")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="path to the config file")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--quiet", action="store_true", help="suppress stdout")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ConfigError as exc:
        for key, line, reason in exc.diagnostics:
            print(f"config error: line {line}: {key}: {reason}", file=sys.stderr)
        return 2
    return run(config, command=args.command, out_dir=args.out, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
