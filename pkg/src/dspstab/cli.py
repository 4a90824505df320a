"""
Command-line entry point.

    dspstab hypotheses|profile|green|experiment|bounds --config <path> [--out <dir>]

Exit status: 0 when every verdict passes, 2 when a verdict fails, 1 on a
configuration or runtime error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .green import decomposition_residual, eigen_residual, eigenvector_v, green_csv_rows
from .linop import (analyze_symbol, check_dissipativity, check_hyp_inv, check_unit_roots,
                    limit_symbol, linearize, spectral_probe)
from .profile import (family_lipschitz_check, localization_rates, mass_function, solve_family,
                      write_family_manifest)
from .report import loglog_svg, text_table, write_csv
from .scheme import (burgers_derivative, burgers_flux, check_cfl, check_consistency, check_lax,
                     check_rankine_hugoniot, make_mlf, shock_pair)
from .seqcore import TailedSeq, write_seq_csv
from .stability import (ConditionError, check_inq_bounds, duhamel_check, insum_bound_check,
                        preset, q_identity_residual, random_perturbations, run_experiment,
                        state_radius)

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
COMMANDS = ("hypotheses", "profile", "green", "experiment", "bounds")

INSUM_TRIPLETS = ((2.0, 2.0, 2.0), (0.5, 1.0, 0.5), (1.5, 1.0, 1.0), (0.8, 1.0, 0.8), (1.0, 1.5, 1.0))
DUHAMEL_DELTAS = (0.0, 0.25)
DUHAMEL_STEPS = 50
DUHAMEL_AMPLITUDE = 1e-3
MASS_FUNCTION_TOL = 1e-8
Q_IDENTITY_TOL = 1e-12
DUHAMEL_TOL = 1e-10
EIGEN_TOL = 1e-10


class OutputDir:
    """All files go through here, so nothing lands outside ``root``."""

    def __init__(self, root: str, formats):
        self.root = os.path.realpath(root)
        self.formats = set(formats)
        os.makedirs(self.root, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.realpath(os.path.join(self.root, name))
        if os.path.commonpath([p, self.root]) != self.root:
            raise PermissionError(f"refusing to write outside the output directory: {name}")
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            write_csv(self.path(name), header, rows)

    def text(self, name, content: str):
        if "txt" in self.formats:
            with open(self.path(name), "w", newline="\n", encoding="utf-8") as fh:
                fh.write(content if content.endswith("\n") else content + "\n")

    def svg(self, name, content: str):
        if "svg" in self.formats:
            with open(self.path(name), "w", newline="\n", encoding="utf-8") as fh:
                fh.write(content)


@dataclass
class Context:
    cfg: RunConfig
    out: OutputDir
    green_n: list = field(default_factory=lambda: [200])
    green_j0: int = 0
    decompose: bool = False
    csv_path: str | None = None

    def __post_init__(self):
        sc = self.cfg.scheme
        self.scheme = make_mlf(sc["nu"], sc["D"], burgers_flux, burgers_derivative,
                               (sc["state_lo"], sc["state_hi"]))
        self.shock = shock_pair(self.scheme, self.cfg.shock["u_minus"], self.cfg.shock["u_plus"])
        self._fam = None

    def family(self, full: bool = True):
        if self._fam is None or (full and len(self._fam.members) == 1):
            pc = self.cfg.profile
            deltas = pc["delta_grid"] if full else (0.0,)
            self._fam = solve_family(self.scheme, self.shock, deltas, pc["half_width"],
                                     pc["tol"], pc["max_steps"])
        return self._fam


def _row(rep, threshold=""):
    return (rep.name, rep.value, threshold, "pass" if rep.passed else "fail")


def _emit(ctx: Context, stem: str, header, rows) -> bool:
    ctx.out.csv(f"{stem}.csv", header, rows)
    table = text_table(header, rows)
    ctx.out.text(f"{stem}.txt", table)
    print(table)
    return all(r[-1] == "pass" for r in rows)


# -- commands -----------------------------------------------------------------------

def cmd_hypotheses(ctx: Context) -> bool:
    s, sh = ctx.scheme, ctx.shock
    header = ("check", "value", "threshold", "verdict")
    rows = [_row(check_consistency(s), "0"), _row(check_cfl(s), "-q < nu f'(u) < p"),
            _row(check_rankine_hugoniot(sh), "1e-12"), _row(check_lax(s, sh))]
    syms = {}
    for side, state in (("minus", sh.u_minus), ("plus", sh.u_plus)):
        sym = analyze_symbol(limit_symbol(s, state, "left" if side == "minus" else "right"))
        syms[side] = sym
        dis = check_dissipativity(sym)
        rows.append((f"dissipativity_{side}", dis.value, "< 1", "pass" if dis.passed else "fail"))
        ok = sym.mu is not None and sym.beta is not None and sym.beta.real > 0
        rows.append((f"diffusion_mu_{side}", sym.mu if ok else "none", "", "pass" if ok else "fail"))
        rows.append((f"diffusion_beta_{side}", float(sym.beta.real) if ok else math.nan, "> 0",
                     "pass" if ok else "fail"))
    for side in ("minus", "plus"):
        r = check_unit_roots(syms[side])
        rows.append((f"unit_roots_{side}", r.detail["count"], "distinct, includes 1",
                     "pass" if r.passed else "fail"))
    if not all(r[-1] == "pass" for r in rows):
        # the profile and its linearization are only meaningful once the above hold
        rows += [("hyp_inv", math.nan, "> 1e-12", "skipped"), ("spectral_probe", math.nan, "< 1", "skipped")]
        return _emit(ctx, "hypotheses", header, rows)
    fam = ctx.family(full=False)
    op = linearize(s, fam.reference)
    rows.append(_row(check_hyp_inv(op, syms["minus"], syms["plus"]), "> 1e-12"))
    V = eigenvector_v(op, fam)
    rho = spectral_probe(op, V.seq)
    rows.append(("spectral_probe", rho, "< 1", "pass" if rho < 1 else "fail"))
    return _emit(ctx, "hypotheses", header, rows)


def cmd_profile(ctx: Context) -> bool:
    fam = ctx.family()
    ref = fam.reference
    if "csv" in ctx.out.formats:
        write_seq_csv(ctx.out.path("profile_reference.csv"), ref.seq)
        write_family_manifest(ctx.out.path("family.csv"), fam)
    tol = ctx.cfg.profile["tol"]
    rows = [("reference_residual", ref.residual, f"<= {tol:g}", "pass" if ref.residual <= tol else "fail"),
            ("reference_iterations", ref.iterations, "", "pass")]
    worst = max(abs(mass_function(fam, d) - d) for d in fam.deltas)
    rows.append(("mass_function_error", worst, f"<= {MASS_FUNCTION_TOL:g}",
                 "pass" if worst <= MASS_FUNCTION_TOL else "fail"))
    loc = localization_rates(ref)
    for side, rate in (("left", loc.rate_left), ("right", loc.rate_right)):
        ok = rate > 0 and loc.fit_quality[side]["ok"]
        rows.append((f"localization_rate_{side}", rate, "> 0, exponential", "pass" if ok else "fail"))
    rows.append(_row(family_lipschitz_check(fam)))
    return _emit(ctx, "profile_checks", ("check", "value", "threshold", "verdict"), rows)


def cmd_green(ctx: Context) -> bool:
    fam = ctx.family(full=False)
    op = linearize(ctx.scheme, fam.reference)
    V = sym = None
    rows = []
    if ctx.decompose:
        sh = ctx.shock
        sym = (analyze_symbol(limit_symbol(ctx.scheme, sh.u_minus, "left")),
               analyze_symbol(limit_symbol(ctx.scheme, sh.u_plus, "right")))
        V = eigenvector_v(op, fam)
        er = eigen_residual(op, V.seq)
        rows.append(("eigen_residual", er, f"<= {EIGEN_TOL:g}", "pass" if er <= EIGEN_TOL else "fail"))
        rows.append(("v_cosine_gap", 1 - V.cosine, "< 1e-6", "pass" if 1 - V.cosine < 1e-6 else "fail"))
    data = []
    for n in ctx.green_n:
        r = green_csv_rows(op, n, ctx.green_j0, V, sym)
        data.extend(r)
        err = abs(math.fsum(x[3] for x in r) - 1.0)
        bound = 1e-12 * (1 + n)
        rows.append((f"mass_error_n{n}", err, f"<= {bound:g}", "pass" if err <= bound else "fail"))
        if ctx.decompose:
            res = max(abs(x[5]) for x in r)
            rows.append((f"residual_sup_n{n}", res, "", "pass"))
    if ctx.decompose and len(ctx.green_n) >= 4:
        tab = decomposition_residual(op, V, sym, ctx.green_n, ctx.green_j0)
        rows.append(("residual_exponent", tab.exponent, ">= 0.4", "pass" if tab.exponent >= 0.4 else "fail"))
    name = ctx.csv_path or "green.csv"
    if os.path.isabs(name):
        name = os.path.relpath(name, ctx.out.root)
    write_csv(ctx.out.path(name), ("n", "j0", "j", "green", "leading_term", "residual"), data)
    return _emit(ctx, "green_checks", ("check", "value", "threshold", "verdict"), rows)


def cmd_experiment(ctx: Context) -> bool:
    ec = ctx.cfg.experiment
    dp = preset(ec["choice"], ec["p"])
    fam = ctx.family()
    rep = run_experiment(ctx.scheme, fam, dp, range(1, ec["j_max"] + 1), ec["n_max"])
    if "csv" in ctx.out.formats:
        write_csv(ctx.out.path("norms.csv"), ("n", "J", "l1_norm", "linf_norm"),
                  ((int(n), J, rep.l1[n, k], rep.linf[n, k])
                   for n in rep.n for k, J in enumerate(rep.J_list)))
        write_csv(ctx.out.path("envelope.csv"), ("n", "log_env_l1", "log_env_linf"),
                  zip(rep.n.tolist(), rep.log_env_l1, rep.log_env_linf))
    bound = 1e-10 * (1 + rep.n)
    mass_ok = bool(np.all(rep.mass_defect <= bound))
    rows = [(k, rep.slopes[k], rep.targets[k], rep.verdicts[k]) for k in ("l1", "linf")]
    ctx.out.csv("slopes.csv", ("norm", "fitted", "target", "verdict"), rows)
    ctx.out.csv("mass.csv", ("n", "mass_defect", "bound"), zip(rep.n.tolist(), rep.mass_defect, bound))
    for k, env in (("l1", rep.log_env_l1), ("linf", rep.log_env_linf)):
        title = f"choice {ec['choice']}, p={ec['p']:g}: {k} envelope (slope {rep.slopes[k]:.3f})"
        ctx.out.svg(f"envelope_{k}.svg", loglog_svg(rep.n, env, rep.targets[k], rep.window, title))
    summary = rows + [("mass", float(rep.mass_defect.max()), "1e-10*(1+n)", "pass" if mass_ok else "fail")]
    table = text_table(("norm", "fitted", "target", "verdict"), summary)
    table += f"\nregression window n in [{rep.window[0]}, {rep.window[1]}], slack {rep.slack}"
    ctx.out.text("experiment.txt", table)
    print(table)
    return rep.passed and mass_ok


def cmd_bounds(ctx: Context) -> bool:
    s = ctx.scheme
    ec = ctx.cfg.experiment
    dp = preset(ec["choice"], ec["p"])
    fam = ctx.family()
    pr = fam.reference
    op = linearize(s, pr)
    rows = [_row(insum_bound_check(*t), "stabilizes") for t in INSUM_TRIPLETS]
    rows = [(f"insum_{a:g}_{b:g}_{c:g}",) + r[1:] for (a, b, c), r in zip(INSUM_TRIPLETS, rows)]
    rows.append(_row(check_inq_bounds(s, pr, dp.gamma1, dp.gamma_inf, seed=ec["seed"], op=op), "< 1e6"))
    R = state_radius(s, pr)
    qmax = max(q_identity_residual(s, pr, h, op) for h in random_perturbations(R, 100, ec["seed"]))
    rows.append(("q_identity", qmax, f"<= {Q_IDENTITY_TOL:g}", "pass" if qmax <= Q_IDENTITY_TOL else "fail"))
    rng = np.random.default_rng(ec["seed"])
    h = TailedSeq(-3, rng.uniform(-DUHAMEL_AMPLITUDE, DUHAMEL_AMPLITUDE, 7))
    for d in DUHAMEL_DELTAS:
        res = duhamel_check(s, fam, d, h, DUHAMEL_STEPS, op).max_residual
        rows.append((f"duhamel_delta_{d:g}", res, f"<= {DUHAMEL_TOL:g}", "pass" if res <= DUHAMEL_TOL else "fail"))
    return _emit(ctx, "bounds", ("check", "value", "threshold", "verdict"), rows)


HANDLERS = {"hypotheses": cmd_hypotheses, "profile": cmd_profile, "green": cmd_green,
            "experiment": cmd_experiment, "bounds": cmd_bounds}


def dispatch(cmd: str, cfg: RunConfig, out_dir: str | None = None, **opts) -> int:
    """Run one command; returns the exit status."""
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}")
    out = OutputDir(out_dir or cfg.out_dir, cfg.output["formats"])
    with open(out.path("effective_config.ini"), "w", newline="\n", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    ctx = Context(cfg, out, **opts)
    return EXIT_OK if HANDLERS[cmd](ctx) else EXIT_FAIL


def _n_list(text: str) -> list:
    try:
        ns = sorted({int(t) for t in text.split(",") if t.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")
    if not ns or ns[0] < 0:
        raise argparse.ArgumentTypeError("n values must be >= 0")
    return ns


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dspstab", description="Discrete shock profile stability toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", help="output directory (overrides [output] out_dir)")
        if name == "green":
            p.add_argument("--n", type=_n_list, default=[200], help="time step(s), comma separated")
            p.add_argument("--j0", type=int, default=0, help="source index")
            p.add_argument("--decompose", action="store_true", help="add leading term and residual")
            p.add_argument("--csv", help="CSV file name inside the output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = {}
    if args.command == "green":
        opts = dict(green_n=args.n, green_j0=args.j0, decompose=args.decompose, csv_path=args.csv)
    try:
        cfg = load_config(args.config)
        return dispatch(args.command, cfg, args.out, **opts)
    except (ConfigError, ConditionError) as exc:
        print(f"dspstab: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:            # runtime failures map to exit 1 with context
        print(f"dspstab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
