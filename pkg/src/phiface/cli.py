"""Command-line entry point: config-driven checks, runs, and CSV emission.

Subcommands: check, omega, resolvent, simulate, audit, counterexample,
sweep.  Exit codes: 0 success/pass, 1 check failure (assumption or
certificate verification fails), 2 usage/config/io error.  All numeric
output is deterministic for a fixed seed; floats carry 17 significant
digits.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .errors import CertificateRefusedError, ConfigError, PhifaceError
from .model import DomainSpec
from .discretization import build_grid, build_grid_spacing
from .ports import check_A1, check_A2
from .stability import (
    assemble_generator,
    kato_product_check,
    omega_bound,
    rayleigh_check,
    rayleigh_tolerance,
    resolvent_norm,
    semigroup_norm_check,
)
from .simulate import SimulationConfig, energy_audit, run as run_simulation
from .counterexample import build_materials, divergence_sweep
from . import config as cfg

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, columns, rows):
    """CSV with the exact column order, LF endings, 17-digit floats."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def write_reports(outdir, kv_lines, text_lines):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.kv"), "w", encoding="utf-8", newline="\n") as fh:
        for line in kv_lines:
            fh.write(line + "\n")
    with open(os.path.join(outdir, "report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        for line in text_lines:
            fh.write(line + "\n")


def _load(args, need=()):
    raw = cfg.parse_config(args.config)
    cfg.apply_overrides(raw, args.set or [])
    out = {"raw": raw, "run": cfg.build_run(raw)}
    if "domain" in need:
        out["dom"] = cfg.build_domain(raw)
    if "material" in need:
        out["mat"] = cfg.build_material(raw, out["dom"])
    if "boundary" in need:
        out["bc"] = cfg.build_boundary(raw)
    if "path" in need:
        out["path"] = cfg.build_path(raw, out["dom"], out["run"]["tau"])
    if "counterexample" in need:
        out["cex"] = cfg.build_counterexample(raw)
    return out


def _position_lattice(dom, count, margin_frac=0.15):
    margin = margin_frac * (dom.b - dom.a)
    return np.linspace(dom.a + margin, dom.b - margin, count)


def cmd_check(args):
    ctx = _load(args, need=("domain", "material", "boundary"))
    mat, bc, runsec = ctx["mat"], ctx["bc"], ctx["run"]
    a1 = check_A1(mat, nsamples=runsec["nsamples"])
    a2 = check_A2(bc)
    grid = build_grid(ctx["dom"], ctx["dom"].l0, runsec["n_minus"], runsec["n_plus"])
    sbp_res = max(p.sbp.identity_residual() for p in grid.panels)
    kv = [f"seed = {runsec['seed']}"]
    kv += a1.lines() + a2.lines()
    kv += [
        f"coercivity_m = {fmt(mat.m)}",
        f"coercivity_M = {fmt(mat.M)}",
        f"sbp_identity_residual = {fmt(sbp_res)}",
    ]
    ok = a1.passed and a2.passed
    kv.append(f"check_pass = {fmt(ok)}")
    text = [
        "admissibility check",
        f"  ratio assumption: {'pass' if a1.passed else 'FAIL'}",
        f"  boundary assumption: {'pass' if a2.passed else 'FAIL'}",
        f"  coercivity bounds: m = {fmt(mat.m)}, M = {fmt(mat.M)}",
        f"  summation-by-parts identity residual: {fmt(sbp_res)}",
    ]
    write_reports(args.out, kv, text)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_omega(args):
    ctx = _load(args, need=("domain", "material", "boundary"))
    dom, mat, bc, runsec = ctx["dom"], ctx["mat"], ctx["bc"], ctx["run"]
    rng = np.random.default_rng(runsec["seed"])
    kv = [f"seed = {runsec['seed']}"]
    try:
        cert = omega_bound(mat, nsamples=runsec["nsamples"])
    except CertificateRefusedError as exc:
        kv += ["certificate = refused", f"reason = {exc}"]
        write_reports(args.out, kv, ["certificate refused", f"  {exc}"])
        return EXIT_CHECK_FAILED
    h = (dom.b - dom.a) / max(runsec["n_minus"], runsec["n_plus"])
    ok = True
    worst_rep = None
    for l in _position_lattice(dom, runsec["positions"]):
        grid = build_grid_spacing(dom, float(l), h)
        gen = assemble_generator(grid, mat, float(l), bc)
        rep = rayleigh_check(gen, cert.omega, rayleigh_tolerance(cert, gen.h),
                             nsamples=256, rng=rng)
        if worst_rep is None or rep.max_quotient > worst_rep.max_quotient:
            worst_rep = rep
        ok = ok and rep.passed
    cert = cert.with_verification(worst_rep)
    kv += cert.lines()
    kv += [
        f"rayleigh_positions = {runsec['positions']}",
        f"rayleigh_all_positions_pass = {fmt(ok)}",
    ]
    text = [
        "growth-bound certificate",
        f"  omega = {fmt(cert.omega)} (minus {fmt(cert.omega_minus)}, plus {fmt(cert.omega_plus)})",
        f"  verification: worst Rayleigh quotient {fmt(worst_rep.max_quotient)} over "
        f"{runsec['positions']} frozen positions: {'pass' if ok else 'FAIL'}",
    ]
    write_reports(args.out, kv, text)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_resolvent(args):
    ctx = _load(args, need=("domain", "material", "boundary"))
    dom, mat, bc, runsec = ctx["dom"], ctx["mat"], ctx["bc"], ctx["run"]
    rng = np.random.default_rng(runsec["seed"])
    kv = [f"seed = {runsec['seed']}"]
    try:
        cert = omega_bound(mat, nsamples=runsec["nsamples"])
    except CertificateRefusedError as exc:
        kv += ["certificate = refused", f"reason = {exc}"]
        write_reports(args.out, kv, ["certificate refused", f"  {exc}"])
        return EXIT_CHECK_FAILED
    kv += cert.lines()
    h = (dom.b - dom.a) / max(runsec["n_minus"], runsec["n_plus"])
    grid = build_grid_spacing(dom, dom.l0, h)
    gen = assemble_generator(grid, mat, dom.l0, bc)
    ok = True
    text = ["shifted-inverse checks", f"  omega = {fmt(cert.omega)}"]
    for off in runsec["lambda_offsets"]:
        lam = cert.omega + off
        norm = resolvent_norm(gen, lam)
        bound = (1.0 + 1e-8) / off
        good = norm <= bound
        ok = ok and good
        kv.append(f"resolvent_norm_offset_{fmt(off)} = {fmt(norm)}")
        kv.append(f"resolvent_pass_offset_{fmt(off)} = {fmt(good)}")
        text.append(f"  offset {fmt(off)}: norm {fmt(norm)} vs bound {fmt(bound)}"
                    f" -> {'pass' if good else 'FAIL'}")
    margin = 0.15 * (dom.b - dom.a)
    for j in range(runsec["kato_sequences"]):
        ls = np.sort(rng.uniform(dom.a + margin, dom.b - margin, runsec["kato_k"]))
        rep = kato_product_check(mat, bc, ls, lam=cert.omega + 0.5,
                                 omega=cert.omega, dom=dom, target_h=2 * h)
        ok = ok and rep.passed
        kv.append(f"kato_norm_seq{j} = {fmt(rep.norm)}")
        kv.append(f"kato_pass_seq{j} = {fmt(rep.passed)}")
        text.append(f"  product sequence {j}: norm {fmt(rep.norm)} vs bound "
                    f"{fmt(rep.bound)} -> {'pass' if rep.passed else 'FAIL'}")
    srep = semigroup_norm_check(gen, runsec["s_values"], cert.omega)
    ok = ok and srep.passed
    kv += srep.lines()
    text.append(f"  exponential norm ratio: {fmt(srep.max_ratio)}"
                f" -> {'pass' if srep.passed else 'FAIL'}")
    write_reports(args.out, kv, text)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_simulate(args):
    ctx = _load(args, need=("domain", "material", "boundary", "path"))
    runsec = ctx["run"]
    sim = SimulationConfig(
        dom=ctx["dom"], mat=ctx["mat"], bc=ctx["bc"], path=ctx["path"],
        n_minus=runsec["n_minus"], n_plus=runsec["n_plus"], dt=runsec["dt"],
        tau=runsec["tau"], scheme=runsec["scheme"], cadence=runsec["cadence"],
        seed=runsec["seed"], initial=runsec["initial"],
        maxshift=runsec["maxshift"], envelope_c=runsec["envelope_c"],
    )
    series = run_simulation(sim)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "timeseries.csv"), series.COLUMNS, series.rows())
    stats = energy_audit(series, runsec["dt"])
    kv = [f"seed = {runsec['seed']}", f"scheme = {runsec['scheme']}",
          f"records = {len(series)}",
          f"initial_violation = {fmt(series.meta['initial_violation'])}"]
    kv += stats.lines()
    text = [
        "simulation finished",
        f"  records: {len(series)}, horizon {fmt(runsec['tau'])}, dt {fmt(runsec['dt'])}",
        f"  energy: H0 {fmt(series.H[0])} -> {fmt(series.H[-1])}",
        f"  balance residual: max {fmt(stats.max_residual)}",
    ]
    write_reports(args.out, kv, text)
    return EXIT_OK


def cmd_audit(args):
    ctx = _load(args, need=("domain", "material", "boundary", "path"))
    runsec = ctx["run"]
    if not ctx["path"].is_constant:
        raise ConfigError("energy audit needs a fixed interface path")
    stats = []
    for dt in (runsec["dt"], 0.5 * runsec["dt"]):
        sim = SimulationConfig(
            dom=ctx["dom"], mat=ctx["mat"], bc=ctx["bc"], path=ctx["path"],
            n_minus=runsec["n_minus"], n_plus=runsec["n_plus"], dt=dt,
            tau=runsec["tau"], scheme=runsec["scheme"], cadence=1,
            seed=runsec["seed"], initial=runsec["initial"],
        )
        series = run_simulation(sim)
        stats.append(energy_audit(series, dt))
    coarse, fine = stats
    if fine.max_residual > 0:
        order = float(np.log2(max(coarse.max_residual, 1e-300) / fine.max_residual))
    else:
        order = float("inf")
    kv = [f"seed = {runsec['seed']}"]
    kv += [f"audit_coarse_max_residual = {fmt(coarse.max_residual)}",
           f"audit_fine_max_residual = {fmt(fine.max_residual)}",
           f"audit_observed_order = {fmt(order)}"]
    text = [
        "energy balance audit",
        f"  residual at dt: {fmt(coarse.max_residual)}",
        f"  residual at dt/2: {fmt(fine.max_residual)}",
        f"  observed order: {fmt(order)}",
    ]
    write_reports(args.out, kv, text)
    return EXIT_OK


def _sweep_rows(result):
    return [(k, v, n, d, x) for k, v, n, d, x in result.rows()]


def cmd_counterexample(args):
    ctx = _load(args, need=("counterexample",))
    runsec = ctx["run"]
    spec = ctx["cex"]
    mat = build_materials(spec)
    a1 = check_A1(mat, nsamples=runsec["nsamples"])
    refused = False
    try:
        omega_bound(mat, nsamples=min(runsec["nsamples"], 512))
    except CertificateRefusedError:
        refused = True
    result = divergence_sweep(spec, nquad=runsec["nquad"])
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "sweep.csv"),
              ("k", "form_value", "x_norm", "deriv_term", "xprime_term"),
              _sweep_rows(result))
    reproduced = (not a1.passed) and refused and result.strictly_increasing
    kv = [f"seed = {runsec['seed']}"]
    kv += a1.lines() + result.lines()
    kv += [f"certificate_refused = {fmt(refused)}",
           f"counterexample_reproduced = {fmt(reproduced)}"]
    text = [
        "divergence construction",
        f"  ratio assumption fails: {'yes' if not a1.passed else 'NO'}",
        f"  certificate refused: {'yes' if refused else 'NO'}",
        f"  form values strictly increasing: {'yes' if result.strictly_increasing else 'NO'}",
        f"  linear fit: slope {fmt(result.slope)}, r2 {fmt(result.r2)}",
    ]
    write_reports(args.out, kv, text)
    return EXIT_OK if reproduced else EXIT_CHECK_FAILED


def cmd_sweep(args):
    ctx = _load(args, need=("counterexample",))
    result = divergence_sweep(ctx["cex"], nquad=ctx["run"]["nquad"])
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "sweep.csv"),
              ("k", "form_value", "x_norm", "deriv_term", "xprime_term"),
              _sweep_rows(result))
    write_reports(args.out,
                  [f"seed = {ctx['run']['seed']}"] + result.lines(),
                  ["divergence sweep written to sweep.csv"])
    return EXIT_OK


_COMMANDS = {
    "check": cmd_check,
    "omega": cmd_omega,
    "resolvent": cmd_resolvent,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "counterexample": cmd_counterexample,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="phiface",
        description="Coupled conservation-law panels with a (moving) interface:"
                    " checks, certificates, simulations, and the divergence sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PhifaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
