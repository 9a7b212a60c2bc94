"""Experiment runner CLI: run, compare, list-specs.

``run`` parses a YAML config, executes the selected pipelines in dependency
order, and writes the long-format CSV, a JSON summary, witness-set
sidecars, and figures into the output directory.  The exit status is
nonzero iff any asserted inequality failed.
"""

from __future__ import annotations

import math
import os
import sys
import time

import click
import yaml

from .domain import (DomainSpec, PerimeterMode, build_grid, builtin_specs,
                     load_spec)
from .decomposition import DecompositionError, decompose
from .estimator import (BruteForceBudgetError, counterexample_comb,
                        hk_bruteforce, hk_local_search, hk_upper,
                        p_to_one_sweep, verify_bilateral)
from .fields import _pval
from .plots import field_figure, hk_curve_figure, p_trend_figure
from .reporting import (RunRecord, compare as compare_records, config_hash,
                        write_csv, write_summary, write_witness)
from .spectrum import first_eigenpair, save_eigenpair, spectrum_p2
from .sweep import sweep

PIPELINES = ("eig", "sweep", "decompose", "hk", "verify", "comb", "p1sweep")


class ConfigError(click.ClickException):
    pass


def _resolve_spec(entry) -> DomainSpec:
    if isinstance(entry, dict):
        return DomainSpec.from_dict(entry)
    if isinstance(entry, str):
        if entry in builtin_specs():
            return builtin_specs()[entry]
        if os.path.exists(entry):
            return load_spec(entry)
        raise ConfigError(f"spec '{entry}' is neither a builtin nor a file")
    raise ConfigError(f"cannot interpret spec entry of type {type(entry).__name__}")


def _parse_config(path: str, mode_override: str | None) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for field in ("spec", "pipelines"):
        if field not in raw:
            raise ConfigError(f"{path}: missing required field '{field}'")
    cfg = {
        "spec": raw["spec"],
        "resolutions": [int(r) for r in raw.get("resolutions", [64])],
        "p": [float(p) for p in raw.get("p", [2.0])],
        "k": [int(k) for k in raw.get("k", [1])],
        "mode": str(mode_override or raw.get("mode", "dirichlet")),
        "pipelines": list(raw.get("pipelines", [])),
        "tolerances": dict(raw.get("tolerances", {})),
        "comb": dict(raw.get("comb", {})),
    }
    if any(r < 1 for r in cfg["resolutions"]):
        raise ConfigError(f"{path}: resolutions must be positive")
    if not cfg["k"]:
        raise ConfigError(f"{path}: k range must be nonempty")
    bad = [p for p in cfg["pipelines"] if p not in PIPELINES]
    if bad:
        raise ConfigError(f"{path}: unknown pipelines {bad}; choose from {PIPELINES}")
    if cfg["mode"] not in ("dirichlet", "relative"):
        raise ConfigError(f"{path}: mode must be dirichlet or relative")
    return cfg


@click.group()
def main():
    """Grid Cheeger-constant and p-Laplacian experiment runner."""


@main.command("list-specs")
def list_specs():
    """List the built-in domain specs."""
    for name, spec in builtin_specs().items():
        click.echo(f"{name}: n={spec.dim}, boxes={len(spec.boxes)}, "
                   f"|Omega|={spec.volume():g}, convex={spec.convex_hint}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="YAML experiment config.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory.")
@click.option("--threads", default=1, show_default=True,
              help="Worker hint (pipelines are deterministic regardless).")
@click.option("--mode", "mode_override",
              type=click.Choice(["dirichlet", "relative"]), default=None,
              help="Override the config's perimeter mode.")
@click.option("--plots/--no-plots", default=True, show_default=True,
              help="Render figures alongside the CSV.")
def run(config_path, out_dir, threads, mode_override, plots):
    """Execute the pipelines selected in the config."""
    cfg = _parse_config(config_path, mode_override)
    record = RunRecord(config=cfg, config_hash=config_hash(cfg))
    os.makedirs(out_dir, exist_ok=True)
    wit_dir = os.path.join(out_dir, "witnesses")
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(wit_dir, exist_ok=True)
    if plots:
        os.makedirs(fig_dir, exist_ok=True)

    spec = _resolve_spec(cfg["spec"])
    mode = PerimeterMode(cfg["mode"])
    stages = [p for p in PIPELINES if p in cfg["pipelines"]]

    for stage in stages:
        t0 = time.perf_counter()
        _run_stage(stage, spec, mode, cfg, record, out_dir, wit_dir,
                   fig_dir if plots else None)
        record.timings[stage] = time.perf_counter() - t0

    write_csv(record, os.path.join(out_dir, "results.csv"))
    write_summary(record, os.path.join(out_dir, "summary.json"))
    for f in record.flags:
        state = "pass" if f.passed else "FAIL"
        click.echo(f"[{state}] {f.name}: lhs={f.lhs:g} rhs={f.rhs:g}")
    click.echo(f"wrote {os.path.join(out_dir, 'results.csv')}")
    if not record.all_passed:
        sys.exit(1)


def _run_stage(stage, spec, mode, cfg, record, out_dir, wit_dir, fig_dir):
    md = mode.value
    if stage == "comb":
        comb_cfg = cfg["comb"]
        teeth = int(comb_cfg.get("teeth", 4))
        widths = [float(w) for w in comb_cfg.get("widths",
                                                 [0.5, 0.375, 0.25, 0.125])]
        room = tuple(comb_cfg.get("room", (2.0, 0.5)))
        res = max(cfg["resolutions"])
        result = counterexample_comb(teeth, widths, room, res)
        name = result["spec"].name
        for row in result["rows"]:
            k = row["k"]
            record.add(name, res, 2.0, k, "relative", "h_k_rel_upper",
                       row["h_k_rel_upper"])
            record.add(name, res, 2.0, k, "relative", "lambda_k_p2",
                       row["lambda_k_p2"])
            record.add(name, res, 2.0, k, "relative", "lambda_over_h2",
                       row["ratio"])
        record.flag("comb_ratio_strictly_increasing",
                    1.0 if result["ratio_strictly_increasing"] else 0.0, 1.0,
                    result["ratio_strictly_increasing"])
        return

    if stage == "p1sweep":
        res = max(cfg["resolutions"])
        grid = build_grid(spec, res)
        ps = sorted(cfg["p"], reverse=True)
        result = p_to_one_sweep(grid, ps, mode)
        for row in result["rows"]:
            if "lambda1" in row:
                record.add(spec.name, res, row["p"], 1, md, "lambda1",
                           row["lambda1"])
                if "classical_lower" in row:
                    record.flag(f"classical_cheeger_p={row['p']:g}",
                                row["lambda1"],
                                row["classical_lower"] * 0.9,
                                row["classical_ok"])
        record.flag("lambda1_monotone_decreasing_in_p",
                    1.0 if result["monotone_decreasing"] else 0.0, 1.0,
                    result["monotone_decreasing"])
        if fig_dir:
            ok = [r for r in result["rows"] if "lambda1" in r]
            p_trend_figure([r["p"] for r in ok], [r["lambda1"] for r in ok],
                           result["h1"],
                           os.path.join(fig_dir, f"{spec.name}_p_trend.png"),
                           title=f"{spec.name}: p -> 1")
        return

    if stage == "verify":
        p = cfg["p"][0]
        k_max = max(cfg["k"])
        result = verify_bilateral(spec, cfg["resolutions"], p, k_max, mode)
        for row in result["rows"]:
            for quantity in ("h_upper", "h_local", "h_part", "h_exact",
                             "faber_krahn", "lambda_k_p2", "h_best"):
                if quantity in row and not math.isnan(row[quantity]):
                    record.add(row["spec"], row["resolution"], row["p"],
                               row["k"], md, quantity, row[quantity])
        s = result["summary"]
        record.flag("hk_slope_matches_1_over_n", s["slope"], 1.0 / spec.dim,
                    s["slope_ok"])
        record.flag("hk_p_over_lambda_band", s["ratio_band"], 4.0,
                    s["ratio_band_ok"])
        if fig_dir:
            finest = max(cfg["resolutions"])
            sub = [r for r in result["rows"] if r["resolution"] == finest]
            hk_curve_figure([r["k"] for r in sub],
                            [r["h_upper"] for r in sub],
                            os.path.join(fig_dir, f"{spec.name}_hk_scaling.png"),
                            lowers=[r["faber_krahn"] for r in sub],
                            exact=[r["h_exact"] for r in sub],
                            title=f"{spec.name}: h_k scaling")
        return

    # per (resolution, p, k) stages
    for res in cfg["resolutions"]:
        grid = build_grid(spec, res)
        for p in cfg["p"]:
            eig = first_eigenpair(grid, p)
            if stage == "eig":
                record.add(spec.name, res, p, 1, md, "lambda1", eig.lam)
                record.add(spec.name, res, p, 1, md, "eig_iterations",
                           eig.iterations)
                prefix = os.path.join(out_dir,
                                      f"{spec.name}_res{res}_p{p:g}_eig")
                save_eigenpair(eig, prefix, spec.name, res)
                if fig_dir:
                    field_figure(grid, eig.field,
                                 os.path.join(fig_dir,
                                              f"{spec.name}_res{res}_p{p:g}_eigfield.png"),
                                 title=f"{spec.name} first eigenfunction, p={p:g}")
                continue
            if stage == "sweep":
                sw = sweep(grid, eig.field, p, mode)
                for quantity, value in (("t_opt", sw.t_opt), ("phi", sw.phi),
                                        ("bound", sw.bound), ("slack", sw.slack)):
                    record.add(spec.name, res, p, 1, md, quantity, value)
                record.flag(f"sweep_bound_res{res}_p{p:g}", sw.phi,
                            sw.bound * sw.slack, sw.phi <= sw.bound * sw.slack)
                continue
            for k in cfg["k"]:
                if stage == "decompose":
                    try:
                        fam = decompose(grid, eig.field, p, k, mode=mode)
                    except DecompositionError as exc:
                        record.flag(f"decompose_res{res}_p{p:g}_k{k}", 0.0, 1.0,
                                    False)
                        click.echo(f"decompose failed: {exc}", err=True)
                        continue
                    cert = fam.certificate
                    for quantity, value in (
                            ("delta", cert.delta), ("Delta", cert.Delta),
                            ("epsilon", cert.epsilon), ("W", cert.W),
                            ("lemma31_bound", cert.lemma31_bound),
                            ("lemma32_bound", cert.lemma32_bound),
                            ("theorem34_bound", cert.theorem34_bound)):
                        record.add(spec.name, res, p, k, md, quantity, value)
                    record.flag(f"certificate_res{res}_p{p:g}_k{k}",
                                cert.theorem34_bound, 4.0 * cert.lemma31_bound,
                                cert.theorem34_bound <= 4.0 * cert.lemma31_bound)
                elif stage == "hk":
                    rep = hk_upper(grid, p, k, mode, eig=eig)
                    wit_name = f"{spec.name}_res{res}_p{p:g}_k{k}_{md}_hk.txt"
                    write_witness(
                        [i for w in rep.witnesses for i in w.indices],
                        os.path.join(wit_dir, wit_name))
                    record.add(spec.name, res, p, k, md, "h_k_upper",
                               rep.h_k_upper, wit_name)
                    record.add(spec.name, res, p, k, md, "c_eff", rep.c_eff)
                    record.add(spec.name, res, p, k, md, "h1_ref", rep.h1_ref)
                    for check in rep.checks:
                        record.flag(f"{check.name}_res{res}_p{p:g}_k{k}",
                                    check.lhs, check.rhs, check.passed)
                    try:
                        exact, wits = hk_bruteforce(grid, k, mode)
                        record.add(spec.name, res, p, k, md, "h_k_exact", exact)
                        record.flag(f"sandwich_res{res}_p{p:g}_k{k}", exact,
                                    rep.h_k_upper, exact <= rep.h_k_upper)
                    except BruteForceBudgetError:
                        pass


@main.command("compare")
@click.argument("baseline", type=click.Path(exists=True))
@click.argument("current", type=click.Path(exists=True))
@click.option("--tol", default=1e-9, show_default=True,
              help="Relative drift tolerance per quantity.")
def compare_cmd(baseline, current, tol):
    """Diff two run summaries (summary.json files)."""
    try:
        result = compare_records(baseline, current, tol)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    for reg in result["regressions"]:
        if reg["kind"] == "missing":
            click.echo(f"REGRESSION missing: {reg['key']}")
        else:
            click.echo(f"REGRESSION drift {reg['rel']:.3g}: {reg['key']}")
    for key in result["added"]:
        click.echo(f"new: {key}")
    if result["ok"]:
        click.echo("no regressions")
    else:
        sys.exit(1)


if __name__ == "__main__":
    main()
