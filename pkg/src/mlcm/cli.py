"""Config-driven command-line interface.

One structured config file (YAML; JSON works too since JSON is valid YAML)
drives every stage; each subcommand reads the sections it needs, writes
CSV/JSON artifacts into its own subdirectory of the output directory, and
embeds the config's SHA-256 hash and the master seed in its summary so any
artifact can be traced to the exact inputs that produced it. Scalar config
fields can be overridden per run with ``--set section.key=value``.

Subcommands: design, estimate, placebo, bootstrap, cate, simulate, report.
"""

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from ._parallel import THREADS_ENV, resolve_threads
from .bootstrap import bootstrap_ate, bootstrap_cate
from .cate_tree import describe_tree, grow_cate_tree
from .diagnostics import error_distribution, placebo_dataset, placebo_test
from .effects import att_asa
from .exceptions import ConfigError, MlcmError
from .model_selection import default_grids, panel_cv, pilot_select_features
from .panel import (
    LagSpec,
    PanelDataset,
    PanelSchema,
    design_columns,
    load_panel_csv,
)
from .pipeline import (
    PipelineConfig,
    run_frozen_pipeline,
    run_pipeline,
)
from .simulation import (
    SimConfig,
    run_monte_carlo,
    scenario_grid,
)

__all__ = ["main"]

COMMANDS = ("design", "estimate", "placebo", "bootstrap", "cate",
            "simulate", "report")


# --------------------------------------------------------------------------
# config plumbing
# --------------------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(
            f"config file {path} must hold a mapping at the top level, got "
            f"{type(data).__name__}"
        )
    return data


def _apply_set(config: dict, assignment: str) -> None:
    """Apply one ``--set dotted.path=value`` override (YAML-parsed value)."""
    if "=" not in assignment:
        raise ConfigError(
            f"--set needs key=value, got {assignment!r}"
        )
    key, _, raw = assignment.partition("=")
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"--set key {key!r} has empty path segments")
    node = config
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = {}
            node[part] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(
                f"--set {key}: {part} is not a section"
            )
        node = nxt
    node[parts[-1]] = yaml.safe_load(raw)


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def _section(config: dict, name: str, *, required: bool) -> Optional[dict]:
    sec = config.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"{name}: section is required for this command")
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: must be a mapping")
    return sec


def _field(section: dict, sec_name: str, key: str, *, required: bool = False,
           default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{sec_name}.{key}: field is required")
        return default
    return section[key]


def _load_dataset(config: dict) -> PanelDataset:
    data = _section(config, "data", required=True)
    path = _field(data, "data", "csv", required=True)
    schema = PanelSchema(
        t0=_field(data, "data", "t0", required=True),
        unit_col=_field(data, "data", "unit_col", default="unit"),
        time_col=_field(data, "data", "time_col", default="time"),
        outcome_col=_field(data, "data", "outcome_col", default="outcome"),
        covariate_cols=_field(data, "data", "covariates"),
        categorical_cols=_field(data, "data", "categorical", default=()),
        treated_col=_field(data, "data", "treated_col"),
        drop_incomplete_units=bool(
            _field(data, "data", "drop_incomplete_units", default=False)
        ),
    )
    return load_panel_csv(path, schema)


def _lags_from(section: dict, sec_name: str) -> LagSpec:
    raw = _field(section, sec_name, "lags", default={"p": 1})
    if not isinstance(raw, dict):
        raise ConfigError(f"{sec_name}.lags: must be a mapping of p/q/...")
    unknown = set(raw) - {"p", "q", "contemporaneous"}
    if unknown:
        raise ConfigError(
            f"{sec_name}.lags: unknown keys {sorted(unknown)}"
        )
    return LagSpec(
        p=int(raw.get("p", 1)),
        q=int(raw.get("q", 0)),
        contemporaneous=bool(raw.get("contemporaneous", False)),
    )


def _candidates_from(section: dict, sec_name: str, n_features: int):
    raw = _field(section, sec_name, "candidates")
    if raw is None:
        return default_grids(n_features)
    if not isinstance(raw, dict):
        raise ConfigError(f"{sec_name}.candidates: must map learner -> grids")
    from .learners import LEARNER_KINDS

    for kind, grids in raw.items():
        if kind not in LEARNER_KINDS:
            raise ConfigError(
                f"{sec_name}.candidates.{kind}: unknown learner (expected "
                f"one of {sorted(LEARNER_KINDS)})"
            )
        if not isinstance(grids, list) or not all(
            isinstance(g, dict) for g in grids
        ):
            raise ConfigError(
                f"{sec_name}.candidates.{kind}: must be a list of "
                f"hyperparameter mappings"
            )
    return raw


def _pipeline_config(config: dict, ds: PanelDataset, seed: int) -> PipelineConfig:
    design = _section(config, "design", required=True)
    estimate = _section(config, "estimate", required=False) or {}
    lags = _lags_from(design, "design")
    n_features = len(design_columns(ds, lags)[0])
    keep = _field(design, "design", "pilot_keep")
    return PipelineConfig(
        lags=lags,
        candidates=_candidates_from(design, "design", n_features),
        K=_field(estimate, "estimate", "K"),
        covariate_mode=_field(
            estimate, "estimate", "covariate_mode", default="lags_only"
        ),
        pilot_keep=tuple(keep) if keep else None,
        rolling_window=_field(design, "design", "rolling_window"),
        seed=seed,
    )


# --------------------------------------------------------------------------
# artifact plumbing
# --------------------------------------------------------------------------

def _outdir(base: Path, command: str) -> Path:
    path = base / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_summary(path: Path, command: str, payload: dict, config_hash: str,
                   seed: int) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "config_sha256": config_hash,
        "seed": seed,
    }
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_design(config, out, seed, threads) -> None:
    ds = _load_dataset(config)
    pc = _pipeline_config(config, ds, seed)
    pilot = None
    if pc.pilot_keep is not None:
        pilot = pilot_select_features(ds, pc.lags, pc.pilot_keep, seed=seed)
    report = panel_cv(
        ds, pc.lags, pc.candidates,
        pilot=pilot, rolling_window=pc.rolling_window, seed=seed,
    )
    dest = _outdir(out, "design")
    report.to_csv(dest / "cv_report.csv")
    _write_summary(dest / "cv_report.json", "design", report.summary_dict(),
                   _config_hash(config), seed)
    winner = report.winner
    print(f"winner: {winner.kind} {dict(winner.params)} "
          f"(mse {winner.aggregate_mse:.6g} over folds {list(report.folds)})")
    print(f"wrote {dest / 'cv_report.csv'} and {dest / 'cv_report.json'}")


def _estimate_result(config, ds, out, seed):
    """PipelineResult from the config's design section, or from a stored
    design artifact when the config has none."""
    if config.get("design") is not None:
        return run_pipeline(ds, _pipeline_config(config, ds, seed))
    artifact = out / "design" / "cv_report.json"
    if not artifact.exists():
        raise ConfigError(
            "estimate needs a design: add a 'design' section to the config "
            f"or run the design command first (no report at {artifact})"
        )
    with open(artifact) as fh:
        art = json.load(fh)
    lags = LagSpec(
        p=art["lags"]["p"],
        q=art["lags"]["q"],
        contemporaneous=art["lags"]["contemporaneous"],
    )
    estimate = _section(config, "estimate", required=False) or {}
    pc = PipelineConfig(
        lags=lags,
        K=_field(estimate, "estimate", "K"),
        covariate_mode=_field(
            estimate, "estimate", "covariate_mode", default="lags_only"
        ),
        seed=seed,
    )
    winner = art["winner"]
    return run_frozen_pipeline(
        ds, pc, winner["kind"], winner["params"], winner["features"]
    )


def cmd_estimate(config, out, seed, threads) -> None:
    ds = _load_dataset(config)
    result = _estimate_result(config, ds, out, seed)
    dest = _outdir(out, "estimate")
    result.effects.to_csv(dest / "effects.csv")
    payload = result.summary_dict()
    if ds.treated is not None and 0 < int(ds.treated.sum()) < ds.n_units:
        att, asa = att_asa(result.effects, ds.treated.astype(bool))
        payload["att"] = [float(v) for v in att]
        payload["asa"] = [float(v) for v in asa]
    _write_summary(dest / "summary.json", "estimate", payload,
                   _config_hash(config), seed)
    ate = ", ".join(f"{v:.6g}" for v in result.effects.ate)
    print(f"ate per horizon: [{ate}]  "
          f"temporal: {result.effects.temporal_ate:.6g}")
    print(f"wrote {dest / 'effects.csv'} and {dest / 'summary.json'}")


def cmd_placebo(config, out, seed, threads) -> None:
    ds = _load_dataset(config)
    pc = _pipeline_config(config, ds, seed)
    placebo_sec = _section(config, "placebo", required=False) or {}
    n_holdout = int(_field(placebo_sec, "placebo", "n_holdout", default=1))
    result = placebo_test(ds, pc, n_holdout=n_holdout)
    dest = _outdir(out, "placebo")
    result.effects.to_csv(dest / "placebo_effects.csv")
    dist = error_distribution(result.effects)
    dist.histogram_csv(dest / "histogram.csv")
    payload = result.summary_dict()
    payload["error_distribution"] = dist.summary_dict()

    boot_sec = _section(config, "bootstrap", required=False)
    if boot_sec is not None:
        sub = placebo_dataset(ds, n_holdout)
        boot = bootstrap_ate(
            sub, pc.replace(K=n_holdout),
            B=int(_field(boot_sec, "bootstrap", "B", default=200)),
            alpha=float(_field(boot_sec, "bootstrap", "alpha", default=0.05)),
            mode=_field(boot_sec, "bootstrap", "mode",
                        default="full_pipeline"),
            seed=seed,
            threads=threads,
        )
        payload["interval"] = {
            "lower": [float(v) for v in np.atleast_1d(boot.lower)],
            "upper": [float(v) for v in np.atleast_1d(boot.upper)],
            "alpha": boot.alpha,
            "mode": boot.mode,
            "B": boot.B,
        }
    _write_summary(dest / "summary.json", "placebo", payload,
                   _config_hash(config), seed)
    ate = ", ".join(f"{v:.6g}" for v in result.effects.ate)
    print(f"placebo ate at t0'={result.pseudo_t0}: [{ate}]")
    print(f"wrote {dest / 'placebo_effects.csv'}, {dest / 'histogram.csv'}, "
          f"{dest / 'summary.json'}")


def cmd_bootstrap(config, out, seed, threads) -> None:
    ds = _load_dataset(config)
    pc = _pipeline_config(config, ds, seed)
    boot_sec = _section(config, "bootstrap", required=False) or {}
    point = run_pipeline(ds, pc)
    boot = bootstrap_ate(
        ds, pc,
        B=int(_field(boot_sec, "bootstrap", "B", default=1000)),
        alpha=float(_field(boot_sec, "bootstrap", "alpha", default=0.05)),
        mode=_field(boot_sec, "bootstrap", "mode", default="full_pipeline"),
        seed=seed,
        threads=threads,
        point_result=point,
    )
    dest = _outdir(out, "bootstrap")
    boot.replicates_csv(dest / "replicates.csv")
    payload = boot.summary_dict()
    payload["temporal"] = boot.temporal_result().summary_dict()
    _write_summary(dest / "summary.json", "bootstrap", payload,
                   _config_hash(config), seed)
    pairs = ", ".join(
        f"[{lo:.6g}, {hi:.6g}]" for lo, hi in zip(boot.lower, boot.upper)
    )
    print(f"{int((1 - boot.alpha) * 100)}% intervals per horizon: {pairs} "
          f"({boot.mode}, B={boot.B}, failures={boot.n_failures})")
    print(f"wrote {dest / 'replicates.csv'} and {dest / 'summary.json'}")


def _moderator_matrix(ds: PanelDataset, names, at: str):
    idx = []
    for name in names:
        if name not in ds.covariate_names:
            raise ConfigError(
                f"cate.moderators: {name!r} is not a covariate "
                f"(have {list(ds.covariate_names)})"
            )
        idx.append(ds.covariate_names.index(name))
    if at == "pre_mean":
        H = ds.covariates[:, : ds.t0, :].mean(axis=1)[:, idx]
    elif at == "t0":
        H = ds.covariates[:, ds.t0 - 1, idx]
    else:
        raise ConfigError(
            f"cate.at: expected 'pre_mean' or 't0', got {at!r}"
        )
    return H, [ds.covariate_names[j] for j in idx]


def cmd_cate(config, out, seed, threads) -> None:
    ds = _load_dataset(config)
    result = _estimate_result(config, ds, out, seed)
    cate_sec = _section(config, "cate", required=True)
    moderators = _field(cate_sec, "cate", "moderators", required=True)
    at = _field(cate_sec, "cate", "at", default="pre_mean")
    horizon = _field(cate_sec, "cate", "horizon")
    H, names = _moderator_matrix(ds, moderators, at)
    if horizon is None:
        unit_effects = result.effects.individual.mean(axis=1)
        effect_label = "temporal_mean"
    else:
        k = int(horizon)
        if k not in result.effects.horizons:
            raise ConfigError(
                f"cate.horizon: {k} not in {result.effects.horizons}"
            )
        unit_effects = result.effects.individual[:, k - 1]
        effect_label = f"horizon_{k}"
    categorical = _field(cate_sec, "cate", "categorical", default=())
    tree = grow_cate_tree(
        unit_effects, H,
        min_node=_field(cate_sec, "cate", "min_node"),
        max_depth=_field(cate_sec, "cate", "max_depth", default=4),
        feature_names=names,
        categorical=categorical,
    )
    payload = {"effect": effect_label, "n_leaves": tree.n_leaves}
    boot_sec = _section(config, "bootstrap", required=False)
    if boot_sec is not None:
        cboot = bootstrap_cate(
            unit_effects, tree,
            B=int(_field(boot_sec, "bootstrap", "B", default=1000)),
            alpha=float(_field(boot_sec, "bootstrap", "alpha", default=0.05)),
            seed=seed,
        )
        payload["bootstrap"] = cboot.summary_dict()
    dest = _outdir(out, "cate")
    tree.to_json(dest / "tree.json")
    tree.leaf_csv(dest / "leaves.csv")
    payload["diagram"] = describe_tree(tree)
    _write_summary(dest / "summary.json", "cate", payload,
                   _config_hash(config), seed)
    print(describe_tree(tree))
    print(f"wrote {dest / 'tree.json'}, {dest / 'leaves.csv'}, "
          f"{dest / 'summary.json'}")


_SIM_FIELDS = {
    "N", "T", "t0", "phi", "sigma_eps", "sigma_u", "beta", "dgp",
    "effect_sd_multipliers", "x89_fixed_per_unit",
}


def cmd_simulate(config, out, seed, threads) -> None:
    sim_sec = _section(config, "simulate", required=True)
    R = int(_field(sim_sec, "simulate", "R", default=100))
    B = int(_field(sim_sec, "simulate", "B", default=200))
    use_grid = bool(_field(sim_sec, "simulate", "grid", default=False))
    scenario_sec = _field(sim_sec, "simulate", "scenario", default={})
    if not isinstance(scenario_sec, dict):
        raise ConfigError("simulate.scenario: must be a mapping")
    unknown = set(scenario_sec) - _SIM_FIELDS
    if unknown:
        raise ConfigError(
            f"simulate.scenario: unknown fields {sorted(unknown)} "
            f"(expected among {sorted(_SIM_FIELDS)})"
        )
    if use_grid:
        configs = scenario_grid(
            dgp=scenario_sec.get("dgp", "linear"), seed=seed
        )
    else:
        try:
            configs = [SimConfig(seed=seed, **scenario_sec)]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"simulate.scenario: {exc}") from None

    est_sec = _field(sim_sec, "simulate", "estimation", default={})
    from .simulation import default_estimation_config

    est_config = default_estimation_config(seed=seed)
    if est_sec:
        if not isinstance(est_sec, dict):
            raise ConfigError("simulate.estimation: must be a mapping")
        overrides = {}
        if "lags" in est_sec:
            overrides["lags"] = _lags_from(est_sec, "simulate.estimation")
        if "covariate_mode" in est_sec:
            overrides["covariate_mode"] = est_sec["covariate_mode"]
        if "candidates" in est_sec:
            overrides["candidates"] = _candidates_from(
                est_sec, "simulate.estimation", 12
            )
        unknown = set(est_sec) - {"lags", "covariate_mode", "candidates"}
        if unknown:
            raise ConfigError(
                f"simulate.estimation: unknown fields {sorted(unknown)}"
            )
        est_config = est_config.replace(**overrides)

    dest = _outdir(out, "simulate")
    all_rows = []
    summaries = []
    for i, cfg in enumerate(configs):
        report = run_monte_carlo(cfg, R, est_config, B, threads=threads)
        report.raw_csv(dest / f"raw_{i}.csv")
        summaries.append(report.summary_dict())
        for row in report.rows:
            all_rows.append((report.scenario, row))
        line = "; ".join(
            f"h{r['horizon']}: bias {r['bias']:.4g} rel {r['rel_bias']:.4g} "
            f"cover {r['coverage']:.3g}"
            for r in report.rows
        )
        print(f"{report.scenario}: {line}")
    with open(dest / "mc_table.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scenario", "horizon", "true_ate", "bias", "rel_bias",
             "coverage", "R", "B"]
        )
        for scen, row in all_rows:
            writer.writerow([
                scen, row["horizon"], repr(row["true_ate"]),
                repr(row["bias"]), repr(row["rel_bias"]),
                repr(row["coverage"]), row["R"], row["B"],
            ])
    _write_summary(dest / "summary.json", "simulate",
                   {"scenarios": summaries}, _config_hash(config), seed)
    print(f"wrote {dest / 'mc_table.csv'} and {dest / 'summary.json'}")


def cmd_report(config, out, seed, threads) -> None:
    sections = {}
    tables = []
    for command in ("design", "estimate", "placebo", "bootstrap", "cate",
                    "simulate"):
        subdir = out / command
        for name in ("summary.json", "cv_report.json"):
            path = subdir / name
            if path.exists():
                with open(path) as fh:
                    sections[command] = json.load(fh)
                break
        if subdir.exists():
            tables.extend(
                str(p.relative_to(out)) for p in sorted(subdir.glob("*.csv"))
            )
    if not sections and not tables:
        raise MlcmError(
            f"nothing to report: no command artifacts under {out}"
        )
    dest = _outdir(out, "report")

    effects_csv = out / "estimate" / "effects.csv"
    if effects_csv.exists():
        values = []
        with open(effects_csv) as fh:
            for row in csv.DictReader(fh):
                values.append(float(row["effect"]))
        counts, edges = np.histogram(np.asarray(values), bins=20)
        with open(dest / "effect_histogram.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lower", "bin_upper", "count"])
            for i, c in enumerate(counts):
                writer.writerow([
                    repr(float(edges[i])), repr(float(edges[i + 1])), int(c)
                ])
        tables.append("report/effect_histogram.csv")

    _write_summary(dest / "summary.json", "report",
                   {"sections": sections, "tables": sorted(tables)},
                   _config_hash(config), seed)
    print(f"merged {len(sections)} command summaries and "
          f"{len(tables)} tables into {dest / 'summary.json'}")


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlcm",
        description=(
            "Panel treatment-effect estimation without a control group: "
            "counterfactual forecasting by competing learners."
        ),
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "design": "run the learner race and write the selection report",
        "estimate": "forecast counterfactuals and write effect tables",
        "placebo": "estimate fake effects at an earlier pseudo-intervention",
        "bootstrap": "confidence intervals by unit block bootstrap",
        "cate": "grow the effect-heterogeneity tree",
        "simulate": "Monte Carlo bias/coverage study on synthetic panels",
        "report": "merge artifacts in the output directory into one summary",
    }
    for command in COMMANDS:
        p = sub.add_parser(command, help=descriptions[command])
        p.add_argument("--config", "-c", default=None,
                       help="YAML/JSON config file (report: optional)")
        p.add_argument("--out", "-o", default=None,
                       help="output directory (default: config output_dir, "
                            "else ./mlcm_out)")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config's)")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker processes (default: config threads, "
                            f"else ${THREADS_ENV}, else 1); never changes "
                            f"results")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a scalar config field, e.g. "
                            "--set bootstrap.B=500 (repeatable)")
    return parser


_HANDLERS = {
    "design": cmd_design,
    "estimate": cmd_estimate,
    "placebo": cmd_placebo,
    "bootstrap": cmd_bootstrap,
    "cate": cmd_cate,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.command != "report":
                raise ConfigError(
                    f"{args.command} requires --config (a YAML/JSON file)"
                )
            config = {}
        else:
            config = _load_config(args.config)
        for assignment in args.set:
            _apply_set(config, assignment)
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        out = Path(
            args.out
            if args.out is not None
            else config.get("output_dir", "mlcm_out")
        )
        try:
            threads = args.threads
            if threads is None and "threads" in config:
                threads = int(config["threads"])
            threads = resolve_threads(threads)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"threads: {exc}") from None
        _HANDLERS[args.command](config, out, seed, threads)
        return 0
    except MlcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
