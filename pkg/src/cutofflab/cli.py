"""Command-line front door.

Subcommands: simulate | estimate | validate | replicate | equilibrium.
Exit codes: 0 success, 1 I/O failure, 2 bad flags / config / data file,
3 estimator failure (empty side, rank-deficient design, ...). Every
file-writing command records a run manifest next to its outputs; the
environment variable CUTOFFLAB_SEED overrides the config seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .contest import ContestParams, figure1_series, solve_equilibrium
from .data import (
    NUMERIC_FIELDS,
    Regime,
    descriptive_table,
    group_compare,
    load_csv,
    write_csv,
)
from .errors import (
    ConfigError,
    CutoffLabError,
    EmptySideError,
    EstimationError,
    InvalidParametersError,
    InvariantError,
    ParseError,
    SchemaError,
)
from .figures import save_figure1, save_group_compare_figure, save_rd_plot_figure
from .manifest import RunManifest, config_digest
from .rd_continuity import diff_in_disc, rd_continuity_estimate, rd_plot_data
from .rd_local import RdWindow, rd_local_estimate, select_window, window_from_half_width
from .simulator import SimulationConfig, load_config, simulate_dataset
from .tables import (
    render_balance,
    render_continuity_results,
    render_density,
    render_descriptive,
    render_diffdisc_results,
    render_equilibrium,
    render_frequency,
    render_group_compare,
    render_local_results,
    render_placebo,
)
from .validation import build_validation_report

DEFAULT_COVARIATES = ("wc_points_before", "previous_event_rank", "home_event")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3


def _env_seed() -> int | None:
    raw = os.environ.get("CUTOFFLAB_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CUTOFFLAB_SEED must be an integer, got {raw!r}")


def _resolve_config(path: str | None) -> SimulationConfig:
    config = load_config(path) if path else SimulationConfig()
    override = _env_seed()
    if override is not None:
        config = SimulationConfig(**{**config.to_dict(), "seed": override})
        config.validate()
    return config


def _parse_window(text: str, cutoff: float) -> RdWindow:
    try:
        lo, hi = text.split(":")
        return RdWindow(int(lo), int(hi), cutoff)
    except (ValueError, InvalidParametersError) as err:
        raise ConfigError(f"bad --window {text!r}: {err}")


def _parse_covariates(text: str | None):
    if not text:
        return None
    names = [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in NUMERIC_FIELDS:
            raise ConfigError(f"unknown covariate {name!r}")
    return names


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            clean = {
                k: ("" if isinstance(v, float) and v != v else v)
                for k, v in row.items()
            }
            writer.writerow(clean)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    config = _resolve_config(args.config)
    ds = simulate_dataset(config)
    out = Path(args.out)
    write_csv(ds, out)
    manifest = RunManifest(
        command="simulate",
        config_digest=config_digest(config.to_dict()),
        seed=config.seed,
        input_paths=[args.config] if args.config else [],
    )
    manifest.add_output(out)
    manifest.write(out.with_suffix(".manifest.json"))
    print(f"wrote {len(ds)} records to {out}")
    return EXIT_OK


def _load_filtered(args):
    ds = load_csv(args.data)
    regime = getattr(args, "regime", None)
    if regime:
        ds = ds.filter(regime=regime)
        if len(ds) == 0:
            raise EmptySideError(f"no records for regime {regime!r} in {args.data}")
    return ds


def cmd_estimate(args) -> int:
    if args.method == "diffdisc" and args.regime:
        raise ConfigError("--regime cannot be combined with method diffdisc")
    ds = _load_filtered(args)
    covariates = _parse_covariates(args.covariates)
    cutoff = args.cutoff

    if args.method == "local":
        if args.auto_window:
            window = select_window(
                ds,
                covariates or list(DEFAULT_COVARIATES),
                cutoff=cutoff,
                n_permutations=args.permutations,
                seed=args.seed,
            )
        elif args.window:
            window = _parse_window(args.window, cutoff)
        else:
            window = window_from_half_width(cutoff, 1)
        result = rd_local_estimate(
            ds, args.outcome, window, n_permutations=args.permutations, seed=args.seed
        )
        text = render_local_results(f"Local randomization RD on {args.outcome}", [result])
    elif args.method == "continuity":
        result = rd_continuity_estimate(
            ds, args.outcome, cutoff=cutoff, covariates=covariates, h=args.bandwidth
        )
        text = render_continuity_results(f"Continuity-based RD on {args.outcome}", [result])
    else:  # diffdisc
        result = diff_in_disc(
            ds, args.outcome, cutoff=cutoff, covariates=covariates, h=args.bandwidth
        )
        text = render_diffdisc_results(f"Difference in discontinuities on {args.outcome}", [result])

    print(text)
    payload = {
        "method": args.method,
        "outcome": args.outcome,
        "regime": getattr(args, "regime", None),
        "result": result.to_dict(),
    }
    if args.out:
        out = Path(args.out)
        _write_json(out, payload)
        manifest = RunManifest(
            command="estimate",
            config_digest=config_digest(
                {k: v for k, v in vars(args).items() if k != "func"}
            ),
            seed=args.seed,
            input_paths=[args.data],
        )
        manifest.add_output(out)
        manifest.write(out.with_suffix(".manifest.json"))
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    ds = load_csv(args.data)
    covariates = _parse_covariates(args.covariates) or list(DEFAULT_COVARIATES)
    cutoff = args.cutoff
    regimes = [args.regime] if args.regime else [
        r.value for r in Regime if len(ds.filter(regime=r)) > 0
    ]
    sections = {}
    texts = []
    for regime in regimes:
        sub = ds.filter(regime=regime)
        selected = select_window(
            sub, covariates, cutoff=cutoff,
            n_permutations=args.permutations, seed=args.seed,
        )
        windows = [window_from_half_width(cutoff, 1)]
        if (selected.lower, selected.upper) != (windows[0].lower, windows[0].upper):
            windows.append(selected)
        report = build_validation_report(
            sub, covariates, outcome=args.outcome, cutoff=cutoff, windows=windows,
            n_permutations=args.permutations, seed=args.seed,
        )
        sections[regime] = report.to_dict()
        texts.append(
            f"=== regime: {regime} (selected window {selected}) ===\n\n"
            + render_balance(report.balance_rows)
            + "\n"
            + render_density(report.density_tests)
            + "\n"
            + render_placebo(report.placebo_rows)
            + "\n"
            + render_frequency(report.frequency_rows)
        )
    text = "\n".join(texts)
    print(text)
    if args.out:
        out = Path(args.out)
        _write_json(out, sections)
        manifest = RunManifest(
            command="validate",
            config_digest=config_digest(
                {k: v for k, v in vars(args).items() if k != "func"}
            ),
            seed=args.seed,
            input_paths=[args.data],
        )
        manifest.add_output(out)
        manifest.write(out.with_suffix(".manifest.json"))
    return EXIT_OK


REPLICATE_OUTCOMES = ("advanced", "round1_distance_points", "round1_style_points")


def _distinct_windows(*windows: RdWindow) -> list[RdWindow]:
    seen = set()
    out = []
    for w in windows:
        key = (w.lower, w.upper)
        if key not in seen:
            seen.add(key)
            out.append(w)
    return out


def cmd_replicate(args) -> int:
    config = _resolve_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    perms = args.permutations
    seed = args.seed
    cutoff = config.cutoff

    manifest = RunManifest(
        command="replicate",
        config_digest=config_digest(config.to_dict()),
        seed=config.seed,
        input_paths=[args.config] if args.config else [],
    )

    def emit_text(name: str, text: str) -> Path:
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        manifest.add_output(path)
        return path

    def emit_json(name: str, payload) -> Path:
        path = out_dir / name
        _write_json(path, payload)
        manifest.add_output(path)
        return path

    ds = simulate_dataset(config)
    data_path = out_dir / "dataset.csv"
    write_csv(ds, data_path)
    manifest.add_output(data_path)

    summary = descriptive_table(ds)
    emit_json("descriptive.json", summary)
    emit_text("descriptive.txt", render_descriptive(summary))

    # rank-group comparisons between regimes (plot data + rendered figure)
    for outcome, label in (("advanced", "share advancing"), ("round1_total", "round-1 total")):
        rows = group_compare(ds, outcome)
        emit_json(f"group_compare_{outcome}.json", rows)
        emit_text(f"group_compare_{outcome}.txt", render_group_compare(rows))
        csv_path = out_dir / f"group_compare_{outcome}.csv"
        _write_rows_csv(
            csv_path,
            ["bin", "mean_before", "sd_before", "mean_after", "sd_after",
             "difference", "p_value"],
            rows,
        )
        manifest.add_output(csv_path)
        png_path = out_dir / f"group_compare_{outcome}.png"
        save_group_compare_figure(rows, label, png_path)
        manifest.add_output(png_path)

    regimes = [r.value for r in Regime if len(ds.filter(regime=r)) > 0]
    selected_windows = {}
    for regime in regimes:
        sub = ds.filter(regime=regime)
        selected_windows[regime] = select_window(
            sub, list(DEFAULT_COVARIATES), cutoff=cutoff,
            n_permutations=perms, seed=seed,
        )

    for outcome in REPLICATE_OUTCOMES:
        local_results = []
        local_payload = {}
        for regime in regimes:
            sub = ds.filter(regime=regime)
            windows = _distinct_windows(
                window_from_half_width(cutoff, 1),
                window_from_half_width(cutoff, 2),
                selected_windows[regime],
            )
            results = [
                rd_local_estimate(sub, outcome, w, n_permutations=perms, seed=seed)
                for w in windows
            ]
            local_results.extend(results)
            local_payload[regime] = [r.to_dict() for r in results]
        emit_json(f"local_{outcome}.json", local_payload)
        emit_text(
            f"local_{outcome}.txt",
            render_local_results(
                f"Local randomization RD on {outcome} "
                f"(columns: {', '.join(regimes)} x windows)",
                local_results,
            ),
        )

        cont_results = []
        cont_payload = {}
        for regime in regimes:
            sub = ds.filter(regime=regime)
            variants = [
                None,
                ["wc_points_before", "home_event"],
                ["wc_points_before", "home_event", "previous_event_rank"],
            ]
            results = [
                rd_continuity_estimate(sub, outcome, cutoff=cutoff, covariates=v)
                for v in variants
            ]
            cont_results.extend(results)
            cont_payload[regime] = [r.to_dict() for r in results]
        emit_json(f"continuity_{outcome}.json", cont_payload)
        emit_text(
            f"continuity_{outcome}.txt",
            render_continuity_results(
                f"Continuity-based RD on {outcome} "
                f"(columns: {', '.join(regimes)} x covariate sets)",
                cont_results,
            ),
        )

        if len(regimes) == 2:
            variants = [
                None,
                ["wc_points_before", "home_event"],
                ["wc_points_before", "home_event", "previous_event_rank"],
            ]
            dd_results = [
                diff_in_disc(ds, outcome, cutoff=cutoff, covariates=v) for v in variants
            ]
            emit_json(f"diffdisc_{outcome}.json", [r.to_dict() for r in dd_results])
            emit_text(
                f"diffdisc_{outcome}.txt",
                render_diffdisc_results(
                    f"Difference in discontinuities on {outcome}", dd_results
                ),
            )

    for regime in regimes:
        sub = ds.filter(regime=regime)
        report = build_validation_report(
            sub, list(DEFAULT_COVARIATES), outcome="advanced", cutoff=cutoff,
            windows=_distinct_windows(
                window_from_half_width(cutoff, 1), selected_windows[regime]
            ),
            n_permutations=perms, seed=seed,
        )
        emit_json(f"validation_{regime}.json", report.to_dict())
        emit_text(
            f"validation_{regime}.txt",
            render_balance(report.balance_rows)
            + "\n" + render_density(report.density_tests)
            + "\n" + render_placebo(report.placebo_rows)
            + "\n" + render_frequency(report.frequency_rows),
        )

        rows = rd_plot_data(sub, "advanced", cutoff, selected_windows[regime])
        csv_path = out_dir / f"rdplot_{regime}.csv"
        _write_rows_csv(
            csv_path,
            ["rank", "bin_mean", "ci_lo", "ci_hi", "poly_fit", "const_fit"],
            rows,
        )
        manifest.add_output(csv_path)
        png_path = out_dir / f"rdplot_{regime}.png"
        save_rd_plot_figure(rows, cutoff, f"share advancing ({regime})", png_path)
        manifest.add_output(png_path)

    digest = manifest.outputs_digest()
    digest_path = out_dir / "digest.txt"
    digest_path.write_text(digest + "\n", encoding="utf-8")
    manifest.add_output(digest_path)
    manifest.write(out_dir / "manifest.json")
    print(f"replicate run complete: {len(manifest.output_paths)} artifacts in {out_dir}")
    print(f"summary digest: {digest}")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    params = ContestParams(W=args.W, d=args.d, u=args.u, s=args.s)
    sol = solve_equilibrium(params)
    if args.json:
        payload = {
            "params": {"W": args.W, "d": args.d, "u": args.u, "s": args.s},
            "solution": {
                "v1": sol.v1, "v2": sol.v2,
                "support_upper": sol.support_upper,
                "atom_at_zero": sol.atom_at_zero,
                "payoff1": sol.payoff1, "payoff2": sol.payoff2,
                "p1": sol.p1, "p2": sol.p2,
                "effort1_derived": sol.effort1_derived,
                "effort2_derived": sol.effort2_derived,
                "effort1_printed": sol.effort1_printed,
                "effort2_printed": sol.effort2_printed,
            },
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(render_equilibrium(sol, params))
    if args.figure1:
        series = figure1_series(
            args.d, args.u,
            baseline_loss_slope=args.baseline_loss_slope,
            x_range=(args.x_min, args.x_max),
        )
        out = Path(args.figure1)
        rows = [
            {
                "x": x, "baseline": b, "pos_expect": p, "neg_expect": n,
            }
            for x, b, p, n in zip(series.x, series.baseline, series.pos_expect,
                                  series.neg_expect)
        ]
        _write_rows_csv(out, ["x", "baseline", "pos_expect", "neg_expect"], rows)
        save_figure1(series, out.with_suffix(".png"))
        print(f"wrote figure series to {out} (+ {out.with_suffix('.png').name})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutofflab",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic tournament dataset")
    p_sim.add_argument("--config", help="JSON config file (defaults used if omitted)")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate", help="run an RD estimator on a dataset CSV")
    p_est.add_argument("--data", required=True)
    p_est.add_argument("--outcome", default="advanced", choices=sorted(NUMERIC_FIELDS))
    p_est.add_argument("--method", required=True, choices=["local", "continuity", "diffdisc"])
    p_est.add_argument("--cutoff", type=float, default=30.5)
    p_est.add_argument("--window", help="explicit window lo:hi (method local)")
    p_est.add_argument("--auto-window", action="store_true",
                       help="select the window by covariate balance (method local)")
    p_est.add_argument("--bandwidth", type=float, help="override the MSE-optimal bandwidth")
    p_est.add_argument("--covariates", help="comma-separated covariate fields")
    p_est.add_argument("--permutations", type=int, default=10000)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.add_argument("--regime", choices=["before", "after"])
    p_est.add_argument("--out", help="write the JSON result here")
    p_est.set_defaults(func=cmd_estimate)

    p_val = sub.add_parser("validate", help="run the falsification battery")
    p_val.add_argument("--data", required=True)
    p_val.add_argument("--outcome", default="advanced", choices=sorted(NUMERIC_FIELDS))
    p_val.add_argument("--cutoff", type=float, default=30.5)
    p_val.add_argument("--covariates", help="comma-separated covariate fields")
    p_val.add_argument("--permutations", type=int, default=10000)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--regime", choices=["before", "after"])
    p_val.add_argument("--out", help="write the JSON report here")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("replicate", help="simulate + estimate + validate end to end")
    p_rep.add_argument("--config", help="JSON config file (defaults used if omitted)")
    p_rep.add_argument("--out-dir", required=True)
    p_rep.add_argument("--permutations", type=int, default=10000)
    p_rep.add_argument("--seed", type=int, default=0)
    p_rep.set_defaults(func=cmd_replicate)

    p_eq = sub.add_parser("equilibrium", help="solve and print the contest equilibrium")
    p_eq.add_argument("--W", type=float, default=1.0, help="prize value")
    p_eq.add_argument("--d", type=float, default=1.0, help="loss penalty")
    p_eq.add_argument("--u", type=float, default=0.0, help="win bonus")
    p_eq.add_argument("--s", type=int, default=1, choices=[0, 1], help="salience flag")
    p_eq.add_argument("--json", action="store_true")
    p_eq.add_argument("--figure1", help="write value-function series CSV (+ PNG) here")
    p_eq.add_argument("--baseline-loss-slope", type=float, default=2.0)
    p_eq.add_argument("--x-min", type=float, default=-2.0)
    p_eq.add_argument("--x-max", type=float, default=2.0)
    p_eq.set_defaults(func=cmd_equilibrium)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, SchemaError, InvariantError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptySideError, EstimationError, InvalidParametersError) as err:
        print(f"estimation error: {err}", file=sys.stderr)
        return EXIT_ESTIMATION
    except CutoffLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
