"""Aligned text tables for CLI output.

Rendering rounds to 3 decimals; the JSON artifacts keep full precision.
"""

from __future__ import annotations

import math

from .rd_continuity import DiffInDiscResult, RdContinuityResult
from .rd_local import RdLocalResult

__all__ = [
    "format_number",
    "render_table",
    "render_local_results",
    "render_continuity_results",
    "render_diffdisc_results",
    "render_descriptive",
    "render_group_compare",
    "render_balance",
    "render_density",
    "render_placebo",
    "render_frequency",
    "render_equilibrium",
]


def format_number(x, decimals: int = 3) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.{decimals}f}"
    return str(x)


def render_table(headers: list[str], rows: list[list[str]], title: str = "") -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for j, cell in enumerate(row):
            widths[j] = max(widths[j], len(cell))
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    lines.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _column_table(title: str, row_labels: list[str], columns: list[list[str]]) -> str:
    headers = [""] + [f"({i + 1})" for i in range(len(columns))]
    rows = [
        [label] + [col[i] for col in columns] for i, label in enumerate(row_labels)
    ]
    return render_table(headers, rows, title)


def render_local_results(title: str, results: list[RdLocalResult]) -> str:
    row_labels = [
        "Point estimate",
        "P-value",
        "Window",
        "Eff. no of obs. (treated / controls)",
    ]
    columns = [
        [
            format_number(r.estimate),
            format_number(r.p_value),
            str(r.window),
            f"{r.n_treated} / {r.n_control}",
        ]
        for r in results
    ]
    return _column_table(title, row_labels, columns)


def render_continuity_results(title: str, results: list[RdContinuityResult]) -> str:
    row_labels = [
        "Point estimate (SE)",
        "P-value (robust)",
        "Bandwidth",
        "Eff. no of obs. (treated / controls)",
        "Covariates",
    ]
    columns = []
    for r in results:
        lo, hi = r.rank_interval()
        columns.append(
            [
                f"{format_number(r.tau_conventional)} ({format_number(r.se_conventional)})",
                format_number(r.p_robust),
                f"[{lo}, {hi}]",
                f"{r.effective_n_treated} / {r.effective_n_control}",
                ", ".join(r.covariates_used) or "none",
            ]
        )
    return _column_table(title, row_labels, columns)


def render_diffdisc_results(title: str, results: list[DiffInDiscResult]) -> str:
    row_labels = [
        "Point estimate (SE)",
        "P-value (conventional)",
        "Bandwidth",
        "Eff. no of obs. (treated / controls)",
        "Covariates",
    ]
    columns = []
    for r in results:
        lo = math.ceil(r.cutoff - r.bandwidth)
        hi = math.floor(r.cutoff + r.bandwidth)
        columns.append(
            [
                f"{format_number(r.delta_tau)} ({format_number(r.se)})",
                format_number(r.p_conventional),
                f"[{lo}, {hi}]",
                f"{r.effective_n_treated} / {r.effective_n_control}",
                ", ".join(r.covariates_used) or "none",
            ]
        )
    return _column_table(title, row_labels, columns)


def render_descriptive(summary: dict, title: str = "Descriptive statistics") -> str:
    headers = ["Variable", "Regime", "Mean", "SD", "Min", "Max", "N"]
    rows = []
    for regime, block in summary.items():
        for name, s in block["variables"].items():
            rows.append(
                [
                    name,
                    regime,
                    format_number(s["mean"]),
                    format_number(s["sd"]),
                    format_number(s["min"]),
                    format_number(s["max"]),
                    str(s["n"]),
                ]
            )
    return render_table(headers, rows, title)


def render_group_compare(rows: list[dict], title: str = "Rank-group comparison") -> str:
    headers = [
        "Ranks", "Mean before (SD)", "Mean after (SD)", "Difference", "P-value",
    ]
    body = []
    for row in rows:
        if row["flagged"]:
            body.append([row["bin"], "-", "-", "-", "-"])
            continue
        body.append(
            [
                row["bin"],
                f"{format_number(row['mean_before'])} ({format_number(row['sd_before'])})",
                f"{format_number(row['mean_after'])} ({format_number(row['sd_after'])})",
                format_number(row["difference"]),
                format_number(row["p_value"]),
            ]
        )
    return render_table(headers, body, title)


def render_balance(rows: list[dict], title: str = "Balance of predetermined covariates") -> str:
    headers = ["Variable", "Window / bandwidth", "Point estimate", "P-value", "Eff. obs."]
    body = [
        [
            r["covariate"],
            r["spec"],
            format_number(r["estimate"]),
            format_number(r["p_value"]),
            f"{r['n_treated']} / {r['n_control']}",
        ]
        for r in rows
    ]
    return render_table(headers, body, title)


def render_density(rows: list[dict], title: str = "Running-variable density tests") -> str:
    headers = ["Window", "Treated", "Controls", "Binomial p"]
    body = [
        [
            r["window"],
            str(r["n_treated"]),
            str(r["n_control"]),
            format_number(r["p_value"]),
        ]
        for r in rows
    ]
    return render_table(headers, body, title)


def render_placebo(rows: list[dict], title: str = "Placebo cutoffs") -> str:
    headers = ["Cutoff", "Spec", "Point estimate", "P-value", "Eff. obs."]
    body = []
    for r in rows:
        spec = r["spec"] + ("" if r["balance_ok"] else "*")
        body.append(
            [
                format_number(r["cutoff"], 1),
                spec,
                format_number(r["estimate"]),
                format_number(r["p_value"]),
                f"{r['n_treated']} / {r['n_control']}",
            ]
        )
    note = "* window does not pass covariate balance tests\n"
    return render_table(headers, body, title) + note


def render_frequency(rows: list[dict], title: str = "Mass points around the cutoff") -> str:
    headers = ["Rank", "Status", "N before", "N after"]
    body = [
        [str(r["rank"]), r["status"], str(r["n_before"]), str(r["n_after"])]
        for r in rows
    ]
    return render_table(headers, body, title)


def render_equilibrium(sol, params) -> str:
    pairs = [
        ("prize W", params.W),
        ("loss penalty d", params.d),
        ("win bonus u", params.u),
        ("salience s", params.s),
        ("stake v1", sol.v1),
        ("stake v2", sol.v2),
        ("support upper bound", sol.support_upper),
        ("atom at zero (player 2)", sol.atom_at_zero),
        ("win probability p1", sol.p1),
        ("win probability p2", sol.p2),
        ("expected effort 1 (from CDF)", sol.effort1_derived),
        ("expected effort 2 (from CDF)", sol.effort2_derived),
        ("expected effort 1 (printed form)", sol.effort1_printed),
        ("expected effort 2 (printed form)", sol.effort2_printed),
        ("equilibrium payoff 1", sol.payoff1),
        ("equilibrium payoff 2", sol.payoff2),
    ]
    width = max(len(k) for k, _ in pairs)
    lines = ["Equilibrium solution"]
    for k, v in pairs:
        lines.append(f"  {k.ljust(width)}  {format_number(float(v), 4)}")
    return "\n".join(lines) + "\n"
