"""Cohort summaries, paired-delta tables, role counts, case extracts, and file output."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .answerer import ModelResponse, TraceRecord
from .metrics import METRIC_NAMES, DeltaVector, MetricVector
from .runner import RunRecord, RunSet
from .stats import (
    BootstrapResult,
    PairedDelta,
    SynergySummary,
    bootstrap_mean,
    format_p,
    paired_bootstrap,
    significance_stars,
    synergy_stats,
)
from .taxonomy import RoleLabel

RUNSET_SCHEMA = 1

METRIC_LABELS = {
    "correct": "Correct.",
    "answer_f1": "Ans. F1",
    "grounding": "Ground.",
    "conf_error": "Conf. Err.",
    "trace_div": "Trace Div.",
    "evidence_div": "Evid. Div.",
}


class ReportError(RuntimeError):
    pass


@dataclass
class Summary:
    study: str
    metrics: list[str]
    conditions: dict[str, dict[str, BootstrapResult]]
    deltas: dict[str, dict[str, PairedDelta]]
    roles: dict[str, dict[str, int]]
    counts: dict[str, dict[str, int]]
    synergy: SynergySummary | None = None
    cases: dict[str, list[dict]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# run-set (de)serialisation


def _record_to_dict(r: RunRecord) -> dict:
    d = asdict(r)
    d["role_flags"] = list(r.role_flags)
    return d


def _response_from(d: dict | None) -> ModelResponse | None:
    if d is None:
        return None
    return ModelResponse(
        answer=d["answer"],
        confidence=d["confidence"],
        used_chunk_ids=tuple(d["used_chunk_ids"]),
        brief_reason=d["brief_reason"],
        unknown_ids=tuple(d["unknown_ids"]),
    )


def _record_from(d: dict) -> RunRecord:
    d = dict(d)
    if d.get("trace") is not None:
        t = dict(d["trace"])
        t["provided_evidence_ids"] = tuple(t["provided_evidence_ids"])
        t["response"] = _response_from(t["response"])
        d["trace"] = TraceRecord(**t)
    if d.get("metrics") is not None:
        d["metrics"] = MetricVector(**d["metrics"])
    if d.get("delta") is not None:
        d["delta"] = DeltaVector(**d["delta"])
    d["role_flags"] = tuple(d.get("role_flags", ()))
    return RunRecord(**d)


def runset_to_dict(rs: RunSet, summary: Summary | None = None) -> dict:
    out: dict[str, Any] = {
        "schema": RUNSET_SCHEMA,
        "study": rs.study,
        "arms": rs.arms,
        "config": rs.config,
        "records": [_record_to_dict(r) for r in rs.records],
    }
    if summary is not None:
        out["summary"] = summary_to_dict(summary)
    return out


def runset_from_dict(data: dict) -> RunSet:
    if data.get("schema") != RUNSET_SCHEMA:
        raise ReportError(f"unsupported run-set schema {data.get('schema')!r}")
    return RunSet(
        study=data["study"],
        config=data["config"],
        records=[_record_from(r) for r in data["records"]],
        arms=list(data["arms"]),
    )


def load_runset(path: str | Path) -> RunSet:
    return runset_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def summary_to_dict(s: Summary) -> dict:
    return {
        "study": s.study,
        "metrics": s.metrics,
        "conditions": {a: {m: asdict(b) for m, b in ms.items()} for a, ms in s.conditions.items()},
        "deltas": {a: {m: asdict(p) for m, p in ms.items()} for a, ms in s.deltas.items()},
        "roles": s.roles,
        "counts": s.counts,
        "synergy": asdict(s.synergy) if s.synergy else None,
        "cases": s.cases,
    }


# ---------------------------------------------------------------------------
# summaries


def _metric(r: RunRecord, name: str) -> float:
    if name == "evidence_div":
        return float(r.evidence_div or 0.0)
    return float(getattr(r.metrics, name))


def study_metrics(study: str) -> list[str]:
    names = list(METRIC_NAMES)
    if study == "dup-position":
        names.append("evidence_div")
    return names


def _paired(rs: RunSet, arm: str) -> list[tuple[RunRecord, RunRecord]]:
    originals = {r.example_id: r for r in rs.by_arm("original") if r.ok}
    return [(originals[r.example_id], r) for r in rs.by_arm(arm) if r.ok and r.example_id in originals]


def synergy_summary(rs: RunSet, eps: float | None = None) -> SynergySummary | None:
    eps = eps if eps is not None else rs.config.get("thresholds", {}).get("eps_delta", 0.05)
    arms = ("remove:support_1", "remove:support_2", "joint_remove")
    if not all(a in rs.arms for a in arms):
        return None
    ok = {a: {r.example_id: r for r in rs.by_arm(a) if r.ok} for a in ("original", *arms)}
    ids = [r.example_id for r in rs.by_arm("original") if all(r.example_id in ok[a] for a in ok)]
    if not ids:
        return None
    drops = [
        [ok["original"][i].metrics.answer_f1 - ok[a][i].metrics.answer_f1 for i in ids] for a in arms
    ]
    return synergy_stats(*drops, eps=eps)


def extract_cases(rs: RunSet, n_per_role: int = 3) -> dict[str, list[dict]]:
    """Up to `n_per_role` exemplars per role, strongest first."""
    originals = {r.example_id: r for r in rs.by_arm("original") if r.ok}
    by_role: dict[str, list[RunRecord]] = {label.value: [] for label in RoleLabel}
    for r in rs.records:
        if r.ok and r.role and r.example_id in originals:
            by_role[r.role].append(r)

    def strength(r: RunRecord) -> tuple:
        d = r.delta
        if r.role == RoleLabel.CONSTRUCTIVE.value:
            return (-d.d_correct, -d.d_grounding, r.example_id, r.arm)
        if r.role == RoleLabel.DISTRACTIVE.value:
            return (-d.trace_div, -d.d_correct, r.example_id, r.arm)
        if r.role == RoleLabel.CONFIDENCE_DISTORTING.value:
            return (-abs(d.d_conf_error), r.example_id, r.arm)
        if r.role == RoleLabel.REDUNDANT.value:
            return (d.trace_div, r.example_id, r.arm)
        return (-d.trace_div, r.example_id, r.arm)

    cases: dict[str, list[dict]] = {}
    for role, members in by_role.items():
        picked = sorted(members, key=strength)[:n_per_role]
        cases[role] = [
            {
                "example_id": r.example_id,
                "arm": r.arm,
                "question": r.question,
                "gold_answer": r.gold_answer,
                "original_answer": originals[r.example_id].trace.response.answer,
                "original_confidence": originals[r.example_id].trace.response.confidence,
                "perturbed_answer": r.trace.response.answer,
                "perturbed_confidence": r.trace.response.confidence,
                "delta": asdict(r.delta),
                "trace_div": r.delta.trace_div,
                "role_flags": list(r.role_flags),
            }
            for r in picked
        ]
    return cases


def summarize(rs: RunSet, n_cases: int = 3) -> Summary:
    cfg = rs.config
    resamples = int(cfg.get("resamples", 5000))
    seed = int(cfg.get("seed", 42))
    level = float(cfg.get("ci_level", 0.95))
    if not any(r.ok for r in rs.by_arm("original")):
        raise ReportError("run-set has no successful original runs")
    metrics = study_metrics(rs.study)

    conditions: dict[str, dict[str, BootstrapResult]] = {}
    counts: dict[str, dict[str, int]] = {}
    for arm in rs.arms:
        recs = rs.by_arm(arm)
        status = Counter(r.status for r in recs)
        counts[arm] = {s: status.get(s, 0) for s in ("ok", "failed", "excluded")}
        ok = [r for r in recs if r.ok]
        if ok:
            conditions[arm] = {
                m: bootstrap_mean([_metric(r, m) for r in ok], resamples, seed, level, stream=("mean", arm, m))
                for m in metrics
            }

    deltas: dict[str, dict[str, PairedDelta]] = {}
    roles: dict[str, dict[str, int]] = {}
    for arm in rs.arms:
        if arm == "original":
            continue
        pairs = _paired(rs, arm)
        counts[arm]["paired"] = len(pairs)
        if pairs:
            deltas[arm] = {
                m: paired_bootstrap(
                    [_metric(o, m) for o, _ in pairs],
                    [_metric(p, m) for _, p in pairs],
                    resamples,
                    seed,
                    level,
                    stream=("delta", arm, m),
                )
                for m in metrics
            }
        hist = Counter(p.role for _, p in pairs)
        roles[arm] = {label.value: hist.get(label.value, 0) for label in RoleLabel}

    return Summary(
        study=rs.study,
        metrics=metrics,
        conditions=conditions,
        deltas=deltas,
        roles=roles,
        counts=counts,
        synergy=synergy_summary(rs),
        cases=extract_cases(rs, n_cases),
    )


# ---------------------------------------------------------------------------
# rendering


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _signed(x: float) -> str:
    s = f"{x:+.3f}"
    return "0.000" if s in ("+0.000", "-0.000") else s


def render_csv(s: Summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["study", "condition", "metric", "mean", "ci_low", "ci_high", "n"])
    for arm, ms in s.conditions.items():
        for m in s.metrics:
            b = ms[m]
            w.writerow([s.study, arm, m, repr(b.mean), repr(b.ci_low), repr(b.ci_high), b.n])
    return buf.getvalue()


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines


def render_markdown(s: Summary, rs: RunSet) -> str:
    out = [f"# Evidence intervention report: {s.study}", ""]
    n_orig = s.counts.get("original", {}).get("ok", 0)
    model = rs.records[0].model_name if rs.records else rs.config.get("model")
    out += [f"Model: `{model}`; "
            f"successful original runs: {n_orig}; bootstrap resamples: {rs.config.get('resamples')} "
            f"(seed {rs.config.get('seed')}).", ""]

    out += ["## Condition means", ""]
    header = ["Condition", *(METRIC_LABELS[m] for m in s.metrics), "n"]
    rows = []
    for arm, ms in s.conditions.items():
        rows.append([arm, *(_f(ms[m].mean) for m in s.metrics), str(ms[s.metrics[0]].n)])
    out += _table(header, rows) + [""]

    out += ["## Means with 95% bootstrap CIs", ""]
    rows = [[arm, *(f"{_f(ms[m].mean)} [{_f(ms[m].ci_low)}, {_f(ms[m].ci_high)}]" for m in s.metrics)]
            for arm, ms in s.conditions.items()]
    out += _table(["Condition", *(METRIC_LABELS[m] for m in s.metrics)], rows) + [""]

    if s.deltas:
        out += ["## Paired bootstrap deltas (original - intervention)", ""]
        rows = []
        for arm, ms in s.deltas.items():
            for m in s.metrics:
                p = ms[m]
                rows.append([f"original vs {arm}", METRIC_LABELS[m], _signed(p.delta_mean),
                             f"[{_f(p.ci_low)}, {_f(p.ci_high)}]",
                             format_p(p.p_two_sided) + significance_stars(p.p_two_sided), str(p.n)])
        out += _table(["Comparison", "Metric", "Delta", "95% CI", "p", "n"], rows) + [""]
        out += ["Significance: * p<.05, ** p<.01, *** p<.001.", ""]

    out += ["## Run counts", ""]
    rows = [[arm, str(c.get("ok", 0)), str(c.get("failed", 0)), str(c.get("excluded", 0)),
             str(c.get("paired", "-"))] for arm, c in s.counts.items()]
    out += _table(["Condition", "ok", "failed", "excluded", "paired"], rows) + [""]

    if s.roles:
        labels = [label.value for label in RoleLabel]
        out += ["## Evidence roles", ""]
        rows = [[arm, *(str(h[l]) for l in labels)] for arm, h in s.roles.items()]
        out += _table(["Intervention", *labels], rows) + [""]

    if s.synergy:
        sy = s.synergy
        out += ["## Two-support synergy", ""]
        out += _table(["Statistic", "Value"], [
            ["Mean F1 drop (support 1 only)", _f(sy.mean_drop_s1)],
            ["Mean F1 drop (support 2 only)", _f(sy.mean_drop_s2)],
            ["Mean F1 drop (both supports)", _f(sy.mean_drop_both)],
            ["Mean synergy over max single drop", _f(sy.mean_synergy_over_max)],
            ["% examples with positive synergy", f"{sy.pct_positive_synergy:.1f}%"],
            ["% strong complementary", f"{sy.pct_strong_complementary:.1f}%"],
            ["n eligible examples", str(sy.n_eligible)],
        ]) + [""]

    if any(s.cases.values()):
        out += ["## Case studies", ""]
        rows = []
        for role, cases in s.cases.items():
            for c in cases:
                tag = role + (" (+" + ",".join(c["role_flags"]) + ")" if c["role_flags"] else "")
                q = c["question"] if len(c["question"]) <= 80 else c["question"][:77] + "..."
                rows.append([tag, c["arm"], q.replace("|", "\\|"),
                             f"{c['original_answer']} ({c['original_confidence']:.1f})".replace("|", "\\|"),
                             f"{c['perturbed_answer']} ({c['perturbed_confidence']:.1f})".replace("|", "\\|"),
                             _signed(c["delta"]["d_correct"]), _f(c["trace_div"])])
        out += _table(["Role", "Condition", "Question", "Orig.", "Perturbed", "dCorr.", "Trace Div."], rows) + [""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# SVG figures


def _svg(width: int, height: int, body: list[str]) -> str:
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        *body,
        "</svg>",
        "",
    ])


PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3")


def bar_chart_svg(s: Summary) -> str:
    """Grouped bars (one group per metric, one bar per condition) with CI whiskers."""
    arms = list(s.conditions)
    metrics = s.metrics
    left, top, plot_h, group_w = 50, 30, 220, max(60, 18 * len(arms) + 20)
    width = left + group_w * len(metrics) + 160
    height = top + plot_h + 50
    bar_w = (group_w - 20) / max(1, len(arms))
    y = lambda v: top + plot_h * (1.0 - max(0.0, min(1.0, v)))  # noqa: E731
    body = [f'<line x1="{left}" y1="{top + plot_h}" x2="{left + group_w * len(metrics)}" '
            f'y2="{top + plot_h}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>']
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        body.append(f'<text x="{left - 6}" y="{y(tick) + 4:.1f}" text-anchor="end">{tick:.2f}</text>')
    for gi, m in enumerate(metrics):
        gx = left + gi * group_w + 10
        for ai, arm in enumerate(arms):
            b = s.conditions[arm][m]
            x = gx + ai * bar_w
            body.append(f'<rect x="{x:.1f}" y="{y(b.mean):.1f}" width="{bar_w - 2:.1f}" '
                        f'height="{top + plot_h - y(b.mean):.1f}" fill="{PALETTE[ai % len(PALETTE)]}"/>')
            cx = x + (bar_w - 2) / 2
            body.append(f'<line x1="{cx:.1f}" y1="{y(b.ci_low):.1f}" x2="{cx:.1f}" y2="{y(b.ci_high):.1f}" '
                        f'stroke="black"/>')
        body.append(f'<text x="{gx + (group_w - 20) / 2:.1f}" y="{top + plot_h + 16}" '
                    f'text-anchor="middle">{METRIC_LABELS[m]}</text>')
    lx = left + group_w * len(metrics) + 15
    for ai, arm in enumerate(arms):
        body.append(f'<rect x="{lx}" y="{top + ai * 18}" width="12" height="12" fill="{PALETTE[ai % len(PALETTE)]}"/>')
        body.append(f'<text x="{lx + 18}" y="{top + ai * 18 + 10}">{arm}</text>')
    return _svg(width, height, body)


def heatmap_svg(s: Summary) -> str:
    """Paired deltas as a diverging heatmap with significance stars."""
    arms = list(s.deltas)
    metrics = s.metrics
    cell_w, cell_h, left, top = 90, 30, 150, 40
    width, height = left + cell_w * len(metrics) + 20, top + cell_h * max(1, len(arms)) + 20
    body = []
    for mi, m in enumerate(metrics):
        body.append(f'<text x="{left + mi * cell_w + cell_w / 2}" y="{top - 10}" '
                    f'text-anchor="middle">{METRIC_LABELS[m]}</text>')
    for ai, arm in enumerate(arms):
        body.append(f'<text x="{left - 8}" y="{top + ai * cell_h + cell_h / 2 + 4}" '
                    f'text-anchor="end">orig vs {arm}</text>')
        for mi, m in enumerate(metrics):
            p = s.deltas[arm][m]
            v = max(-1.0, min(1.0, p.delta_mean))
            shade = int(255 * (1 - abs(v)))
            fill = f"rgb(255,{shade},{shade})" if v >= 0 else f"rgb({shade},{shade},255)"
            x, yy = left + mi * cell_w, top + ai * cell_h
            body.append(f'<rect x="{x}" y="{yy}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/>')
            body.append(f'<text x="{x + cell_w / 2}" y="{yy + cell_h / 2 + 4}" text-anchor="middle">'
                        f'{_signed(p.delta_mean)}{significance_stars(p.p_two_sided)}</text>')
    return _svg(width, height, body)


# ---------------------------------------------------------------------------
# output


def emit(rs: RunSet, fmt: str, path: str | Path, summary: Summary | None = None) -> Path:
    """Write one report format to `path`; serialisation is deterministic."""
    summary = summary or summarize(rs)
    path = Path(path)
    if fmt == "json":
        text = json.dumps(runset_to_dict(rs, summary), indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        text = render_csv(summary)
    elif fmt == "markdown":
        text = render_markdown(summary, rs)
    elif fmt == "svg-bars":
        text = bar_chart_svg(summary)
    elif fmt == "svg-heatmap":
        text = heatmap_svg(summary)
    else:
        raise ReportError(f"unknown report format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def write_reports(rs: RunSet, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    summary = summarize(rs)
    paths = {
        "json": emit(rs, "json", out / "runset.json", summary),
        "csv": emit(rs, "csv", out / "report.csv", summary),
        "markdown": emit(rs, "markdown", out / "report.md", summary),
        "bars": emit(rs, "svg-bars", out / "figures" / "conditions.svg", summary),
    }
    if summary.deltas:
        paths["heatmap"] = emit(rs, "svg-heatmap", out / "figures" / "deltas.svg", summary)
    return paths
