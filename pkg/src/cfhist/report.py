"""Deterministic text/CSV/JSON rendering of analyses, sweeps and evolutions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from . import __version__
from .histories import HistoryFamily, gram_matrix, probability
from .protocols import CircuitModel, MichelsonConfig, MziConfig, evolve, queries
from .statespace import ZERO_TOL
from .sweep import SweepResult

TOOL = "cfhist"
CONVENTION = (
    "real rotations: beam splitter a->cos(t)a+sin(t)b, b->-sin(t)a+cos(t)b, "
    "reflectivity cos^2(t); rotator H->cos(t)H+sin(t)V; PBS/routes are permutations; "
    "absorbers route to loss channels"
)
AMPLITUDE_CUTOFF = 1e-12
PROBABILITY_SLACK = 1e-10


class ReportValidationError(RuntimeError):
    """A computed quantity broke an invariant; indicates a bug, not bad input."""


def fmt(x: float) -> str:
    """12 significant digits; lowercase scientific below 1e-4."""
    x = float(x)
    if x == 0.0:
        return "0"
    if abs(x) < 1e-4:
        return format(x, ".11e")
    return format(x, ".12g")


def num(x: float) -> float | int:
    """JSON number with the same rounding as :func:`fmt`."""
    v = float(fmt(x))
    return 0 if v == 0 else v


def model_params(model: CircuitModel) -> dict[str, Any]:
    cfg = model.config
    if isinstance(cfg, MziConfig):
        return {
            "reflectivity_outer": num(cfg.reflectivity_outer),
            "reflectivity_inner": num(cfg.reflectivity_inner),
            "theta_outer": num(cfg.theta_outer),
            "theta_inner": num(cfg.theta_inner),
        }
    assert isinstance(cfg, MichelsonConfig)
    return {
        "M": int(cfg.M),
        "N": int(cfg.N),
        "bob_blocks": bool(cfg.bob_blocks),
        "outer_cycles": int(cfg.outer_cycles_built),
    }


def provenance(tol: float) -> dict[str, Any]:
    return {"tool": TOOL, "version": __version__, "tolerance": tol, "convention": CONVENTION}


@dataclass(frozen=True)
class ReportDocument:
    data: dict[str, Any]

    @property
    def verdict(self) -> str:
        return self.data["verdict"]


def analyze(model: CircuitModel, family: HistoryFamily, tol: float = ZERO_TOL) -> ReportDocument:
    rep = gram_matrix(family, tol)
    rows = []
    for h, n in zip(family.histories, rep.norms):
        rows.append(
            {"history": list(family.labels(h)), "norm": num(n), "flagged": family.is_flagged(h)}
        )
    shown = [r for r in rows if not r["flagged"]]
    verdict = "CONSISTENT" if rep.consistent else f"INCONSISTENT(max_offdiag={fmt(rep.max_offdiag)})"
    data: dict[str, Any] = {
        "model": {"name": model.kind, "params": model_params(model)},
        "family": family.name,
        "history_count": len(rows),
        "shown_count": len(shown),
        "zero_chain_kets_shown": sum(1 for r in shown if r["norm"] < AMPLITUDE_CUTOFF),
        "max_offdiag": num(rep.max_offdiag),
        "consistent": rep.consistent,
        "verdict": verdict,
        "histories": rows,
        "probabilities": None,
        "note": None,
        "provenance": provenance(tol),
    }
    if rep.consistent:
        table = []
        final = family.slots[-1]
        for f, label in enumerate(final.labels):
            p = probability(family, lambda h, f=f: h.final == f, None, tol, rep)
            table.append({"event": label, "value": num(p)})
        for q in queries(family):
            try:
                p = probability(family, q.predicate, q.condition, tol, rep)
            except ValueError:
                table.append({"event": q.name, "value": None})
                continue
            table.append({"event": q.name, "value": num(p)})
        for row in table:
            v = row["value"]
            if v is not None and not -PROBABILITY_SLACK <= v <= 1 + PROBABILITY_SLACK:
                raise ReportValidationError(f"probability {v} for {row['event']} outside [0, 1]")
        data["probabilities"] = table
    else:
        data["note"] = "probabilities are meaningless for an inconsistent family"
    return ReportDocument(data)


def render_analysis(doc: ReportDocument, fmt_name: str) -> str:
    d = doc.data
    if fmt_name == "json":
        return json.dumps(d, indent=2, sort_keys=False) + "\n"
    if fmt_name == "csv":
        lines = ["history,norm,flagged"]
        for r in d["histories"]:
            lines.append(f"{' '.join(r['history'])},{fmt(r['norm'])},{int(r['flagged'])}")
        lines.append(f"verdict,{d['verdict'].split('(')[0]},{fmt(d['max_offdiag'])}")
        return "\n".join(lines) + "\n"
    params = " ".join(f"{k}={_plain(v)}" for k, v in d["model"]["params"].items())
    prov = d["provenance"]
    lines = [
        f"{prov['tool']} {prov['version']}",
        f"model: {d['model']['name']} {params}",
        f"family: {d['family']}  histories: {d['history_count']} ({d['shown_count']} shown)",
        f"tolerance: {fmt(prov['tolerance'])}",
        f"convention: {prov['convention']}",
        f"VERDICT: {d['verdict']}",
        f"max_offdiag: {fmt(d['max_offdiag'])}",
        "chain kets:",
    ]
    for r in d["histories"]:
        if not r["flagged"]:
            lines.append(f"  |{', '.join(r['history'])}>  norm={fmt(r['norm'])}")
    lines.append(f"zero chain kets: {d['zero_chain_kets_shown']} of {d['shown_count']}")
    if d["probabilities"] is None:
        lines.append(f"probabilities: {d['note']}")
    else:
        lines.append("probabilities:")
        for row in d["probabilities"]:
            v = "undefined (zero conditioning mass)" if row["value"] is None else fmt(row["value"])
            lines.append(f"  P({row['event']}) = {v}")
    return "\n".join(lines) + "\n"


def _plain(v: Any) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def render_sweep(result: SweepResult, family_name: str, fmt_name: str) -> str:
    if fmt_name == "json":
        data = {
            "family": family_name,
            "points": [
                {"reflectivity": num(p.reflectivity), "max_offdiag": num(p.max_offdiag),
                 "consistent": p.consistent}
                for p in result.points
            ],
            "crossings": [
                {"reflectivity": num(c.reflectivity), "max_offdiag": num(c.max_offdiag)}
                for c in result.crossings
            ],
            "provenance": provenance(result.tolerance),
        }
        return json.dumps(data, indent=2) + "\n"
    lines = ["reflectivity,max_offdiag,consistent"]
    lines += [f"{fmt(p.reflectivity)},{fmt(p.max_offdiag)},{int(p.consistent)}" for p in result.points]
    lines += [f"crossing,{fmt(c.reflectivity)},{fmt(c.max_offdiag)}" for c in result.crossings]
    if fmt_name == "text":
        lines.insert(0, f"# {TOOL} {__version__} sweep family={family_name} tol={fmt(result.tolerance)}")
        lines.append(f"# crossings: {len(result.crossings)}")
    return "\n".join(lines) + "\n"


def evolution(model: CircuitModel) -> dict[str, Any]:
    times = []
    for label, state in zip(model.time_labels, evolve(model)):
        entries = [
            {"channel": bv.channel, "polarization": bv.polarization, "re": num(a.real),
             "im": num(a.imag), "probability": num(abs(a) ** 2)}
            for bv, a in state.items(AMPLITUDE_CUTOFF)
        ]
        times.append({"time": label, "norm": num(state.norm()), "entries": entries})
    return {
        "model": {"name": model.kind, "params": model_params(model)},
        "times": times,
        "provenance": provenance(AMPLITUDE_CUTOFF),
    }


def render_evolution(data: dict[str, Any], fmt_name: str) -> str:
    if fmt_name == "json":
        return json.dumps(data, indent=2) + "\n"
    lines = ["time,channel,polarization,re,im"]
    for t in data["times"]:
        for e in t["entries"]:
            lines.append(f"{t['time']},{e['channel']},{e['polarization']},{fmt(e['re'])},{fmt(e['im'])}")
    if fmt_name == "text":
        lines = [f"{TOOL} {__version__} evolve {data['model']['name']}"]
        for t in data["times"]:
            lines.append(f"{t['time']}: norm={fmt(t['norm'])}")
            for e in t["entries"]:
                lines.append(
                    f"  ({e['channel']},{e['polarization']}) {fmt(e['re'])}{'+' if e['im'] >= 0 else '-'}"
                    f"{fmt(abs(e['im']))}i  |amp|^2={fmt(e['probability'])}"
                )
    return "\n".join(lines) + "\n"


def probability_table(doc: ReportDocument) -> dict[str, float | None]:
    return {r["event"]: r["value"] for r in (doc.data["probabilities"] or [])}
