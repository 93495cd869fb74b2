"""Retrieval failure metrics (DRM, span recall) with k-sweeps and statistics.

DRM (document retrieval mismatch) is the proportion of top-k retrieved chunks
that do not originate from any gold-evidence document; a query-level variant
(share of queries with at least one mismatched chunk) is emitted alongside.
Span recall counts (gold span, retrieved chunk) pairs with same-document
character overlap, divided by the number of gold spans; multiple chunks
covering one span push it above 1.0 by design.

Sweeps evaluate nested ranking prefixes, so one retrieval pass per query
serves every k. Confidence intervals come from seeded percentile bootstrap;
min-max ranges across the resampled means are reported alongside, labeled
distinctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lexrag.corpus import QueryRecord
from lexrag import kernels
from lexrag.retriever import RetrievalContext, RetrievalResult
from lexrag.stats import bonferroni, bootstrap_ci, bootstrap_minmax, paired_delta_ci, paired_ttest

DEFAULT_KS = [1, 2, 4, 8, 16, 32, 64]


def chunk_doc_id(chunk_id: str) -> str:
    """Document part of a chunk id (``doc_id#ordinal``)."""
    return chunk_id.rsplit("#", 1)[0]


def drm(result: RetrievalResult, gold_docs: set[str], k: int,
        doc_of: dict[str, str] | None = None) -> float:
    """Proportion of the top-min(k, |ranked|) chunks from non-gold documents."""
    if not gold_docs:
        raise ValueError("gold_docs must be nonempty")
    if not result.ranked:
        raise ValueError("DRM is undefined for an empty ranking")
    top = result.ranked[:min(k, len(result.ranked))]
    mismatched = 0
    for ranked_chunk in top:
        doc = (doc_of or {}).get(ranked_chunk.chunk_id) or chunk_doc_id(ranked_chunk.chunk_id)
        if doc not in gold_docs:
            mismatched += 1
    return mismatched / len(top)


def span_recall(result: RetrievalResult, gold_spans, chunk_table: dict[str, tuple[str, int, int]],
                k: int) -> float:
    """Overlapping (gold span, top-k chunk) pair count divided by span count."""
    if not gold_spans:
        raise ValueError("gold_spans must be nonempty")
    top = result.ranked[:min(k, len(result.ranked))]
    doc_codes: dict[str, int] = {}

    def code(doc_id: str) -> int:
        return doc_codes.setdefault(doc_id, len(doc_codes))

    span_docs = np.array([code(s.doc_id) for s in gold_spans], dtype=np.int64)
    span_starts = np.array([s.start for s in gold_spans], dtype=np.int64)
    span_ends = np.array([s.end for s in gold_spans], dtype=np.int64)

    chunk_docs, chunk_starts, chunk_ends = [], [], []
    for ranked_chunk in top:
        entry = chunk_table.get(ranked_chunk.chunk_id)
        if entry is None:
            continue
        doc_id, start, end = entry
        chunk_docs.append(code(doc_id))
        chunk_starts.append(start)
        chunk_ends.append(end)
    pairs = kernels.overlap_pairs(
        span_docs, span_starts, span_ends,
        np.array(chunk_docs, dtype=np.int64),
        np.array(chunk_starts, dtype=np.int64),
        np.array(chunk_ends, dtype=np.int64))
    return pairs / len(gold_spans)


@dataclass
class PairedComparison:
    metric: str
    k: int
    delta_mean: float
    delta_ci: tuple[float, float]
    p_value: float
    p_adjusted: float
    n: int
    degenerate_variance: bool = False

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "k": self.k,
            "delta_mean": self.delta_mean,
            "delta_ci": list(self.delta_ci),
            "p_value": self.p_value,
            "p_adjusted": self.p_adjusted,
            "n": self.n,
            "degenerate_variance": self.degenerate_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairedComparison":
        return cls(metric=d["metric"], k=d["k"], delta_mean=d["delta_mean"],
                   delta_ci=tuple(d["delta_ci"]), p_value=d["p_value"],
                   p_adjusted=d["p_adjusted"], n=d["n"],
                   degenerate_variance=d.get("degenerate_variance", False))


@dataclass
class MetricReport:
    dataset: str
    variant: str
    ks: list[int]
    per_k: dict[int, dict[str, object]] = field(default_factory=dict)
    per_query: dict[str, dict[str, dict[int, float]]] = field(default_factory=dict)
    excluded: list[dict] = field(default_factory=list)
    comparisons: list[PairedComparison] = field(default_factory=list)
    bootstrap_iterations: int = 10000
    bootstrap_seed: int = 0

    def query_values(self, metric: str, k: int) -> dict[str, float]:
        return {qid: per_metric[metric][k] for qid, per_metric in self.per_query.items()}

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "variant": self.variant,
            "ks": self.ks,
            "per_k": {str(k): v for k, v in self.per_k.items()},
            "per_query": {
                qid: {metric: {str(k): val for k, val in by_k.items()}
                      for metric, by_k in metrics.items()}
                for qid, metrics in self.per_query.items()
            },
            "excluded": self.excluded,
            "comparisons": [c.to_dict() for c in self.comparisons],
            "bootstrap_iterations": self.bootstrap_iterations,
            "bootstrap_seed": self.bootstrap_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            dataset=d["dataset"],
            variant=d["variant"],
            ks=list(d["ks"]),
            per_k={int(k): v for k, v in d["per_k"].items()},
            per_query={
                qid: {metric: {int(k): val for k, val in by_k.items()}
                      for metric, by_k in metrics.items()}
                for qid, metrics in d["per_query"].items()
            },
            excluded=list(d.get("excluded", [])),
            comparisons=[PairedComparison.from_dict(c) for c in d.get("comparisons", [])],
            bootstrap_iterations=d.get("bootstrap_iterations", 10000),
            bootstrap_seed=d.get("bootstrap_seed", 0),
        )


def sweep(records: list[QueryRecord], ctx: RetrievalContext, ks: list[int] | None = None,
          dataset: str = "", variant: str = "baseline", seed: int = 0,
          iterations: int = 10000) -> MetricReport:
    """Evaluate DRM and span recall for every query at every k.

    Queries whose gold documents never appear in the indexed corpus, or whose
    retrieval comes back empty, are excluded and logged in the report.
    """
    ks = sorted(ks or DEFAULT_KS)
    report = MetricReport(dataset=dataset, variant=variant, ks=ks,
                          bootstrap_iterations=iterations, bootstrap_seed=seed)
    corpus_docs = {doc_id for doc_id, _, _ in ctx.chunk_table.values()}
    doc_of = {cid: entry[0] for cid, entry in ctx.chunk_table.items()}
    max_k = max(ks)

    for record in records:
        if not record.gold_spans:
            report.excluded.append({"query_id": record.query_id, "reason": "no_gold_spans"})
            continue
        gold_docs = {s.doc_id for s in record.gold_spans}
        if not (gold_docs & corpus_docs):
            report.excluded.append({"query_id": record.query_id, "reason": "no_resolvable_gold_docs"})
            continue
        result = ctx.retrieve(record.question, query_id=record.query_id)
        result = RetrievalResult(query_id=result.query_id,
                                 ranked=result.ranked[:max_k], k=max_k)
        if not result.ranked:
            report.excluded.append({"query_id": record.query_id, "reason": "empty_ranking"})
            continue
        drm_by_k = {k: drm(result, gold_docs, k, doc_of=doc_of) for k in ks}
        recall_by_k = {k: span_recall(result, record.gold_spans, ctx.chunk_table, k)
                       for k in ks}
        report.per_query[record.query_id] = {"drm": drm_by_k, "span_recall": recall_by_k}

    for k in ks:
        entry: dict[str, object] = {}
        for metric in ("drm", "span_recall"):
            values = [report.per_query[qid][metric][k] for qid in report.per_query]
            if not values:
                entry[f"{metric}_mean"] = None
                continue
            arr = np.asarray(values, dtype=np.float64)
            entry[f"{metric}_mean"] = float(arr.mean())
            entry[f"{metric}_ci"] = list(bootstrap_ci(arr, iterations=iterations, seed=seed))
            entry[f"{metric}_minmax"] = list(bootstrap_minmax(arr, iterations=iterations, seed=seed))
        drm_values = [report.per_query[qid]["drm"][k] for qid in report.per_query]
        if drm_values:
            entry["drm_query_mean"] = float(np.mean([1.0 if v > 0 else 0.0 for v in drm_values]))
        report.per_k[k] = entry
    return report


def compare_reports(baseline: MetricReport, enhanced: MetricReport,
                    metrics: tuple[str, ...] = ("drm", "span_recall"),
                    iterations: int = 10000, seed: int = 0) -> list[PairedComparison]:
    """Paired per-query comparison over shared queries: delta = enhanced - baseline.

    p-values are Bonferroni-adjusted with m = (number of shared k settings) x
    (number of metrics); m is recoverable from the output length.
    """
    shared_queries = sorted(set(baseline.per_query) & set(enhanced.per_query))
    shared_ks = sorted(set(baseline.ks) & set(enhanced.ks))
    if not shared_queries or not shared_ks:
        return []
    m = len(shared_ks) * len(metrics)
    comparisons = []
    for metric in metrics:
        for k in shared_ks:
            base_vals = np.array([baseline.per_query[q][metric][k] for q in shared_queries])
            enh_vals = np.array([enhanced.per_query[q][metric][k] for q in shared_queries])
            deltas = enh_vals - base_vals
            if len(shared_queries) >= 2:
                t, p = paired_ttest(enh_vals, base_vals)
            else:
                t, p = 0.0, 1.0
            comparisons.append(PairedComparison(
                metric=metric,
                k=k,
                delta_mean=float(deltas.mean()),
                delta_ci=paired_delta_ci(deltas, iterations=iterations, seed=seed),
                p_value=p,
                p_adjusted=bonferroni(p, m),
                n=len(shared_queries),
                degenerate_variance=math.isinf(t),
            ))
    return comparisons


def render_table(report: MetricReport) -> str:
    """Per-k grid: mean with CI bounds in parentheses, one row per metric."""
    ks = report.ks
    header = ["Metric".ljust(24)] + [f"k={k}" for k in ks]
    lines = [f"dataset={report.dataset} variant={report.variant}"]
    rows = []
    for metric, label, scale in (("drm", "DRM (%)", 100.0),
                                 ("span_recall", "Span Recall", 1.0)):
        cells = []
        for k in ks:
            entry = report.per_k.get(k, {})
            mean = entry.get(f"{metric}_mean")
            ci = entry.get(f"{metric}_ci")
            if mean is None:
                cells.append("n/a")
            elif scale == 100.0:
                cells.append(f"{mean * scale:.1f} ({ci[0] * scale:.1f}-{ci[1] * scale:.1f})")
            else:
                cells.append(f"{mean:.3f} ({ci[0]:.3f}-{ci[1]:.3f})")
        rows.append([label.ljust(24)] + cells)
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines)


def render_comparison_table(comparisons: list[PairedComparison]) -> str:
    lines = [f"{'metric':<14}{'k':>4}  {'delta':>9}  {'95% CI':>20}  "
             f"{'p':>10}  {'p_adj':>10}"]
    for c in comparisons:
        ci = f"[{c.delta_ci[0]:+.4f}, {c.delta_ci[1]:+.4f}]"
        flag = " *" if c.degenerate_variance else ""
        lines.append(f"{c.metric:<14}{c.k:>4}  {c.delta_mean:>+9.4f}  {ci:>20}  "
                     f"{c.p_value:>10.4g}  {c.p_adjusted:>10.4g}{flag}")
    if any(c.degenerate_variance for c in comparisons):
        lines.append("* zero-variance differences; t degenerate")
    return "\n".join(lines)
