"""Event collection, per-time-window aggregation, and summary reporting.

Every quantity the experiment reports is recomputable from the raw
termination events: response times, windowed and effective commit rates,
commits per second, the degree of concurrency (summed service time of
committed transactions over elapsed time; values above 1 mean useful
parallelism), and abort rates split by reason.  All trace timestamps are
integer milliseconds; numbers always use a ``.`` decimal separator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .adaptation import compute_cr, compute_cr_eff

TERMINATION_COLUMNS = [
    "txn_id",
    "time_ms",
    "outcome",
    "abort_reason",
    "response_time_ms",
    "service_time_ms",
    "items",
]

TIMESERIES_COLUMNS = [
    "time_ms",
    "arrivals_cum",
    "commits_cum",
    "aborts_cum",
    "cr",
    "cr_eff",
    "rt_est",
    "current_class",
]

SUMMARY_COLUMNS = [
    "mean_rt_ms",
    "mean_cr",
    "std_cr",
    "mean_cr_eff",
    "tas",
    "commits_per_sec",
    "deg_conc",
    "abort_rate",
    "abort_rate_validation",
    "abort_rate_constraint",
    "abort_rate_deadlock",
    "abort_rate_reclassification",
]

ABORT_REASONS = ("validation", "constraint", "deadlock", "reclassification")


@dataclass(frozen=True)
class TerminationEvent:
    """One terminated transaction as the metrics layer sees it.

    ``service_time_ms`` is the modeled busy time (waits and disconnect
    excluded), so it never exceeds the response time.
    """

    txn_id: int
    time_ms: int
    outcome: str  # "commit" | "abort"
    abort_reason: Optional[str]
    response_time_ms: int
    service_time_ms: int
    items: tuple[tuple[str, str], ...] = ()  # (item id, class letter)

    def __post_init__(self) -> None:
        if not 0 <= self.service_time_ms <= self.response_time_ms:
            raise ValueError("need response_time >= service_time >= 0")


@dataclass(frozen=True)
class TimeWindowRow:
    time_ms: int
    arrivals_cum: int
    commits_cum: int
    aborts_cum: int
    cr: float
    cr_eff: float
    rt_est: float
    current_class: str


@dataclass(frozen=True)
class Summary:
    mean_rt_ms: float
    mean_cr: float
    std_cr: float
    mean_cr_eff: float
    tas: int
    commits_per_sec: float
    deg_conc: float
    abort_rate: float
    abort_rate_by_reason: dict[str, float]


def aggregate(
    events: Iterable[TerminationEvent],
    tw_ms: float,
    samples: Optional[Sequence[tuple[float, float, str]]] = None,
    arrivals: Optional[Sequence[float]] = None,
) -> list[TimeWindowRow]:
    """Bucket terminations into time windows of ``tw_ms``.

    ``samples`` supplies (time, rt_est, class) probes taken at window
    boundaries; ``arrivals`` the spawn timestamps for the cumulative
    arrival counter.  Empty buckets keep counters at zero and carry the
    previous commit rate forward.
    """
    events = sorted(events, key=lambda e: (e.time_ms, e.txn_id))
    if not events:
        return []
    n_buckets = int(max(e.time_ms for e in events) // tw_ms) + 1
    committed = [0] * n_buckets
    aborted = [0] * n_buckets
    reclass = [0] * n_buckets
    for ev in events:
        bucket = int(ev.time_ms // tw_ms)
        if ev.outcome == "commit":
            committed[bucket] += 1
        else:
            aborted[bucket] += 1
            if ev.abort_reason == "reclassification":
                reclass[bucket] += 1

    sample_list = sorted(samples) if samples else []
    arrival_list = sorted(arrivals) if arrivals else []
    rows: list[TimeWindowRow] = []
    cr_prev = 1.0
    cr_eff_prev = 1.0
    commits_cum = aborts_cum = 0
    s_idx = a_idx = 0
    rt_est, cls = 0.0, "-"
    arrivals_cum = 0
    for bucket in range(n_buckets):
        end = (bucket + 1) * tw_ms
        commits_cum += committed[bucket]
        aborts_cum += aborted[bucket]
        terminated = committed[bucket] + aborted[bucket]
        cr = compute_cr(committed[bucket], terminated, reclass[bucket], cr_prev)
        cr_eff = (
            compute_cr_eff(committed[bucket], terminated) if terminated else cr_eff_prev
        )
        cr_prev, cr_eff_prev = cr, cr_eff
        while s_idx < len(sample_list) and sample_list[s_idx][0] <= end:
            _, rt_est, cls = sample_list[s_idx]
            s_idx += 1
        while a_idx < len(arrival_list) and arrival_list[a_idx] < end:
            arrivals_cum += 1
            a_idx += 1
        rows.append(
            TimeWindowRow(
                time_ms=int(end),
                arrivals_cum=arrivals_cum,
                commits_cum=commits_cum,
                aborts_cum=aborts_cum,
                cr=cr,
                cr_eff=cr_eff,
                rt_est=rt_est,
                current_class=cls,
            )
        )
    return rows


def summarize(
    events: Iterable[TerminationEvent], elapsed_ms: float, tw_ms: float = 100.0
) -> Summary:
    """Whole-run summary.

    mean/std of the commit rate are taken over the time-window series
    (population standard deviation, for determinism on short runs); the
    effective commit rate is the overall committed/terminated ratio.
    """
    events = list(events)
    if not events:
        raise ValueError("no termination events to summarize")
    if elapsed_ms <= 0:
        raise ValueError("elapsed_ms must be positive")
    commits = [e for e in events if e.outcome == "commit"]
    aborts = [e for e in events if e.outcome != "commit"]
    series = aggregate(events, tw_ms)
    cr_values = np.array([row.cr for row in series], dtype=float)
    by_reason = {
        reason: sum(1 for e in aborts if e.abort_reason == reason) / len(events)
        for reason in ABORT_REASONS
    }
    return Summary(
        mean_rt_ms=float(np.mean([e.response_time_ms for e in events])),
        mean_cr=float(np.mean(cr_values)),
        std_cr=float(np.std(cr_values)),
        mean_cr_eff=len(commits) / len(events),
        tas=len(events),
        commits_per_sec=len(commits) / (elapsed_ms / 1000.0),
        deg_conc=sum(e.service_time_ms for e in commits) / elapsed_ms,
        abort_rate=len(aborts) / len(events),
        abort_rate_by_reason=by_reason,
    )


# -- CSV emission -----------------------------------------------------------


def _format_items(items: tuple[tuple[str, str], ...]) -> str:
    return ";".join(f"{item}@{cls}" for item, cls in items)


def _parse_items(cell: str) -> tuple[tuple[str, str], ...]:
    if not cell:
        return ()
    return tuple(tuple(part.rsplit("@", 1)) for part in cell.split(";"))


def write_terminations_csv(events: Iterable[TerminationEvent], outfile: TextIO) -> None:
    writer = csv.writer(outfile)
    writer.writerow(TERMINATION_COLUMNS)
    for ev in events:
        writer.writerow(
            [
                ev.txn_id,
                ev.time_ms,
                ev.outcome,
                ev.abort_reason or "",
                ev.response_time_ms,
                ev.service_time_ms,
                _format_items(ev.items),
            ]
        )


def read_terminations_csv(infile: TextIO) -> list[TerminationEvent]:
    reader = csv.reader(infile)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TERMINATION_COLUMNS:
        raise ValueError(f"termination log header must be {','.join(TERMINATION_COLUMNS)}")
    return [
        TerminationEvent(
            txn_id=int(row[0]),
            time_ms=int(row[1]),
            outcome=row[2],
            abort_reason=row[3] or None,
            response_time_ms=int(row[4]),
            service_time_ms=int(row[5]),
            items=_parse_items(row[6]),
        )
        for row in reader
        if row
    ]


def write_timeseries_csv(rows: Iterable[TimeWindowRow], outfile: TextIO) -> None:
    writer = csv.writer(outfile)
    writer.writerow(TIMESERIES_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.time_ms,
                row.arrivals_cum,
                row.commits_cum,
                row.aborts_cum,
                f"{row.cr:.6f}",
                f"{row.cr_eff:.6f}",
                f"{row.rt_est:.3f}",
                row.current_class,
            ]
        )


def write_summary_csv(summary: Summary, outfile: TextIO) -> None:
    writer = csv.writer(outfile)
    writer.writerow(SUMMARY_COLUMNS)
    writer.writerow(
        [
            f"{summary.mean_rt_ms:.3f}",
            f"{summary.mean_cr:.6f}",
            f"{summary.std_cr:.6f}",
            f"{summary.mean_cr_eff:.6f}",
            summary.tas,
            f"{summary.commits_per_sec:.3f}",
            f"{summary.deg_conc:.6f}",
            f"{summary.abort_rate:.6f}",
        ]
        + [f"{summary.abort_rate_by_reason[r]:.6f}" for r in ABORT_REASONS]
    )
