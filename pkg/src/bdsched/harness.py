"""Experiment runners: single-instance checks, exhaustive certification
sweeps, fuzz campaigns, and algorithm comparison tables.

Campaign outputs are byte-stable: rows are emitted in instance order, all
numbers render as exact rationals plus a fixed-width decimal, and verdict
columns come from exact Q(sqrt17) comparisons, never from the decimals.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .analysis import (
    Finding,
    build_intervals,
    check_forced_opt,
    check_inclusions,
    check_interval_bounds,
    check_lemma_bounds,
)
from .cp import run_cp
from .generators import GridSpec, RandomConfig, enumerate_instances, gen_random, greedy_baseline
from .model import (
    Instance,
    Rat,
    instance_hash,
    instance_to_dict,
    profit,
    render_decimal,
    render_value,
)
from .offline import (
    OracleSizeError,
    PartialQuery,
    brute_force_partial,
    opt_full,
    solve_partial,
)

__all__ = [
    "CheckConfig",
    "InstanceResult",
    "Summary",
    "Report",
    "check_instance",
    "run_exhaustive",
    "run_fuzz",
    "cross_check_queries",
    "minimize_witness",
    "compare_algorithms",
    "render_rows_csv",
    "report_to_json",
    "default_workers",
]

CSV_HEADER = "instance_hash,v_cp,v_opt,v_greedy,ratio_exact,ratio_decimal,within_bound,worst_interval_ratio,findings"


@dataclass(frozen=True)
class CheckConfig:
    """Which per-instance checks a campaign performs."""

    inclusions: bool = False
    lemma_bounds: bool = False
    forced_opt: bool = False
    cross_check: bool = False


@dataclass
class InstanceResult:
    """Everything measured on one instance."""

    instance: Instance
    hash: str
    v_cp: Rat
    v_opt: Rat
    v_greedy: Rat
    within_bound: bool
    worst_interval: tuple[Rat, Rat] | None  # (v_opt_i, v_cp_i) of the worst interval
    findings: list[Finding] = field(default_factory=list)
    cases: tuple[str, ...] = ()

    @property
    def ratio(self) -> tuple[Rat, Rat]:
        return (self.v_opt, self.v_cp)

    @property
    def ok(self) -> bool:
        return self.within_bound and not self.findings


def check_instance(inst: Instance, config: CheckConfig = CheckConfig()) -> InstanceResult:
    """Run the policy, the optimum and the baseline, then every configured check."""
    cp_sched, trace = run_cp(inst)
    opt_sched, v_opt = opt_full(inst)
    v_cp = profit(cp_sched, inst)
    v_greedy = profit(greedy_baseline(inst), inst)
    report = build_intervals(inst, trace, cp_sched, opt_sched, v_cp, v_opt)

    findings = check_interval_bounds(report)
    if config.lemma_bounds:
        findings += check_lemma_bounds(inst, trace, report)
    if config.forced_opt:
        findings += check_forced_opt(inst, trace, opt_sched)
    if config.inclusions:
        findings += check_inclusions(inst, trace)
    if config.cross_check:
        findings += cross_check_queries(inst, trace)

    worst = report.worst_interval
    return InstanceResult(
        instance=inst,
        hash=instance_hash(inst),
        v_cp=v_cp,
        v_opt=v_opt,
        v_greedy=v_greedy,
        within_bound=report.global_within_bound,
        worst_interval=(worst.v_opt, worst.v_cp) if worst else None,
        findings=findings,
        cases=tuple(rec.case for rec in trace.steps),
    )


def cross_check_queries(inst: Instance, trace) -> list[Finding]:
    """Replay every partial-optimum query of a run against the enumeration
    oracle; members and total value must agree exactly.  Queries beyond the
    oracle's size guard are skipped."""
    out: list[Finding] = []
    seen: set[tuple[int, int, int]] = set()
    for _now, t, t_arr, t_slot in trace.queries:
        key = (t, t_arr, t_slot)
        if key in seen or t_arr < t:  # the empty-by-convention query has no content
            continue
        seen.add(key)
        q = PartialQuery(t, t_arr, t_slot, trace.buffers[t].pending)
        fast = solve_partial(q, inst)
        try:
            slow = brute_force_partial(q, inst)
        except OracleSizeError:
            continue
        if fast.member_set != slow.member_set or fast.total_value != slow.total_value:
            out.append(
                Finding(
                    "oracle-mismatch",
                    f"query ({t},{t_arr},{t_slot})",
                    f"{sorted(fast.member_set)}={render_value(fast.total_value)}",
                    f"{sorted(slow.member_set)}={render_value(slow.total_value)}",
                )
            )
    return out


@dataclass
class Summary:
    """Campaign aggregate; shards merge to the same result as a serial scan
    (ratio ties resolved by the lowest instance index)."""

    instances: int = 0
    violations: int = 0
    max_ratio: tuple[Rat, Rat] | None = None  # (v_opt, v_cp) at the argmax
    argmax_index: int | None = None
    argmax_instance: Instance | None = None
    first_violation: InstanceResult | None = None
    first_violation_index: int | None = None
    findings_by_kind: dict[str, int] = field(default_factory=dict)
    cases_seen: dict[str, int] = field(default_factory=dict)

    def _beats_max(self, v_opt: Rat, v_cp: Rat, index: int) -> bool:
        if self.max_ratio is None:
            return True
        cur_opt, cur_cp = self.max_ratio
        lhs, rhs = v_opt * cur_cp, cur_opt * v_cp
        return lhs > rhs or (lhs == rhs and index < self.argmax_index)

    def absorb_result(self, res: InstanceResult, trace_cases: Iterable[str] = (), index: int = 0) -> None:
        self.instances += 1
        if not res.ok:
            self.violations += 1
            if self.first_violation_index is None or index < self.first_violation_index:
                self.first_violation = res
                self.first_violation_index = index
        for f in res.findings:
            self.findings_by_kind[f.kind] = self.findings_by_kind.get(f.kind, 0) + 1
        if not res.within_bound:
            self.findings_by_kind["global-bound"] = self.findings_by_kind.get("global-bound", 0) + 1
        for label in trace_cases:
            self.cases_seen[label] = self.cases_seen.get(label, 0) + 1
        if res.v_cp > 0 and self._beats_max(res.v_opt, res.v_cp, index):
            self.max_ratio = (res.v_opt, res.v_cp)
            self.argmax_index = index
            self.argmax_instance = res.instance

    def merge(self, other: "Summary") -> None:
        self.instances += other.instances
        self.violations += other.violations
        if other.first_violation_index is not None and (
            self.first_violation_index is None or other.first_violation_index < self.first_violation_index
        ):
            self.first_violation = other.first_violation
            self.first_violation_index = other.first_violation_index
        for k, v in other.findings_by_kind.items():
            self.findings_by_kind[k] = self.findings_by_kind.get(k, 0) + v
        for k, v in other.cases_seen.items():
            self.cases_seen[k] = self.cases_seen.get(k, 0) + v
        if other.max_ratio is not None and self._beats_max(*other.max_ratio, other.argmax_index):
            self.max_ratio = other.max_ratio
            self.argmax_index = other.argmax_index
            self.argmax_instance = other.argmax_instance


@dataclass
class Report:
    """A campaign's summary plus (optionally) its per-instance rows."""

    summary: Summary
    rows: list[InstanceResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.summary.violations == 0


def _scan(indexed: Iterable[tuple[int, Instance]], config: CheckConfig, keep_rows: bool) -> Report:
    summary = Summary()
    rows: list[InstanceResult] = []
    for index, inst in indexed:
        res = check_instance(inst, config)
        summary.absorb_result(res, res.cases, index)
        if keep_rows:
            rows.append(res)
    return Report(summary, rows)


def _strided(spec: GridSpec, workers: int, residue: int) -> Iterable[tuple[int, Instance]]:
    for i, inst in enumerate(enumerate_instances(spec)):
        if i % workers == residue:
            yield i, inst


def _exhaustive_shard(args: tuple) -> Report:
    spec, config, workers, residue = args
    return _scan(_strided(spec, workers, residue), config, keep_rows=False)


def default_workers() -> int:
    """--workers default: the BDSCHED_WORKERS environment variable, else 1."""
    raw = os.environ.get("BDSCHED_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_exhaustive(
    spec: GridSpec,
    config: CheckConfig = CheckConfig(forced_opt=True),
    workers: int = 1,
    keep_rows: bool = False,
) -> Report:
    """Check every instance of the grid; shard across a worker pool when
    workers > 1 and merge shard summaries in residue order."""
    if workers <= 1 or keep_rows:
        return _scan(enumerate(enumerate_instances(spec)), config, keep_rows)
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=workers) as pool:
        shards = pool.map(_exhaustive_shard, [(spec, config, workers, r) for r in range(workers)])
    merged = Summary()
    for shard in shards:
        merged.merge(shard.summary)
    return Report(merged)


def _fuzz_shard(args: tuple) -> Report:
    seeds, config_random, config_checks = args
    return _scan(((s, gen_random(s, config_random)) for s in seeds), config_checks, keep_rows=False)


def run_fuzz(
    seeds: Sequence[int],
    config_random: RandomConfig = RandomConfig(),
    config_checks: CheckConfig = CheckConfig(inclusions=True, lemma_bounds=True, forced_opt=True),
    workers: int = 1,
    keep_rows: bool = False,
) -> Report:
    """Check gen_random(seed) for every seed; sharding as in run_exhaustive."""
    if workers <= 1 or keep_rows:
        return _scan(((s, gen_random(s, config_random)) for s in seeds), config_checks, keep_rows)
    ctx = multiprocessing.get_context("fork")
    chunks = [list(seeds[r::workers]) for r in range(workers)]
    with ctx.Pool(processes=workers) as pool:
        shards = pool.map(_fuzz_shard, [(chunk, config_random, config_checks) for chunk in chunks])
    merged = Summary()
    for shard in shards:
        merged.merge(shard.summary)
    return Report(merged)


def minimize_witness(inst: Instance, still_bad: Callable[[Instance], bool]) -> Instance:
    """Shrink a violating instance while the violation persists.

    Passes alternate packet removal with value simplification (try 1, then
    the floor integer) until a fixpoint.
    """
    from .model import Packet

    current = inst
    changed = True
    while changed:
        changed = False
        for drop in range(len(current.packets)):
            candidate = Instance(p for i, p in enumerate(current.packets) if i != drop)
            if still_bad(candidate):
                current = candidate
                changed = True
                break
        if changed:
            continue
        for idx, p in enumerate(current.packets):
            for simpler in (Fraction(1), Fraction(p.value.numerator // p.value.denominator)):
                if simpler <= 0 or simpler == p.value:
                    continue
                packets = list(current.packets)
                packets[idx] = Packet(p.id, p.release, p.deadline, simpler)
                candidate = Instance(packets)
                if still_bad(candidate):
                    current = candidate
                    changed = True
                    break
            if changed:
                break
    return current


def compare_algorithms(inst: Instance) -> list[dict[str, str]]:
    """Exact profits and optimum-vs-algorithm ratios for the comparison table."""
    cp_sched, _ = run_cp(inst)
    opt_sched, v_opt = opt_full(inst)
    rows = []
    for name, value in (
        ("cp", profit(cp_sched, inst)),
        ("greedy", profit(greedy_baseline(inst), inst)),
        ("opt", v_opt),
    ):
        ratio = v_opt / value if value else Fraction(0)
        rows.append(
            {
                "algorithm": name,
                "profit": render_value(value),
                "profit_decimal": render_decimal(value),
                "opt_ratio": render_value(ratio),
                "opt_ratio_decimal": render_decimal(ratio),
            }
        )
    return rows


def _row_to_csv(res: InstanceResult) -> str:
    ratio = res.v_opt / res.v_cp if res.v_cp else Fraction(0)
    if res.worst_interval and res.worst_interval[1]:
        worst = render_value(res.worst_interval[0] / res.worst_interval[1])
    else:
        worst = ""
    return ",".join(
        [
            res.hash,
            render_value(res.v_cp),
            render_value(res.v_opt),
            render_value(res.v_greedy),
            render_value(ratio),
            render_decimal(ratio),
            "yes" if res.within_bound else "no",
            worst,
            str(len(res.findings)),
        ]
    )


def render_rows_csv(rows: Sequence[InstanceResult]) -> str:
    return "\n".join([CSV_HEADER] + [_row_to_csv(r) for r in rows]) + "\n"


def summary_to_dict(summary: Summary) -> dict:
    doc: dict = {
        "instances": summary.instances,
        "violations": summary.violations,
        "findings_by_kind": dict(sorted(summary.findings_by_kind.items())),
        "cases_seen": dict(sorted(summary.cases_seen.items())),
    }
    if summary.max_ratio is not None:
        v_opt, v_cp = summary.max_ratio
        ratio = v_opt / v_cp
        doc["max_ratio"] = {
            "v_opt": render_value(v_opt),
            "v_cp": render_value(v_cp),
            "exact": render_value(ratio),
            "decimal": render_decimal(ratio),
        }
        if summary.argmax_instance is not None:
            doc["argmax_instance"] = instance_to_dict(summary.argmax_instance)
    if summary.first_violation is not None:
        doc["first_violation"] = {
            "instance": instance_to_dict(summary.first_violation.instance),
            "findings": [f.to_dict() for f in summary.first_violation.findings],
        }
    return doc


def report_to_json(report: Report) -> str:
    doc = {"summary": summary_to_dict(report.summary)}
    if report.rows:
        doc["rows"] = [
            {
                "instance_hash": r.hash,
                "v_cp": render_value(r.v_cp),
                "v_opt": render_value(r.v_opt),
                "v_greedy": render_value(r.v_greedy),
                "within_bound": r.within_bound,
                "findings": [f.to_dict() for f in r.findings],
            }
            for r in report.rows
        ]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
