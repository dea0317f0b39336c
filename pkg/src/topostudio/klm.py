"""Keystroke-level interaction-cost estimates for design workflows.

A workflow is a list of operator sequences: a base part executed once and
an iterate part repeated per design revision.  Sequences are written in a
small language over the classic operator set (K keystroke, P point, H home
hands, D draw, M mental preparation, R1/R2 system response), with
parenthesized groups, integer repetition via "x", and optional "+" between
steps.  Two workflows ship built in: "drawer", which redraws a freehand
constraint sketch each revision, and "geo", which remodels and re-imports
solid geometry each revision.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, fields

OPERATORS = ("K", "P", "H", "D", "M", "R1", "R2")


@dataclass(frozen=True)
class OperatorTable:
    """Expert execution time per operator, in seconds."""

    k: float = 0.20
    p: float = 1.10
    h: float = 0.40
    d: float = 6.70
    m: float = 1.35
    r1: float = 1.00
    r2: float = 10.00

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise ValueError(f"operator time {f.name} must be positive")

    def times(self) -> dict:
        return {
            "K": self.k,
            "P": self.p,
            "H": self.h,
            "D": self.d,
            "M": self.m,
            "R1": self.r1,
            "R2": self.r2,
        }

    @classmethod
    def from_mapping(cls, data: dict) -> "OperatorTable":
        unknown = sorted(set(data) - set(OPERATORS))
        if unknown:
            raise ValueError(f"unknown operators: {', '.join(unknown)}")
        base = cls().times()
        base.update({k: float(v) for k, v in data.items()})
        return cls(
            k=base["K"], p=base["P"], h=base["H"], d=base["D"],
            m=base["M"], r1=base["R1"], r2=base["R2"],
        )

    @classmethod
    def from_file(cls, path) -> "OperatorTable":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))


DEFAULT_TABLE = OperatorTable()


class _Cursor:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def error(self, message: str) -> SyntaxError:
        return SyntaxError(f"column {self.pos}: {message}")


def _parse_items(cur: _Cursor) -> Counter:
    total: Counter = Counter()
    seen_item = False
    plus_pending = False
    while True:
        cur.skip_ws()
        ch = cur.peek()
        if ch in ("", ")"):
            if plus_pending:
                raise cur.error("dangling '+'")
            return total
        if ch == "+":
            if not seen_item or plus_pending:
                raise cur.error("'+' needs a sequence on both sides")
            plus_pending = True
            cur.pos += 1
            continue
        total += _parse_item(cur)
        seen_item = True
        plus_pending = False


def _parse_item(cur: _Cursor) -> Counter:
    ch = cur.peek()
    if ch == "(":
        cur.pos += 1
        inner = _parse_items(cur)
        cur.skip_ws()
        if cur.peek() != ")":
            raise cur.error("expected ')'")
        cur.pos += 1
    elif ch in "KPHDM":
        inner = Counter({ch: 1})
        cur.pos += 1
    elif ch == "R":
        sub = cur.text[cur.pos + 1 : cur.pos + 2]
        if sub not in ("1", "2"):
            raise cur.error("expected '1' or '2' after 'R'")
        inner = Counter({"R" + sub: 1})
        cur.pos += 2
    else:
        raise cur.error(f"unexpected character {ch!r}")
    cur.skip_ws()
    if cur.peek() == "x":
        cur.pos += 1
        cur.skip_ws()
        start = cur.pos
        while cur.peek().isdigit():
            cur.pos += 1
        if cur.pos == start:
            raise cur.error("expected an integer after 'x'")
        n = int(cur.text[start : cur.pos])
        inner = Counter({op: c * n for op, c in inner.items()})
    return inner


def parse_sequence(text: str) -> Counter:
    """Operator counts for one sequence string."""
    cur = _Cursor(text)
    counts = _parse_items(cur)
    if cur.pos != len(cur.text):
        raise cur.error("unexpected ')'")
    return counts


def sequence_time(counts: dict, table: OperatorTable = DEFAULT_TABLE) -> float:
    times = table.times()
    return sum(times[op] * c for op, c in counts.items())


@dataclass(frozen=True)
class KlmWorkflow:
    name: str
    base_steps: tuple
    iter_steps: tuple

    def __post_init__(self):
        for step in self.base_steps + self.iter_steps:
            parse_sequence(step)

    def counts(self, iterations: int) -> Counter:
        total: Counter = Counter()
        for step in self.base_steps:
            total += parse_sequence(step)
        per_iter: Counter = Counter()
        for step in self.iter_steps:
            per_iter += parse_sequence(step)
        for op, c in per_iter.items():
            total[op] += c * iterations
        return total


@dataclass(frozen=True)
class WorkflowTime:
    total: float
    per_operator: dict


def workflow_time(
    workflow: KlmWorkflow,
    iterations: int,
    table: OperatorTable = DEFAULT_TABLE,
) -> WorkflowTime:
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    counts = workflow.counts(iterations)
    times = table.times()
    per_operator = {op: times[op] * counts[op] for op in OPERATORS if counts[op]}
    return WorkflowTime(total=sum(per_operator.values()), per_operator=per_operator)


DRAWER_WORKFLOW = KlmWorkflow(
    name="drawer",
    base_steps=(
        "(MPK)x4",                      # launch the tools
        "MPK + MPK + MP",               # outline the design region
        "(MPK + MPK + MPKKR1)x2",       # import the region geometry
        "(MPK)x12 + MPKD + MPKP",       # sketch loads, fixtures, mask, volume
        "MPKR2",                        # run the solve
        "(MPK)x2",                      # export the result
    ),
    iter_steps=(
        "(MPK)x3 + MPKD + MPKP + MPKR2",  # clear, redraw the sketch, rerun
    ),
)

GEO_WORKFLOW = KlmWorkflow(
    name="geo",
    base_steps=(
        "(MPK)x4",                      # launch the tools
        "MPK + MPK + MP",               # outline the design region
        "(MPK)x9",                      # place loads and fixtures as points
        "(MPK)x6",                      # model the mask solid
        "MPK + MPK + MPKKKKKR1 + (MPK + MPK + MPKKR1)x5",  # import all geometry
        "MPKR2",                        # run the solve
        "(MPK)x2",                      # export the result
    ),
    iter_steps=(
        "MPKHK + (MPK)x6 + (MPK + MPK + MPKKR1) + MPKR2",  # delete, remodel, re-import, rerun
    ),
)

WORKFLOWS = {w.name: w for w in (DRAWER_WORKFLOW, GEO_WORKFLOW)}


def get_workflow(name: str) -> KlmWorkflow:
    try:
        return WORKFLOWS[name]
    except KeyError:
        raise ValueError(
            f"unknown workflow {name!r}; expected one of {sorted(WORKFLOWS)}"
        ) from None
