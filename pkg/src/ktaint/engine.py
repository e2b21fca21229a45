"""Forward interprocedural taint propagation over the textual IR.

Each query is analyzed in isolation: its sources introduce taint, its
propagators transfer taint across call slots, its sanitizers kill it,
and its sinks report it.  Every method of the program is treated as an
entry point and analyzed with an untainted entry state; taint can only
enter through source rules.

Calls to methods defined in the program are handled through method
summaries: for a callee and a set of tainted entry slots, the summary
records which exit slots (return value, parameters, receiver) end up
tainted and which sink statements inside the callee (or deeper) are
reached.  Summaries are computed on demand and iterated to a global
fixpoint, so mutual recursion terminates; summary results are keyed by
the exact entry-slot set, which keeps them exact on call DAGs.

Role handling at a call site, per query: a matching sanitizer takes
precedence over every other role (its tainted in-slot locals are killed
and no other rule of the query applies at that statement); otherwise
matching sources, then propagators, then sinks are applied in that
order.  Locals receive strong updates on assignment; fields receive
weak updates and are never killed.  Field state is scoped to a single
method body: summaries do not carry field effects across calls, which
is the documented precision limit that makes wrapper-class captures
(lambda-style field round trips through a callee) invisible.

All inputs are immutable during analysis; results are fully sorted, so
repeated runs are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .ir import (
    Const,
    Copy,
    FieldLoad,
    FieldStore,
    Identity,
    Invoke,
    IrClass,
    IrMethod,
    IrProgram,
    Return,
)
from .kotlin_types import jvm_type_matches
from .signatures import SlotRef, parse_signature

if TYPE_CHECKING:  # pragma: no cover
    from .spec_dsl import NormalizedQuery, NormalizedRule, NormalizedVariant

__all__ = [
    "AnalysisOptions",
    "Location",
    "Origin",
    "Finding",
    "MethodSummary",
    "TaintFact",
    "analyze",
    "match_call",
    "class_uri",
]


@dataclass(frozen=True)
class AnalysisOptions:
    """Engine switches; the ``no_*`` family exists for ablation testing."""

    implicit_propagation: bool = False
    no_default_expansion: bool = False
    no_type_mapping: bool = False
    no_alias_resolution: bool = False
    no_extension_handling: bool = False
    no_property_handling: bool = False
    no_top_level_handling: bool = False
    no_infix_handling: bool = False
    no_operator_handling: bool = False


DEFAULT_OPTIONS = AnalysisOptions()


def class_uri(cls: IrClass) -> str:
    """Report uri: the declared source file, else a class-derived path."""
    if cls.source_file:
        return cls.source_file.replace("\\", "/")
    return cls.name.replace(".", "/") + ".class"


@dataclass(frozen=True, order=True)
class Location:
    uri: str
    line: int
    class_name: str

    def render(self) -> str:
        return f"{self.uri}:{self.line}"


@dataclass(frozen=True, order=True)
class Origin:
    """Where a taint fact was created: (source rule, source statement)."""

    rule_ordinal: int
    location: Location


@dataclass(frozen=True, order=True)
class _EntryDep:
    """Summary placeholder: taint that arrived via an entry slot."""

    slot: tuple


@dataclass(frozen=True, order=True)
class _OriginDep:
    origin: Origin


_Dep = _EntryDep | _OriginDep


@dataclass(frozen=True)
class TaintFact:
    """One tainted holder (local or field key) with its origin."""

    holder: tuple
    origin: Origin


@dataclass(frozen=True)
class _Hit:
    """A sink statement reached by some dependency."""

    sink: Location
    dep: _Dep
    hop: Location | None = None


@dataclass(frozen=True)
class MethodSummary:
    """Exit taint and sink hits for (method, tainted entry slots).

    ``exits`` maps exit slots (as slot-key tuples) paired with the
    dependency that reaches them; entry-slot dependencies are translated
    into caller facts at each call site.  Monotone in the entry set.
    """

    exits: frozenset[tuple[tuple, _Dep]] = frozenset()
    hits: frozenset[_Hit] = frozenset()

    def union(self, other: MethodSummary) -> MethodSummary:
        return MethodSummary(self.exits | other.exits, self.hits | other.hits)


_EMPTY_SUMMARY = MethodSummary()


@dataclass(frozen=True)
class Finding:
    query_id: str
    message: str
    source: Location
    sink: Location
    witness: tuple[Location, ...]

    def sort_key(self) -> tuple:
        return (
            self.query_id,
            self.source.uri,
            self.source.line,
            self.sink.line,
            self.sink.uri,
            tuple((w.uri, w.line) for w in self.witness),
        )


# ---------------------------------------------------------------------------
# Rule matching


def _slot_key(slot: SlotRef) -> tuple:
    if slot.kind == "param":
        return ("param", slot.index)
    return (slot.kind,)


def _variant_matches(variant: "NormalizedVariant", callee) -> bool:
    sig = variant.signature
    if sig.declaring_class != callee.declaring_class or sig.name != callee.name:
        return False
    if sig.arity != callee.arity:
        return False
    if not jvm_type_matches(sig.return_type, callee.return_type):
        return False
    return all(
        jvm_type_matches(p, a) for p, a in zip(sig.params, callee.params)
    )


def match_call(callee_signature_text: str, rule: "NormalizedRule"):
    """First variant of ``rule`` matching the callee text, base first."""
    try:
        callee = parse_signature(callee_signature_text)
    except ValueError:
        return None
    for variant in rule.variants:
        if _variant_matches(variant, callee):
            return variant
    return None


# ---------------------------------------------------------------------------
# Per-query tabulation


class _QueryAnalysis:
    def __init__(self, program: IrProgram, query: "NormalizedQuery", options: AnalysisOptions):
        self.program = program
        self.query = query
        self.options = options
        self.rules_by_role: dict[str, list[NormalizedRule]] = {
            "source": [],
            "sink": [],
            "sanitizer": [],
            "propagator": [],
        }
        for rule in query.rules:
            self.rules_by_role[rule.role].append(rule)
        self._match_cache: dict[str, dict[str, list[tuple[int, object]]]] = {}
        self._table: dict[tuple, MethodSummary] = {}
        self._demanded: dict[tuple, None] = {}

    # -- matching --------------------------------------------------------

    def _matches(self, callee_text: str) -> dict[str, list[tuple[int, object]]]:
        cached = self._match_cache.get(callee_text)
        if cached is not None:
            return cached
        result: dict[str, list[tuple[int, object]]] = {}
        for role, rules in self.rules_by_role.items():
            hits = []
            for rule in rules:
                variant = match_call(callee_text, rule)
                if variant is not None:
                    hits.append((rule.ordinal, variant))
            result[role] = hits
        self._match_cache[callee_text] = result
        return result

    # -- fixpoint driver ---------------------------------------------------

    def run(self) -> list[Finding]:
        for sig_text in self.program.index:
            self._demanded[(sig_text, frozenset())] = None
        passes = 0
        accumulate = False
        while True:
            passes += 1
            # On a DAG the table stabilizes within (call depth + 2) passes;
            # past this bound a pathological kill/recursion interaction is
            # resolved soundly by switching to accumulating unions, which
            # are monotone and therefore bounded by the fact-lattice height.
            soft_bound = 2 * (len(self._demanded) + len(self.program.index)) + 8
            if passes > soft_bound:
                accumulate = True
            assert passes <= 4 * soft_bound + 64, "summary fixpoint exceeded its step bound"
            changed = False
            for key in list(self._demanded):
                row = self._run_method(key)
                old = self._table.get(key, _EMPTY_SUMMARY)
                if accumulate:
                    row = row.union(old)
                if row != old:
                    self._table[key] = row
                    changed = True
            if not changed:
                break
        return self._collect_findings()

    def _demand(self, key: tuple) -> MethodSummary:
        if key not in self._demanded:
            self._demanded[key] = None
        return self._table.get(key, _EMPTY_SUMMARY)

    def _collect_findings(self) -> list[Finding]:
        found: dict[tuple, Finding] = {}
        for row in self._table.values():
            for hit in row.hits:
                if not isinstance(hit.dep, _OriginDep):
                    continue
                source = hit.dep.origin.location
                witness = (source,) + ((hit.hop,) if hit.hop else ()) + (hit.sink,)
                finding = Finding(
                    query_id=self.query.id,
                    message=self.query.message,
                    source=source,
                    sink=hit.sink,
                    witness=witness,
                )
                dedup = (source, hit.sink)
                existing = found.get(dedup)
                if existing is None or finding.sort_key() < existing.sort_key():
                    found[dedup] = finding
        return list(found.values())

    # -- transfer over one method body ------------------------------------

    def _run_method(self, key: tuple) -> MethodSummary:
        sig_text, entry_slots = key
        cls, method = self.program.index[sig_text]
        loc_uri = class_uri(cls)

        facts: dict[tuple, set[_Dep]] = {}
        bindings: list[tuple[tuple, str]] = []  # (slot key, identity-bound local)
        exits: set[tuple[tuple, _Dep]] = set()
        hits: set[_Hit] = set()

        def deps_of(local: str | None) -> frozenset[_Dep]:
            if local is None:
                return frozenset()
            return frozenset(facts.get(("l", local), ()))

        def add_deps(local: str | None, deps: Iterable[_Dep]) -> None:
            if local is None:
                return
            bucket = facts.setdefault(("l", local), set())
            bucket.update(deps)

        def kill_local(local: str | None) -> None:
            if local is not None:
                facts.pop(("l", local), None)

        for stmt in method.statements:
            if isinstance(stmt, Identity):
                kill_local(stmt.dst)
                slot = ("this",) if stmt.source == "this" else ("param", stmt.source)
                bindings.append((slot, stmt.dst))
                if slot in entry_slots:
                    add_deps(stmt.dst, [_EntryDep(slot)])
            elif isinstance(stmt, Const):
                kill_local(stmt.dst)
            elif isinstance(stmt, Copy):
                src_deps = deps_of(stmt.src)
                kill_local(stmt.dst)
                add_deps(stmt.dst, src_deps)
            elif isinstance(stmt, FieldStore):
                field_key = (
                    "f",
                    "" if stmt.base_is_local else stmt.base,
                    stmt.field_name,
                )
                src_deps = deps_of(stmt.src)
                if src_deps:
                    facts.setdefault(field_key, set()).update(src_deps)
            elif isinstance(stmt, FieldLoad):
                field_key = (
                    "f",
                    "" if stmt.base_is_local else stmt.base,
                    stmt.field_name,
                )
                field_deps = frozenset(facts.get(field_key, ()))
                kill_local(stmt.dst)
                add_deps(stmt.dst, field_deps)
            elif isinstance(stmt, Invoke):
                self._transfer_invoke(
                    stmt,
                    Location(loc_uri, stmt.line, cls.name),
                    deps_of,
                    add_deps,
                    kill_local,
                    hits,
                )
            elif isinstance(stmt, Return):
                for dep in deps_of(stmt.value):
                    exits.add((("return",), dep))
                break

        for slot, local in bindings:
            for dep in deps_of(local):
                if isinstance(dep, _EntryDep) and dep.slot == slot:
                    continue  # arriving taint trivially remains on its own slot
                exits.add((slot, dep))
        return MethodSummary(frozenset(exits), frozenset(hits))

    def _transfer_invoke(self, stmt: Invoke, loc: Location, deps_of, add_deps, kill_local, hits) -> None:
        matches = self._matches(stmt.callee)

        def binding(slot: SlotRef) -> str | None:
            if slot.kind == "this":
                return stmt.receiver
            if slot.kind == "return":
                return stmt.result
            if slot.index is not None and slot.index < len(stmt.args):
                return stmt.args[slot.index]
            return None

        # Snapshot the call's argument/receiver taint before any updates;
        # the callee observes the values as they were passed.
        pre_args = [deps_of(a) for a in stmt.args]
        pre_receiver = deps_of(stmt.receiver)

        def pre_deps_for_slot(slot_key: tuple) -> frozenset[_Dep]:
            if slot_key == ("this",):
                return pre_receiver
            if slot_key[0] == "param" and slot_key[1] < len(pre_args):
                return pre_args[slot_key[1]]
            return frozenset()

        kill_local(stmt.result)

        sanitized = bool(matches["sanitizer"])
        if sanitized:
            for _ordinal, variant in matches["sanitizer"]:
                for slot in variant.in_slots:
                    kill_local(binding(slot))
        else:
            for ordinal, variant in matches["source"]:
                origin = _OriginDep(Origin(ordinal, loc))
                for slot in variant.out_slots:
                    add_deps(binding(slot), [origin])
            for _ordinal, variant in matches["propagator"]:
                incoming: set[_Dep] = set()
                for slot in variant.in_slots:
                    incoming.update(deps_of(binding(slot)))
                if incoming:
                    for slot in variant.out_slots:
                        add_deps(binding(slot), incoming)
            for _ordinal, variant in matches["sink"]:
                for slot in variant.in_slots:
                    for dep in deps_of(binding(slot)):
                        hits.add(_Hit(sink=loc, dep=dep))

        any_match = any(matches[role] for role in matches)

        if self.program.lookup(stmt.callee) is not None:
            entry: set[tuple] = set()
            for i, arg_deps in enumerate(pre_args):
                if arg_deps:
                    entry.add(("param", i))
            if pre_receiver:
                entry.add(("this",))
            row = self._demand((stmt.callee, frozenset(entry)))
            for slot_key, dep in row.exits:
                target = binding(_slot_from_key(slot_key))
                if target is None:
                    continue
                if isinstance(dep, _OriginDep):
                    add_deps(target, [dep])
                else:
                    add_deps(target, pre_deps_for_slot(dep.slot))
            for hit in row.hits:
                if isinstance(hit.dep, _OriginDep):
                    continue  # already collected from the callee's own row
                for dep in pre_deps_for_slot(hit.dep.slot):
                    hits.add(_Hit(sink=hit.sink, dep=dep, hop=hit.hop or loc))
        elif not any_match and self.options.implicit_propagation:
            incoming = set()
            for arg_deps in pre_args:
                incoming.update(arg_deps)
            if incoming:
                add_deps(stmt.result, incoming)


def _slot_from_key(slot_key: tuple) -> SlotRef:
    if slot_key[0] == "param":
        return SlotRef.param(slot_key[1])
    if slot_key[0] == "this":
        return SlotRef.this()
    return SlotRef.ret()


# ---------------------------------------------------------------------------
# Entry point


def analyze(
    program: IrProgram,
    queries: Iterable["NormalizedQuery"],
    options: AnalysisOptions | None = None,
) -> list[Finding]:
    """Run every query against the program; findings sorted and deduplicated."""
    opts = options or DEFAULT_OPTIONS
    findings: list[Finding] = []
    for query in queries:
        findings.extend(_QueryAnalysis(program, query, opts).run())
    findings.sort(key=Finding.sort_key)
    return findings
