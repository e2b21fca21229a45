"""The textual taint-flow specification language.

A spec file declares type aliases and one or more queries; each query
names sources, sinks, sanitizers and propagators.  Rules are written
against Kotlin-source-level constructs (properties, top-level members,
extensions, companion-object extensions, infix functions, operator
overloads) or as direct canonical signatures, and carry the taint slots
to track at call boundaries.

Grammar (UTF-8, ``#`` line comments)::

    spec      := aliasBlock? query+
    aliasBlock:= "aliases" "{" (ident "=" qualName)* "}"
    query     := "query" STRING "{" ("message" STRING)? rule+ "}"
    rule      := role "{" descriptor attribute* slotLine+ "}"
    role      := "source" | "sink" | "sanitizer" | "propagator"
    descriptor:= "method" STRING
               | "property" ("getter"|"setter") "class" STRING "name" STRING "type" STRING
               | "topLevel" "package" STRING "file" STRING "method" STRING
               | "extensionFunction" "at" STRING "receiver" STRING "name" STRING
                     "params" "(" types? ")" "returns" STRING
               | "extensionProperty" "at" STRING "receiver" STRING "name" STRING
                     "type" STRING ("getter" | "setter")
               | "companionExtension" "class" STRING ("companion" STRING)?
                     "at" STRING "name" STRING "params" "(" types? ")" "returns" STRING
               | "infix" "receiver" STRING "name" STRING "param" STRING "returns" STRING
               | "operator" STRING "receiver" STRING ("operands" "(" types? ")")?
                     "returns" STRING
    attribute := "defaults" ("member"|"topLevel"|"constructor")
               | "no-defaults" | "sealed" | "internal" STRING
    slotLine  := ("in"|"out") slot ("," slot)*
    slot      := "return" | "this" | "this[dispatch]" | "this[extension]"
               | "param" INT                      # INT is 1-based
    types     := STRING ("," STRING)*

Slot indices on the surface are 1-based ("the first parameter");
internally everything is 0-based.  ``extensionProperty`` accepts the
``setter`` token grammatically so the rejection can say why: extension
properties compile without a setter.

Normalization turns every rule into the full set of bytecode-level
signature variants with remapped taint slots: types are alias-resolved
and mapped, construct signatures are synthesized, the generated
default-argument overload is added to every non-extension rule (opt out
with ``no-defaults``), ``sealed``/``internal`` variants are added on
request, and extension receivers are rewritten (extension receiver
becomes parameter 0, declared parameter indices shift right by one,
the dispatch receiver stays on ``this``).  Default-argument expansion of
extension functions is rejected: the shape of that overload is not
well-defined for them.

When one call site matches several roles of the same query, a sanitizer
takes precedence over everything else; otherwise sources, propagators
and sinks all apply.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .engine import AnalysisOptions, DEFAULT_OPTIONS
from .kotlin_types import (
    KotlinTypeExpr,
    TypeAliasTable,
    TypeSyntaxError,
    identity_type_mapper,
    mapped_type_name,
    parse_kotlin_type,
    resolve_alias,
)
from .signatures import (
    MethodSignature,
    SignatureError,
    SlotRef,
    companion_wrapper,
    default_variants,
    base_variant,
    extension_property_getter,
    extension_signature,
    infix_signature,
    internal_mangle,
    operator_signature,
    parse_member_signature,
    parse_signature,
    property_accessors,
    sealed_ctor_variant,
    top_level_class,
)

__all__ = [
    "SpecError",
    "TaintQuery",
    "MethodRule",
    "RuleAttributes",
    "NormalizedQuery",
    "NormalizedRule",
    "NormalizedVariant",
    "parse_spec",
    "parse_alias_entries",
    "normalize",
    "normalize_queries",
    "dump_normalized",
]

ROLES = ("source", "sink", "sanitizer", "propagator")


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        where = f"line {line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Descriptors


@dataclass(frozen=True)
class DirectMethodDesc:
    signature_text: str


@dataclass(frozen=True)
class PropertyDesc:
    accessor: str  # "getter" | "setter"
    class_name: str
    prop_name: str
    prop_type: str


@dataclass(frozen=True)
class TopLevelDesc:
    package: str
    file_name: str
    member_text: str  # signature with the class part omitted


@dataclass(frozen=True)
class ExtensionFnDesc:
    container: str
    receiver: str
    name: str
    params: tuple[str, ...]
    returns: str


@dataclass(frozen=True)
class ExtensionPropDesc:
    container: str
    receiver: str
    prop_name: str
    prop_type: str
    accessor: str


@dataclass(frozen=True)
class CompanionExtDesc:
    class_name: str
    companion_name: str | None
    container: str
    name: str
    params: tuple[str, ...]
    returns: str


@dataclass(frozen=True)
class InfixDesc:
    receiver: str
    name: str
    param: str
    returns: str


@dataclass(frozen=True)
class OperatorDesc:
    symbol: str
    receiver: str
    operands: tuple[str, ...]
    returns: str


Descriptor = (
    DirectMethodDesc
    | PropertyDesc
    | TopLevelDesc
    | ExtensionFnDesc
    | ExtensionPropDesc
    | CompanionExtDesc
    | InfixDesc
    | OperatorDesc
)

_EXTENSION_FAMILY = (ExtensionFnDesc, ExtensionPropDesc, CompanionExtDesc)


@dataclass(frozen=True)
class RuleAttributes:
    defaults_kind: str | None = None  # explicit member/top_level/constructor
    no_defaults: bool = False
    sealed: bool = False
    internal_module: str | None = None


@dataclass(frozen=True)
class MethodRule:
    role: str
    descriptor: Descriptor
    attributes: RuleAttributes
    in_slots: tuple[SlotRef, ...]
    out_slots: tuple[SlotRef, ...]
    ordinal: int  # parse order within the query
    line: int = 0


@dataclass(frozen=True)
class TaintQuery:
    id: str
    message: str
    sources: tuple[MethodRule, ...]
    sinks: tuple[MethodRule, ...]
    sanitizers: tuple[MethodRule, ...]
    propagators: tuple[MethodRule, ...]

    def all_rules(self) -> list[MethodRule]:
        rules = list(self.sources + self.sinks + self.sanitizers + self.propagators)
        rules.sort(key=lambda r: r.ordinal)
        return rules


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class _Token:
    text: str
    kind: str  # "string" | "word" | "punct"
    line: int
    col: int


_WORD_CHARS = set(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.$[]-"
)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        i = 0
        n = len(line)
        while i < n:
            ch = line[i]
            if ch.isspace():
                i += 1
                continue
            if ch == "#":
                break
            col = i + 1
            if ch == '"':
                end = line.find('"', i + 1)
                if end < 0:
                    raise SpecError("unterminated string", line_no, col)
                tokens.append(_Token(line[i + 1 : end], "string", line_no, col))
                i = end + 1
                continue
            if ch in "{}(),=":
                tokens.append(_Token(ch, "punct", line_no, col))
                i += 1
                continue
            if ch in _WORD_CHARS:
                j = i
                while j < n and line[j] in _WORD_CHARS:
                    j += 1
                tokens.append(_Token(line[i:j], "word", line_no, col))
                i = j
                continue
            # Operator symbols like ++ or <= appear only as quoted strings.
            raise SpecError(f"unexpected character {ch!r}", line_no, col)
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def _here(self) -> tuple[int, int]:
        if self.pos < len(self.tokens):
            tok = self.tokens[self.pos]
            return tok.line, tok.col
        if self.tokens:
            last = self.tokens[-1]
            return last.line, last.col + len(last.text)
        return 1, 1

    def error(self, message: str) -> SpecError:
        line, col = self._here()
        return SpecError(message, line, col)

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def peek_text(self) -> str | None:
        tok = self.peek()
        return tok.text if tok else None

    def take(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of spec")
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text:
            raise SpecError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def expect_string(self) -> str:
        tok = self.take()
        if tok.kind != "string":
            raise SpecError(f"expected a quoted string, found {tok.text!r}", tok.line, tok.col)
        return tok.text

    def expect_word(self) -> _Token:
        tok = self.take()
        if tok.kind != "word":
            raise SpecError(f"expected an identifier, found {tok.text!r}", tok.line, tok.col)
        return tok

    def done(self) -> bool:
        return self.pos >= len(self.tokens)


# ---------------------------------------------------------------------------
# Parsing


def _parse_string_list(p: _Parser) -> tuple[str, ...]:
    p.expect("(")
    items: list[str] = []
    if p.peek_text() != ")":
        items.append(p.expect_string())
        while p.peek_text() == ",":
            p.take()
            items.append(p.expect_string())
    p.expect(")")
    return tuple(items)


def _parse_descriptor(p: _Parser) -> Descriptor:
    tok = p.expect_word()
    kind = tok.text
    if kind == "method":
        return DirectMethodDesc(p.expect_string())
    if kind == "property":
        accessor = p.expect_word().text
        if accessor not in ("getter", "setter"):
            raise SpecError(f"expected getter or setter, found {accessor!r}", tok.line, tok.col)
        p.expect("class")
        class_name = p.expect_string()
        p.expect("name")
        prop_name = p.expect_string()
        p.expect("type")
        prop_type = p.expect_string()
        return PropertyDesc(accessor, class_name, prop_name, prop_type)
    if kind == "topLevel":
        p.expect("package")
        package = p.expect_string()
        p.expect("file")
        file_name = p.expect_string()
        p.expect("method")
        member = p.expect_string()
        return TopLevelDesc(package, file_name, member)
    if kind == "extensionFunction":
        p.expect("at")
        container = p.expect_string()
        p.expect("receiver")
        receiver = p.expect_string()
        p.expect("name")
        name = p.expect_string()
        p.expect("params")
        params = _parse_string_list(p)
        p.expect("returns")
        returns = p.expect_string()
        return ExtensionFnDesc(container, receiver, name, params, returns)
    if kind == "extensionProperty":
        p.expect("at")
        container = p.expect_string()
        p.expect("receiver")
        receiver = p.expect_string()
        p.expect("name")
        name = p.expect_string()
        p.expect("type")
        prop_type = p.expect_string()
        accessor = "getter"
        if p.peek_text() in ("getter", "setter"):
            accessor = p.take().text
        return ExtensionPropDesc(container, receiver, name, prop_type, accessor)
    if kind == "companionExtension":
        p.expect("class")
        class_name = p.expect_string()
        companion = None
        if p.peek_text() == "companion":
            p.take()
            companion = p.expect_string()
        p.expect("at")
        container = p.expect_string()
        p.expect("name")
        name = p.expect_string()
        p.expect("params")
        params = _parse_string_list(p)
        p.expect("returns")
        returns = p.expect_string()
        return CompanionExtDesc(class_name, companion, container, name, params, returns)
    if kind == "infix":
        p.expect("receiver")
        receiver = p.expect_string()
        p.expect("name")
        name = p.expect_string()
        p.expect("param")
        param = p.expect_string()
        p.expect("returns")
        returns = p.expect_string()
        return InfixDesc(receiver, name, param, returns)
    if kind == "operator":
        symbol = p.expect_string()
        p.expect("receiver")
        receiver = p.expect_string()
        operands: tuple[str, ...] = ()
        if p.peek_text() == "operands":
            p.take()
            operands = _parse_string_list(p)
        p.expect("returns")
        returns = p.expect_string()
        return OperatorDesc(symbol, receiver, operands, returns)
    raise SpecError(f"unknown descriptor keyword {kind!r}", tok.line, tok.col)


def _parse_attributes(p: _Parser) -> RuleAttributes:
    defaults_kind = None
    no_defaults = False
    sealed = False
    internal_module = None
    kind_words = {"member": "member", "topLevel": "top_level", "constructor": "constructor"}
    while p.peek_text() in ("defaults", "no-defaults", "sealed", "internal"):
        tok = p.take()
        if tok.text == "defaults":
            word = p.expect_word()
            if word.text not in kind_words:
                raise SpecError(
                    f"expected member, topLevel or constructor, found {word.text!r}",
                    word.line,
                    word.col,
                )
            defaults_kind = kind_words[word.text]
        elif tok.text == "no-defaults":
            no_defaults = True
        elif tok.text == "sealed":
            sealed = True
        else:
            internal_module = p.expect_string()
    return RuleAttributes(defaults_kind, no_defaults, sealed, internal_module)


def _parse_slot(p: _Parser) -> SlotRef:
    tok = p.expect_word()
    if tok.text == "return":
        return SlotRef.ret()
    if tok.text == "this":
        return SlotRef.this()
    if tok.text == "this[dispatch]":
        return SlotRef.this("dispatch")
    if tok.text == "this[extension]":
        return SlotRef.this("extension")
    if tok.text == "param":
        idx = p.expect_word()
        if not idx.text.isdigit() or int(idx.text) < 1:
            raise SpecError(
                f"param slots are 1-based positive indices, found {idx.text!r}",
                idx.line,
                idx.col,
            )
        return SlotRef.param(int(idx.text) - 1)
    raise SpecError(f"unknown slot {tok.text!r}", tok.line, tok.col)


def _parse_rule(p: _Parser, role_tok: _Token, ordinal: int) -> MethodRule:
    p.expect("{")
    descriptor = _parse_descriptor(p)
    attributes = _parse_attributes(p)
    in_slots: list[SlotRef] = []
    out_slots: list[SlotRef] = []
    saw_slot_line = False
    while p.peek_text() in ("in", "out"):
        saw_slot_line = True
        direction = p.take().text
        slots = [_parse_slot(p)]
        while p.peek_text() == ",":
            p.take()
            slots.append(_parse_slot(p))
        (in_slots if direction == "in" else out_slots).extend(slots)
    if not saw_slot_line:
        raise p.error(f"{role_tok.text} rule needs at least one in/out slot line")
    p.expect("}")

    role = role_tok.text
    if role == "source" and not out_slots:
        raise SpecError("sources need at least one out slot", role_tok.line, role_tok.col)
    if role == "sink" and not in_slots:
        raise SpecError("sinks need at least one in slot", role_tok.line, role_tok.col)
    if role == "sanitizer" and not in_slots:
        raise SpecError("sanitizers need at least one in slot", role_tok.line, role_tok.col)
    if role == "propagator" and (not in_slots or not out_slots):
        raise SpecError(
            "propagators need both in and out slots", role_tok.line, role_tok.col
        )
    if not isinstance(descriptor, _EXTENSION_FAMILY):
        for slot in in_slots + out_slots:
            if slot.receiver_kind is not None:
                raise SpecError(
                    "receiver-qualified this-slots require an extension descriptor",
                    role_tok.line,
                    role_tok.col,
                )
    return MethodRule(
        role=role,
        descriptor=descriptor,
        attributes=attributes,
        in_slots=tuple(in_slots),
        out_slots=tuple(out_slots),
        ordinal=ordinal,
        line=role_tok.line,
    )


def _parse_query(p: _Parser) -> TaintQuery:
    p.expect("query")
    query_id = p.expect_string()
    p.expect("{")
    message = ""
    if p.peek_text() == "message":
        p.take()
        message = p.expect_string()
    buckets: dict[str, list[MethodRule]] = {role: [] for role in ROLES}
    ordinal = 0
    while p.peek_text() != "}":
        tok = p.expect_word()
        if tok.text not in ROLES:
            raise SpecError(f"unknown keyword {tok.text!r}", tok.line, tok.col)
        buckets[tok.text].append(_parse_rule(p, tok, ordinal))
        ordinal += 1
    p.expect("}")
    if not buckets["source"]:
        raise SpecError(f"query {query_id!r} has no source")
    if not buckets["sink"]:
        raise SpecError(f"query {query_id!r} has no sink")
    return TaintQuery(
        id=query_id,
        message=message,
        sources=tuple(buckets["source"]),
        sinks=tuple(buckets["sink"]),
        sanitizers=tuple(buckets["sanitizer"]),
        propagators=tuple(buckets["propagator"]),
    )


def parse_alias_entries(p: _Parser) -> TypeAliasTable:
    p.expect("aliases")
    p.expect("{")
    entries: dict[str, str] = {}
    while p.peek_text() != "}":
        name = p.expect_word()
        p.expect("=")
        target = p.expect_word()
        if name.text in entries:
            raise SpecError(f"duplicate alias {name.text!r}", name.line, name.col)
        entries[name.text] = target.text
    p.expect("}")
    return TypeAliasTable(entries)


def parse_spec(text: str) -> tuple[TypeAliasTable, list[TaintQuery]]:
    """Parse a spec file into its alias table and query list."""
    p = _Parser(text)
    aliases = TypeAliasTable()
    if p.peek_text() == "aliases":
        aliases = parse_alias_entries(p)
    queries: list[TaintQuery] = []
    seen_ids: set[str] = set()
    while not p.done():
        query = _parse_query(p)
        if query.id in seen_ids:
            raise SpecError(f"duplicate query id {query.id!r}")
        seen_ids.add(query.id)
        queries.append(query)
    if not queries:
        raise SpecError("spec contains no queries")
    return aliases, queries


# ---------------------------------------------------------------------------
# Normalization


@dataclass(frozen=True)
class NormalizedVariant:
    origin: str  # VariantOrigin value
    signature: MethodSignature
    text: str
    in_slots: tuple[SlotRef, ...]
    out_slots: tuple[SlotRef, ...]


@dataclass(frozen=True)
class NormalizedRule:
    role: str
    role_index: int
    ordinal: int
    variants: tuple[NormalizedVariant, ...]


@dataclass(frozen=True)
class NormalizedQuery:
    id: str
    message: str
    rules: tuple[NormalizedRule, ...]


def _rule_is_ablated(descriptor: Descriptor, options: AnalysisOptions) -> bool:
    if options.no_property_handling and isinstance(descriptor, PropertyDesc):
        return True
    if options.no_top_level_handling and isinstance(descriptor, TopLevelDesc):
        return True
    if options.no_infix_handling and isinstance(descriptor, InfixDesc):
        return True
    if options.no_operator_handling and isinstance(descriptor, OperatorDesc):
        return True
    return False


def _build_base_signature(
    rule: MethodRule,
    to_expr: Callable[[str], KotlinTypeExpr],
    mapper: Callable[[KotlinTypeExpr], str],
    options: AnalysisOptions,
) -> MethodSignature:
    desc = rule.descriptor
    inject = not options.no_extension_handling
    try:
        if isinstance(desc, DirectMethodDesc):
            sig = parse_signature(desc.signature_text)
            return MethodSignature(
                sig.declaring_class,
                mapper(to_expr(sig.return_type)),
                sig.name,
                tuple(mapper(to_expr(t)) for t in sig.params),
            )
        if isinstance(desc, PropertyDesc):
            return property_accessors(
                desc.class_name, desc.prop_name, to_expr(desc.prop_type), desc.accessor, mapper
            )[0]
        if isinstance(desc, TopLevelDesc):
            class_name = top_level_class(desc.package, desc.file_name)
            return_type, name, params = parse_member_signature(desc.member_text)
            return MethodSignature(
                class_name,
                mapper(to_expr(return_type)),
                name,
                tuple(mapper(to_expr(t)) for t in params),
                is_static=True,
            )
        if isinstance(desc, ExtensionFnDesc):
            return extension_signature(
                desc.container,
                to_expr(desc.receiver),
                desc.name,
                [to_expr(t) for t in desc.params],
                to_expr(desc.returns),
                mapper,
                inject_receiver=inject,
            )
        if isinstance(desc, ExtensionPropDesc):
            if desc.accessor != "getter":
                raise SpecError(
                    "extension properties compile without a setter; only the "
                    "getter can be specified",
                    rule.line,
                )
            return extension_property_getter(
                desc.container,
                to_expr(desc.receiver),
                desc.prop_name,
                to_expr(desc.prop_type),
                mapper,
                inject_receiver=inject,
            )
        if isinstance(desc, CompanionExtDesc):
            wrapper = companion_wrapper(desc.class_name, desc.companion_name)
            return extension_signature(
                desc.container,
                parse_kotlin_type(wrapper),
                desc.name,
                [to_expr(t) for t in desc.params],
                to_expr(desc.returns),
                mapper,
                inject_receiver=inject,
            )
        if isinstance(desc, InfixDesc):
            return infix_signature(
                to_expr(desc.receiver),
                desc.name,
                [to_expr(desc.param)],
                to_expr(desc.returns),
                mapper,
            )
        if isinstance(desc, OperatorDesc):
            return operator_signature(
                desc.symbol,
                to_expr(desc.receiver),
                [to_expr(t) for t in desc.operands],
                to_expr(desc.returns),
                mapper,
            )
    except (SignatureError, TypeSyntaxError) as exc:
        raise SpecError(str(exc), rule.line) from exc
    raise SpecError(f"unhandled descriptor {desc!r}", rule.line)


def _resolve_slot(slot: SlotRef, is_extension: bool, inject: bool, rule: MethodRule) -> SlotRef:
    if not is_extension:
        return slot
    if not inject:
        # Kotlin-unaware mode: receiver qualifications degrade to plain this.
        if slot.kind == "this":
            return SlotRef.this()
        return slot
    if slot.kind == "this":
        if slot.receiver_kind == "dispatch":
            return SlotRef.this()
        return SlotRef.param(0)  # bare this means the extension receiver
    if slot.kind == "param":
        return SlotRef.param(slot.index + 1)
    return slot


def _infer_defaults_kind(rule: MethodRule, sig: MethodSignature) -> str:
    if rule.attributes.defaults_kind:
        return rule.attributes.defaults_kind
    if isinstance(rule.descriptor, TopLevelDesc):
        return "top_level"
    if sig.is_constructor:
        return "constructor"
    return "member"


def _normalize_rule(
    rule: MethodRule,
    role_index: int,
    aliases: TypeAliasTable,
    options: AnalysisOptions,
) -> NormalizedRule:
    if _rule_is_ablated(rule.descriptor, options):
        return NormalizedRule(rule.role, role_index, rule.ordinal, ())

    def to_expr(text: str) -> KotlinTypeExpr:
        expr = parse_kotlin_type(text)
        if not options.no_alias_resolution:
            expr = resolve_alias(aliases, expr)
        return expr

    mapper = identity_type_mapper if options.no_type_mapping else mapped_type_name
    is_extension = isinstance(rule.descriptor, _EXTENSION_FAMILY)
    inject = not options.no_extension_handling

    base = _build_base_signature(rule, to_expr, mapper, options)

    in_slots = tuple(_resolve_slot(s, is_extension, inject, rule) for s in rule.in_slots)
    out_slots = tuple(_resolve_slot(s, is_extension, inject, rule) for s in rule.out_slots)

    if is_extension and inject and any(
        s.kind == "this" for s in in_slots + out_slots
    ):
        # A surviving this-slot is the dispatch receiver of a member extension.
        base = MethodSignature(
            base.declaring_class, base.return_type, base.name, base.params, is_static=False
        )

    for slot in in_slots + out_slots:
        if slot.kind == "param" and slot.index >= base.arity:
            raise SpecError(
                f"slot {slot.render()} exceeds the arity of {base.render()!r}",
                rule.line,
            )
        if slot.kind == "this" and base.is_static:
            raise SpecError(
                f"this-slot on static method {base.render()!r}", rule.line
            )

    variants = [base_variant(base)]
    try:
        if not options.no_default_expansion and not rule.attributes.no_defaults:
            if is_extension:
                if rule.attributes.defaults_kind:
                    raise SpecError(
                        "default-argument expansion of extension functions is "
                        "not supported; the generated overload's shape is "
                        "undefined for them",
                        rule.line,
                    )
                # No automatic expansion for extension descriptors either.
            else:
                variants = default_variants(base, _infer_defaults_kind(rule, base))
        if rule.attributes.sealed:
            variants.append(sealed_ctor_variant(base))
        if rule.attributes.internal_module is not None:
            variants.append(internal_mangle(base, rule.attributes.internal_module))
    except SignatureError as exc:
        raise SpecError(str(exc), rule.line) from exc

    normalized_variants = []
    for variant in variants:
        remapped_in = tuple(variant.slot_map[s] for s in in_slots)
        remapped_out = tuple(variant.slot_map[s] for s in out_slots)
        normalized_variants.append(
            NormalizedVariant(
                origin=variant.origin.value,
                signature=variant.signature,
                text=variant.signature.render(),
                in_slots=remapped_in,
                out_slots=remapped_out,
            )
        )
    return NormalizedRule(rule.role, role_index, rule.ordinal, tuple(normalized_variants))


def normalize(
    query: TaintQuery,
    aliases: TypeAliasTable,
    options: AnalysisOptions | None = None,
) -> NormalizedQuery:
    """Normalize one query into bytecode-level match sets with taint slots."""
    opts = options or DEFAULT_OPTIONS
    rules: list[NormalizedRule] = []
    for role, bucket in (
        ("source", query.sources),
        ("sink", query.sinks),
        ("sanitizer", query.sanitizers),
        ("propagator", query.propagators),
    ):
        for role_index, rule in enumerate(bucket):
            assert rule.role == role
            rules.append(_normalize_rule(rule, role_index, aliases, opts))
    rules.sort(key=lambda r: r.ordinal)
    return NormalizedQuery(id=query.id, message=query.message, rules=tuple(rules))


def normalize_queries(
    queries: list[TaintQuery],
    aliases: TypeAliasTable,
    options: AnalysisOptions | None = None,
) -> list[NormalizedQuery]:
    return [normalize(q, aliases, options) for q in queries]


# ---------------------------------------------------------------------------
# Rendering


def _render_slots(label: str, slots: tuple[SlotRef, ...]) -> str:
    if not slots:
        return ""
    return f" {label}=" + ",".join(s.render() for s in slots)


def dump_normalized(queries: list[NormalizedQuery]) -> str:
    """Deterministic, sorted rendering of all variants and slots."""
    lines: list[str] = []
    role_order = {role: i for i, role in enumerate(ROLES)}
    for query in sorted(queries, key=lambda q: q.id):
        lines.append(f'query "{query.id}"')
        if query.message:
            lines.append(f'  message "{query.message}"')
        ordered = sorted(query.rules, key=lambda r: (role_order[r.role], r.role_index))
        for rule in ordered:
            lines.append(f"  {rule.role}[{rule.role_index}]")
            if not rule.variants:
                lines.append("    (no variants)")
            for variant in rule.variants:
                lines.append(
                    f"    {variant.origin}: {variant.text}"
                    f"{_render_slots('in', variant.in_slots)}"
                    f"{_render_slots('out', variant.out_slots)}"
                )
    return "\n".join(lines) + ("\n" if lines else "")
