"""Kotlin-source-level type expressions and their bytecode-level spellings.

The Kotlin compiler erases many source-level types when it emits JVM
bytecode: the basic types become primitives (or their boxed classes when
nullable), the collection interfaces collapse onto ``java.util`` types,
``Array<T>`` becomes a reference array, and function types become
``kotlin.jvm.functions.FunctionK`` interfaces keyed only by their arity.
Taint rules are written against the source-level spellings, so before a
rule can be matched against bytecode-level method signatures every type
in it must be rewritten.

Three pieces cooperate:

* :func:`parse_kotlin_type` turns a type text into a
  :class:`KotlinTypeExpr` tree,
* :class:`TypeAliasTable` / :func:`resolve_alias` replace alias names
  with the canonical types an expert declared for them, and
* :func:`map_type` produces the bytecode-level :class:`JvmTypeName`.

In matching contexts the tokens ``_`` and ``*`` as well as bare
single-uppercase-letter type variables (``T``, ``K``, ``V``) act as
wildcards matching any one type; :func:`jvm_type_matches` implements
that comparison for mapped type texts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

__all__ = [
    "FUNCTION_BASE",
    "KotlinTypeExpr",
    "JvmTypeName",
    "TypeAliasTable",
    "TypeSyntaxError",
    "AliasCycleError",
    "parse_kotlin_type",
    "resolve_alias",
    "map_type",
    "map_type_text",
    "mapped_type_name",
    "identity_type_mapper",
    "is_wildcard_name",
    "jvm_type_matches",
]

# Marker used as `base` for function types; never a valid identifier.
FUNCTION_BASE = "->"

MAX_EXPLICIT_FUNCTION_ARITY = 22


class TypeSyntaxError(ValueError):
    """Raised for malformed type texts; carries the offending position."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class AliasCycleError(ValueError):
    """Raised when a type-alias table maps a name back onto itself."""


@dataclass(frozen=True)
class KotlinTypeExpr:
    """A parsed source-level type.

    ``base`` is an identifier (possibly dotted, possibly carrying a
    ``[]`` suffix for texts that are already bytecode-level), the
    wildcard ``_``/``*``, or :data:`FUNCTION_BASE` for function types.
    For function types ``type_args`` holds the parameter types followed
    by the return type, and ``fn_arity`` is the parameter count.
    """

    base: str
    nullable: bool = False
    type_args: tuple[KotlinTypeExpr, ...] = ()
    fn_arity: int | None = None
    raw: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if (self.fn_arity is not None) != (self.base == FUNCTION_BASE):
            raise ValueError("fn_arity is present exactly for function types")
        if self.fn_arity is not None and len(self.type_args) != self.fn_arity + 1:
            raise ValueError("function type carries its parameters plus the return type")

    @property
    def is_function(self) -> bool:
        return self.base == FUNCTION_BASE

    def render(self) -> str:
        """Canonical text; re-parsing it yields an equal expression."""
        if self.is_function:
            params = ", ".join(a.render() for a in self.type_args[:-1])
            text = f"({params}) -> {self.type_args[-1].render()}"
            return f"({text})?" if self.nullable else text
        text = self.base
        if self.type_args:
            text += "<" + ", ".join(a.render() for a in self.type_args) + ">"
        return text + ("?" if self.nullable else "")

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.render()


@dataclass(frozen=True)
class JvmTypeName:
    """A bytecode-level type text (``int``, ``java.lang.Integer``, ...)."""

    name: str

    def __post_init__(self) -> None:
        if "?" in self.name:
            raise ValueError(f"bytecode-level type may not be nullable: {self.name!r}")

    def __str__(self) -> str:
        return self.name


# ---------------------------------------------------------------------------
# Parsing


_TOKEN_RE = re.compile(
    r"->"  # function-type arrow
    r"|[A-Za-z0-9_.$]+(?:\[\])*"  # identifiers, incl. dotted/bytecode array forms
    r"|\*(?:\[\])*"  # star projection / wildcard array
    r"|[?<>(),]"
)


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise TypeSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.group(0), pos))
        pos = m.end()
    return tokens


class _TypeParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def offset(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return len(self.text)

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise TypeSyntaxError("unexpected end of type", self.offset())
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.peek()
        if got != tok:
            raise TypeSyntaxError(f"expected {tok!r}, found {got!r}", self.offset())
        self.pos += 1

    def parse(self) -> KotlinTypeExpr:
        expr = self.parse_type()
        if self.peek() is not None:
            raise TypeSyntaxError(f"trailing input {self.peek()!r}", self.offset())
        return expr

    def parse_type(self) -> KotlinTypeExpr:
        expr = self.parse_primary()
        nullable = expr.nullable
        while self.peek() == "?":
            self.take()
            nullable = True
        if nullable != expr.nullable:
            expr = replace(expr, nullable=nullable)
        return expr

    def parse_primary(self) -> KotlinTypeExpr:
        tok = self.peek()
        if tok is None:
            raise TypeSyntaxError("empty type", self.offset())
        if tok == "(":
            return self.parse_parenthesized()
        if tok in (")", ",", ">", "<", "?", FUNCTION_BASE):
            raise TypeSyntaxError(f"unexpected {tok!r}", self.offset())
        self.take()
        base = tok
        args: tuple[KotlinTypeExpr, ...] = ()
        if self.peek() == "<":
            self.take()
            items = [self.parse_type()]
            while self.peek() == ",":
                self.take()
                items.append(self.parse_type())
            if self.peek() != ">":
                raise TypeSyntaxError("unbalanced '<'", self.offset())
            self.take()
            args = tuple(items)
        return KotlinTypeExpr(base=base, type_args=args)

    def parse_parenthesized(self) -> KotlinTypeExpr:
        start = self.offset()
        self.expect("(")
        items: list[KotlinTypeExpr] = []
        if self.peek() != ")":
            items.append(self.parse_type())
            while self.peek() == ",":
                self.take()
                items.append(self.parse_type())
        if self.peek() != ")":
            raise TypeSyntaxError("unbalanced '('", self.offset())
        self.take()
        if self.peek() == FUNCTION_BASE:
            self.take()
            ret = self.parse_type()
            if ret.is_function or any(p.is_function for p in items):
                raise TypeSyntaxError(
                    "nested function types are not supported; "
                    "use a wildcard form such as (_) -> _",
                    start,
                )
            return KotlinTypeExpr(
                base=FUNCTION_BASE,
                type_args=tuple(items) + (ret,),
                fn_arity=len(items),
            )
        if len(items) != 1:
            raise TypeSyntaxError("parenthesized group must contain one type", start)
        return items[0]


def parse_kotlin_type(text: str) -> KotlinTypeExpr:
    """Parse a source-level type text into a :class:`KotlinTypeExpr`."""
    if not text or not text.strip():
        raise TypeSyntaxError("empty type text")
    parser = _TypeParser(text)
    expr = parser.parse()
    return replace(expr, raw=text)


# ---------------------------------------------------------------------------
# Type aliases


def _alias_names_in(expr: KotlinTypeExpr) -> set[str]:
    names = set() if expr.is_function else {expr.base}
    for arg in expr.type_args:
        names |= _alias_names_in(arg)
    return names


@dataclass(frozen=True)
class TypeAliasTable:
    """Maps alias names onto canonical source-level type texts.

    The table must be cycle-free; construction rejects any alias that
    reaches itself directly or through other aliases.
    """

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.entries:
            seen = {name}
            frontier = _alias_names_in(parse_kotlin_type(self.entries[name]))
            while frontier:
                nxt: set[str] = set()
                for cand in frontier:
                    if cand in seen and cand in self.entries:
                        raise AliasCycleError(f"type alias cycle through {cand!r}")
                    if cand in self.entries and cand not in seen:
                        seen.add(cand)
                        nxt |= _alias_names_in(parse_kotlin_type(self.entries[cand]))
                frontier = nxt

    def lookup(self, name: str) -> str | None:
        return self.entries.get(name)

    def __len__(self) -> int:
        return len(self.entries)


EMPTY_ALIASES = TypeAliasTable()


def resolve_alias(table: TypeAliasTable, expr: KotlinTypeExpr) -> KotlinTypeExpr:
    """Replace every alias occurrence, including inside type arguments."""
    if expr.is_function:
        parts = tuple(resolve_alias(table, a) for a in expr.type_args)
        return replace(expr, type_args=parts)
    resolved_args = tuple(resolve_alias(table, a) for a in expr.type_args)
    target = table.lookup(expr.base)
    if target is None:
        return replace(expr, type_args=resolved_args)
    replacement = resolve_alias(table, parse_kotlin_type(target))
    return replace(
        replacement,
        nullable=replacement.nullable or expr.nullable,
        type_args=resolved_args if resolved_args else replacement.type_args,
        raw=expr.raw,
    )


# ---------------------------------------------------------------------------
# Kotlin -> bytecode mapping tables

# (primitive spelling, boxed spelling); the boxed form is used for
# nullable occurrences and for reference positions (type arguments,
# Array elements).
_BASIC_TYPES: dict[str, tuple[str, str]] = {
    "Byte": ("byte", "java.lang.Byte"),
    "Short": ("short", "java.lang.Short"),
    "Int": ("int", "java.lang.Integer"),
    "Long": ("long", "java.lang.Long"),
    "Char": ("char", "java.lang.Character"),
    "Float": ("float", "java.lang.Float"),
    "Double": ("double", "java.lang.Double"),
    "Boolean": ("boolean", "java.lang.Boolean"),
}

_BUILTIN_CLASSES: dict[str, str] = {
    "Any": "java.lang.Object",
    "Cloneable": "java.lang.Cloneable",
    "Comparable": "java.lang.Comparable",
    "Enum": "java.lang.Enum",
    "Annotation": "java.lang.Annotation",
    "CharSequence": "java.lang.CharSequence",
    "String": "java.lang.String",
    "Number": "java.lang.Number",
    "Throwable": "java.lang.Throwable",
}

_PRIMITIVE_ARRAYS: dict[str, str] = {
    "ByteArray": "byte[]",
    "ShortArray": "short[]",
    "IntArray": "int[]",
    "LongArray": "long[]",
    "CharArray": "char[]",
    "FloatArray": "float[]",
    "DoubleArray": "double[]",
    "BooleanArray": "boolean[]",
}

# Mutable and immutable collections collapse onto the same bytecode types.
_COLLECTIONS: dict[str, str] = {
    "Collection": "java.util.Collection",
    "List": "java.util.List",
    "Set": "java.util.Set",
    "Map": "java.util.Map",
    "Map.Entry": "java.util.Map.Entry",
    "Iterator": "java.util.Iterator",
    "Iterable": "java.lang.Iterable",
    "ListIterator": "java.util.ListIterator",
    "MutableCollection": "java.util.Collection",
    "MutableList": "java.util.List",
    "MutableSet": "java.util.Set",
    "MutableMap": "java.util.Map",
    "MutableMap.Entry": "java.util.Map.Entry",
    "MutableIterator": "java.util.Iterator",
    "MutableIterable": "java.lang.Iterable",
    "MutableListIterator": "java.util.ListIterator",
}

_ALL_TABLE_KEYS = (
    {"Unit", "Nothing", "Array"}
    | set(_BASIC_TYPES)
    | set(_BUILTIN_CLASSES)
    | set(_PRIMITIVE_ARRAYS)
    | set(_COLLECTIONS)
)


def _table_key(base: str) -> str:
    """Accept fully-qualified kotlin spellings for the tabled short names."""
    if base in _ALL_TABLE_KEYS:
        return base
    for prefix in ("kotlin.collections.", "kotlin."):
        if base.startswith(prefix) and base[len(prefix):] in _ALL_TABLE_KEYS:
            return base[len(prefix):]
    return base


def is_wildcard_name(name: str) -> bool:
    """True for the match-anything tokens: ``_``, ``*``, and bare type variables."""
    return name in ("_", "*") or (len(name) == 1 and name.isupper())


def _map_expr(expr: KotlinTypeExpr, reference: bool) -> str:
    if expr.is_function:
        arity = expr.fn_arity or 0
        if arity <= MAX_EXPLICIT_FUNCTION_ARITY:
            return f"kotlin.jvm.functions.Function{arity}"
        return "kotlin.jvm.functions.FunctionN"

    base = _table_key(expr.base)

    if base == "Unit":
        # The nullable form survives as a reference to the unit object.
        return "Unit" if (expr.nullable or reference) else "void"
    if base == "Nothing":
        return "java.lang.Void"
    if base in _BASIC_TYPES:
        primitive, boxed = _BASIC_TYPES[base]
        return boxed if (expr.nullable or reference) else primitive
    if base in _BUILTIN_CLASSES:
        return _BUILTIN_CLASSES[base]
    if base == "Array" and expr.type_args:
        return _map_expr(expr.type_args[0], reference=True) + "[]"
    if base in _PRIMITIVE_ARRAYS:
        return _PRIMITIVE_ARRAYS[base]
    if base in _COLLECTIONS:
        mapped = _COLLECTIONS[base]
        if expr.type_args:
            args = ", ".join(_map_expr(a, reference=True) for a in expr.type_args)
            return f"{mapped}<{args}>"
        return mapped

    # Wildcards, type variables, and unknown names pass through (with any
    # `?` dropped); short names are deliberately never package-prefixed.
    if expr.type_args:
        args = ", ".join(_map_expr(a, reference=True) for a in expr.type_args)
        return f"{expr.base}<{args}>"
    return expr.base


def map_type(expr: KotlinTypeExpr) -> JvmTypeName:
    """Map an alias-resolved type expression to its bytecode-level name."""
    return JvmTypeName(_map_expr(expr, reference=False))


def mapped_type_name(expr: KotlinTypeExpr) -> str:
    """Default type mapper used by signature synthesis."""
    return map_type(expr).name


def identity_type_mapper(expr: KotlinTypeExpr) -> str:
    """Render the source-level spelling unchanged (ablation support).

    Nullability markers are kept, so unmapped rule types will not match
    bytecode-level signatures; that is the point of the ablation.
    """
    return expr.render()


def map_type_text(text: str, aliases: TypeAliasTable | None = None) -> str:
    """Convenience: parse, alias-resolve, and map a type text."""
    expr = parse_kotlin_type(text)
    expr = resolve_alias(aliases or EMPTY_ALIASES, expr)
    return map_type(expr).name


# ---------------------------------------------------------------------------
# Wildcard-aware matching over bytecode-level type texts


def _split_array_suffix(name: str) -> tuple[str, int]:
    dims = 0
    while name.endswith("[]"):
        name = name[:-2]
        dims += 1
    return name, dims


def _expr_matches(pattern: KotlinTypeExpr, actual: KotlinTypeExpr) -> bool:
    if pattern.is_function or actual.is_function:
        return (
            pattern.is_function
            and actual.is_function
            and pattern.fn_arity == actual.fn_arity
            and all(
                _expr_matches(p, a)
                for p, a in zip(pattern.type_args, actual.type_args)
            )
        )
    p_base, p_dims = _split_array_suffix(pattern.base)
    a_base, a_dims = _split_array_suffix(actual.base)
    if is_wildcard_name(p_base) and not pattern.type_args:
        if p_dims == 0:
            return True  # a bare wildcard matches any one type
        return p_dims == a_dims
    if p_dims != a_dims or p_base != a_base:
        return False
    if len(pattern.type_args) != len(actual.type_args):
        return False
    return all(
        _expr_matches(p, a) for p, a in zip(pattern.type_args, actual.type_args)
    )


def jvm_type_matches(pattern: str, actual: str) -> bool:
    """Wildcard-aware comparison of two bytecode-level type texts."""
    if pattern == actual:
        return True
    try:
        p = parse_kotlin_type(pattern)
        a = parse_kotlin_type(actual)
    except TypeSyntaxError:
        return False
    return _expr_matches(p, a)
