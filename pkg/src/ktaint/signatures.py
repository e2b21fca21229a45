"""Bytecode-level method signatures and the compiler-generated variants.

Kotlin constructs that have no direct Java counterpart (properties,
top-level members, extensions, companion objects, infix functions and
operator overloads) compile to ordinary JVM methods whose names and
parameter lists follow fixed, mechanical rules.  This module builds
those signatures from construct descriptors, and expands a base
signature into the variants the compiler additionally emits:
``$default`` overloads for default arguments, the marker-overloaded
constructor of sealed classes, and the hyphen-mangled names of
``internal`` members.

Each variant carries a slot map from the base signature's taint slots
(``this``, parameters, return) to the variant's slots, so the caller
can track the same value through a generated overload whose parameter
list has shifted.

Everything here is a pure function over immutable values.

Canonical signature text:

    <class>: <return> <name>(<p1>,<p2>,...)

with a single space after the colon and between return type and name,
and no spaces after the parameter commas.  Type arguments inside a
parameter keep their own ``, `` separators; the parameter splitter is
angle-bracket aware.
"""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .kotlin_types import (
    KotlinTypeExpr,
    mapped_type_name,
)

__all__ = [
    "CONSTRUCTOR_NAME",
    "DEFAULT_SUFFIX",
    "DEFAULT_CONSTRUCTOR_MARKER",
    "MethodSignature",
    "SignatureError",
    "SlotRef",
    "SignatureVariant",
    "VariantOrigin",
    "SyntheticNameKind",
    "parse_signature",
    "parse_member_signature",
    "split_parameter_list",
    "property_accessors",
    "top_level_class",
    "extension_signature",
    "extension_property_getter",
    "companion_wrapper",
    "infix_signature",
    "operator_signature",
    "default_variants",
    "sealed_ctor_variant",
    "internal_mangle",
    "classify_generated_name",
]

CONSTRUCTOR_NAME = "<init>"
DEFAULT_SUFFIX = "$default"
DEFAULT_CONSTRUCTOR_MARKER = "kotlin.jvm.internal.DefaultConstructorMarker"

TypeMapper = Callable[[KotlinTypeExpr], str]


class SignatureError(ValueError):
    """Raised when a construct descriptor cannot produce a signature."""


# ---------------------------------------------------------------------------
# Slots


@dataclass(frozen=True)
class SlotRef:
    """A taint position at a method boundary.

    ``kind`` is ``"this"``, ``"param"`` or ``"return"``; ``index`` is the
    0-based parameter index for ``param`` slots.  ``receiver_kind``
    (``"dispatch"`` or ``"extension"``) qualifies a ``this`` slot written
    against an extension member and is resolved away during
    normalization.
    """

    kind: str
    index: int | None = None
    receiver_kind: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("this", "param", "return"):
            raise ValueError(f"unknown slot kind {self.kind!r}")
        if (self.kind == "param") != (self.index is not None):
            raise ValueError("param slots carry an index, other slots do not")
        if self.index is not None and self.index < 0:
            raise ValueError("param index is 0-based and non-negative")
        if self.receiver_kind is not None and self.kind != "this":
            raise ValueError("receiver_kind only applies to this-slots")
        if self.receiver_kind not in (None, "dispatch", "extension"):
            raise ValueError(f"unknown receiver kind {self.receiver_kind!r}")

    @classmethod
    def this(cls, receiver_kind: str | None = None) -> SlotRef:
        return cls("this", receiver_kind=receiver_kind)

    @classmethod
    def param(cls, index: int) -> SlotRef:
        return cls("param", index=index)

    @classmethod
    def ret(cls) -> SlotRef:
        return cls("return")

    def render(self) -> str:
        if self.kind == "param":
            return f"param({self.index})"
        if self.kind == "this" and self.receiver_kind:
            return f"this[{self.receiver_kind}]"
        return self.kind

    def sort_key(self) -> tuple:
        order = {"this": 0, "param": 1, "return": 2}
        return (order[self.kind], self.index if self.index is not None else -1)


# ---------------------------------------------------------------------------
# Signatures


@dataclass(frozen=True)
class MethodSignature:
    """A bytecode-level method identity.

    Equality and hashing cover only the textual identity (class, return,
    name, parameters); staticness cannot be recovered from the canonical
    text, so it is carried as metadata.
    """

    declaring_class: str
    return_type: str
    name: str
    params: tuple[str, ...] = ()
    is_static: bool = field(default=False, compare=False)
    is_constructor: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "is_constructor", self.name == CONSTRUCTOR_NAME)

    @property
    def arity(self) -> int:
        return len(self.params)

    def render(self) -> str:
        return (
            f"{self.declaring_class}: {self.return_type} "
            f"{self.name}({','.join(self.params)})"
        )

    def __str__(self) -> str:
        return self.render()


def split_parameter_list(text: str) -> list[str]:
    """Split a parameter list on top-level commas (angle-bracket aware)."""
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in text:
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
            continue
        current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    if depth != 0:
        raise SignatureError(f"unbalanced angle brackets in parameter list: {text!r}")
    return parts


def parse_member_signature(text: str) -> tuple[str, str, tuple[str, ...]]:
    """Parse ``<return> <name>(<params>)`` (a signature without its class)."""
    open_paren = text.find("(")
    if open_paren < 0 or not text.rstrip().endswith(")"):
        raise SignatureError(f"missing parameter list in {text!r}")
    head = text[:open_paren].strip()
    params_text = text[open_paren + 1 : text.rstrip().rfind(")")]
    depth = 0
    split_at = -1
    for i, ch in enumerate(head):
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth -= 1
        elif ch == " " and depth == 0:
            split_at = i
            break
    if split_at < 0:
        raise SignatureError(f"missing return type or method name in {text!r}")
    return_type = head[:split_at].strip()
    name = head[split_at + 1 :].strip()
    if not return_type or not name:
        raise SignatureError(f"missing return type or method name in {text!r}")
    params = tuple(split_parameter_list(params_text))
    return return_type, name, params


def parse_signature(text: str, is_static: bool = False) -> MethodSignature:
    """Parse canonical signature text back into a :class:`MethodSignature`."""
    sep = text.find(": ")
    if sep < 0:
        raise SignatureError(f"missing ': ' separator in signature {text!r}")
    declaring_class = text[:sep].strip()
    if not declaring_class:
        raise SignatureError(f"missing declaring class in {text!r}")
    return_type, name, params = parse_member_signature(text[sep + 2 :])
    return MethodSignature(
        declaring_class=declaring_class,
        return_type=return_type,
        name=name,
        params=params,
        is_static=is_static,
    )


# ---------------------------------------------------------------------------
# Variants


class VariantOrigin(enum.Enum):
    BASE = "base"
    DEFAULT_ARGS = "default_args"
    SEALED_CTOR = "sealed_ctor"
    INTERNAL_MANGLED = "internal_mangled"


@dataclass
class SignatureVariant:
    """One compiler-emitted shape of a base signature.

    ``slot_map`` is total over the base signature's ``this``, parameters
    and ``return``, and injective.
    """

    signature: MethodSignature
    slot_map: dict[SlotRef, SlotRef]
    origin: VariantOrigin


def _identity_slot_map(sig: MethodSignature) -> dict[SlotRef, SlotRef]:
    mapping = {SlotRef.this(): SlotRef.this(), SlotRef.ret(): SlotRef.ret()}
    for i in range(sig.arity):
        mapping[SlotRef.param(i)] = SlotRef.param(i)
    return mapping


def base_variant(sig: MethodSignature) -> SignatureVariant:
    return SignatureVariant(sig, _identity_slot_map(sig), VariantOrigin.BASE)


def default_variants(sig: MethodSignature, kind: str) -> list[SignatureVariant]:
    """The base signature plus the generated default-argument overload.

    ``kind`` selects the shape: constructors gain ``int`` and the
    constructor marker; top-level functions gain ``int`` and
    ``java.lang.Object`` under a ``$default`` name; member functions
    additionally receive the declaring class as a new first parameter,
    shifting every original slot right by one.
    """
    if kind not in ("constructor", "top_level", "member"):
        raise SignatureError(f"unknown default-argument kind {kind!r}")
    if (kind == "constructor") != sig.is_constructor:
        raise SignatureError(
            f"default-argument kind {kind!r} does not fit method {sig.name!r}"
        )
    variants = [base_variant(sig)]
    if kind == "constructor":
        variant_sig = replace(
            sig, params=sig.params + ("int", DEFAULT_CONSTRUCTOR_MARKER)
        )
        variants.append(
            SignatureVariant(variant_sig, _identity_slot_map(sig), VariantOrigin.DEFAULT_ARGS)
        )
    elif kind == "top_level":
        variant_sig = replace(
            sig,
            name=sig.name + DEFAULT_SUFFIX,
            params=sig.params + ("int", "java.lang.Object"),
            is_static=True,
        )
        variants.append(
            SignatureVariant(variant_sig, _identity_slot_map(sig), VariantOrigin.DEFAULT_ARGS)
        )
    else:
        variant_sig = replace(
            sig,
            name=sig.name + DEFAULT_SUFFIX,
            params=(sig.declaring_class,) + sig.params + ("int", "java.lang.Object"),
            is_static=True,
        )
        slot_map = {SlotRef.this(): SlotRef.param(0), SlotRef.ret(): SlotRef.ret()}
        for i in range(sig.arity):
            slot_map[SlotRef.param(i)] = SlotRef.param(i + 1)
        variants.append(
            SignatureVariant(variant_sig, slot_map, VariantOrigin.DEFAULT_ARGS)
        )
    return variants


def sealed_ctor_variant(sig: MethodSignature) -> SignatureVariant:
    """The marker-overloaded constructor emitted for sealed classes."""
    if not sig.is_constructor:
        raise SignatureError("sealed-class overload applies to constructors only")
    variant_sig = replace(sig, params=sig.params + (DEFAULT_CONSTRUCTOR_MARKER,))
    return SignatureVariant(variant_sig, _identity_slot_map(sig), VariantOrigin.SEALED_CTOR)


def internal_mangle(sig: MethodSignature, module_name: str) -> SignatureVariant:
    """The hyphen-mangled name of an ``internal`` member.

    Hyphens inside the module name itself become underscores before the
    module name is appended.
    """
    if not module_name:
        warnings.warn(
            "empty module name produces a bare trailing hyphen", stacklevel=2
        )
    mangled = f"{sig.name}-{module_name.replace('-', '_')}"
    variant_sig = replace(sig, name=mangled)
    return SignatureVariant(variant_sig, _identity_slot_map(sig), VariantOrigin.INTERNAL_MANGLED)


# ---------------------------------------------------------------------------
# Construct signature synthesis


def _cap_first(name: str) -> str:
    return name[:1].upper() + name[1:]


def property_accessors(
    class_name: str,
    prop_name: str,
    prop_type: KotlinTypeExpr,
    want: str = "both",
    mapper: TypeMapper = mapped_type_name,
) -> list[MethodSignature]:
    """Accessor signatures for a property: getter, setter, or both.

    Only the first letter of the property name is upper-cased; an
    already-capitalized name is used as-is.
    """
    if not prop_name:
        raise SignatureError("property name must be non-empty")
    if want not in ("getter", "setter", "both"):
        raise SignatureError(f"unknown accessor selection {want!r}")
    mapped = mapper(prop_type)
    out: list[MethodSignature] = []
    if want in ("getter", "both"):
        out.append(
            MethodSignature(class_name, mapped, f"get{_cap_first(prop_name)}")
        )
    if want in ("setter", "both"):
        out.append(
            MethodSignature(class_name, "void", f"set{_cap_first(prop_name)}", (mapped,))
        )
    return out


def top_level_class(package: str, file_name: str) -> str:
    """The synthetic class hosting a file's top-level members."""
    base = file_name[:-3] if file_name.endswith(".kt") else file_name
    return f"{package}.{base}Kt" if package else f"{base}Kt"


def extension_signature(
    container: str,
    receiver: KotlinTypeExpr,
    name: str,
    params: Sequence[KotlinTypeExpr],
    ret: KotlinTypeExpr,
    mapper: TypeMapper = mapped_type_name,
    inject_receiver: bool = True,
    is_static: bool = True,
) -> MethodSignature:
    """An extension function's signature: the receiver becomes parameter 0.

    ``inject_receiver=False`` reproduces the receiver-unaware shape a
    plain Java analysis would assume (ablation support).
    """
    mapped_params = tuple(mapper(p) for p in params)
    if inject_receiver:
        mapped_params = (mapper(receiver),) + mapped_params
    return MethodSignature(
        container, mapper(ret), name, mapped_params, is_static=is_static
    )


def extension_property_getter(
    container: str,
    receiver: KotlinTypeExpr,
    prop_name: str,
    prop_type: KotlinTypeExpr,
    mapper: TypeMapper = mapped_type_name,
    inject_receiver: bool = True,
) -> MethodSignature:
    """Getter of an extension property; extension properties have no setter."""
    getter = property_accessors(container, prop_name, prop_type, "getter", mapper)[0]
    params = (mapper(receiver),) + getter.params if inject_receiver else getter.params
    return replace(getter, params=params, is_static=True)


def companion_wrapper(class_name: str, companion_name: str | None = None) -> str:
    """The wrapper class generated for a companion object."""
    return f"{class_name}${companion_name or 'Companion'}"


def infix_signature(
    receiver: KotlinTypeExpr,
    name: str,
    params: Sequence[KotlinTypeExpr],
    ret: KotlinTypeExpr,
    mapper: TypeMapper = mapped_type_name,
) -> MethodSignature:
    """An infix function: exactly one parameter, declared on the receiver."""
    if len(params) != 1:
        raise SignatureError(
            f"infix functions take exactly one parameter, got {len(params)}"
        )
    return MethodSignature(
        mapper(receiver), mapper(ret), name, (mapper(params[0]),)
    )


_UNARY_OPERATORS = {
    "+": "unaryPlus",
    "-": "unaryMinus",
    "!": "not",
    "++": "inc",
    "--": "dec",
}

_BINARY_OPERATORS = {
    "+": "plus",
    "-": "minus",
    "*": "times",
    "/": "div",
    "%": "rem",
    "..": "rangeTo",
    "+=": "plusAssign",
    "-=": "minusAssign",
    "*=": "timesAssign",
    "/=": "divAssign",
    "%=": "remAssign",
    "==": "equals",
    "!=": "equals",
    "in": "contains",
    "!in": "contains",
    ">": "compareTo",
    "<": "compareTo",
    ">=": "compareTo",
    "<=": "compareTo",
}

# get/set/invoke accept a variable number of operands; for index-set the
# assigned value is the final operand.
_VARIADIC_OPERATORS = {"[]": ("get", 1), "[]=": ("set", 2), "()": ("invoke", 0)}

SUPPORTED_OPERATOR_SYMBOLS = tuple(
    sorted(set(_UNARY_OPERATORS) | set(_BINARY_OPERATORS) | set(_VARIADIC_OPERATORS))
)


def operator_function_name(symbol: str, operand_count: int) -> str:
    """Map an operator symbol (plus its operand count) to the function name."""
    if symbol in _VARIADIC_OPERATORS:
        name, min_operands = _VARIADIC_OPERATORS[symbol]
        if operand_count < min_operands:
            raise SignatureError(
                f"operator {symbol!r} needs at least {min_operands} operand(s)"
            )
        return name
    unary = _UNARY_OPERATORS.get(symbol)
    binary = _BINARY_OPERATORS.get(symbol)
    if unary is None and binary is None:
        supported = ", ".join(SUPPORTED_OPERATOR_SYMBOLS)
        raise SignatureError(
            f"unknown operator symbol {symbol!r}; supported symbols: {supported}"
        )
    if operand_count == 0 and unary is not None:
        return unary
    if operand_count == 1 and binary is not None:
        return binary
    expected = " or ".join(
        str(n) for n, present in ((0, unary), (1, binary)) if present is not None
    )
    raise SignatureError(
        f"operator {symbol!r} takes {expected} operand(s), got {operand_count}"
    )


def operator_signature(
    symbol: str,
    receiver: KotlinTypeExpr,
    operand_types: Sequence[KotlinTypeExpr],
    ret: KotlinTypeExpr,
    mapper: TypeMapper = mapped_type_name,
) -> MethodSignature:
    """An overloaded operator's signature via the symbol-to-name mapping."""
    fn_name = operator_function_name(symbol, len(operand_types))
    return MethodSignature(
        mapper(receiver),
        mapper(ret),
        fn_name,
        tuple(mapper(t) for t in operand_types),
    )


# ---------------------------------------------------------------------------
# Synthetic name classification


class SyntheticNameKind(enum.Enum):
    DEFAULT_VARIANT = "default_variant"
    COMPANION_WRAPPER = "companion_wrapper"
    COMPANION_ACCESS_BRIDGE = "companion_access_bridge"
    LOCAL_FUNCTION = "local_function"
    LAMBDA_WRAPPER = "lambda_wrapper"
    INLINE_IMPL = "inline_impl"
    INLINE_BOX = "inline_box"
    INLINE_UNBOX = "inline_unbox"
    INTERNAL_MANGLED = "internal_mangled"
    PLAIN = "plain"


_LAMBDA_WRAPPER_RE = re.compile(r"\$\d+$")


def classify_generated_name(name: str) -> SyntheticNameKind:
    """Classify a method or class name by the compiler's naming schemes.

    Diagnostic only; classification never changes rule matching.  Checks
    run in a fixed priority order so that e.g. ``box-impl`` is reported
    as the boxing helper rather than a generic ``-impl`` body.
    """
    if name.endswith(DEFAULT_SUFFIX):
        return SyntheticNameKind.DEFAULT_VARIANT
    if name == "box-impl":
        return SyntheticNameKind.INLINE_BOX
    if name == "unbox-impl":
        return SyntheticNameKind.INLINE_UNBOX
    if name.endswith("-impl"):
        return SyntheticNameKind.INLINE_IMPL
    if name.startswith("access$"):
        return SyntheticNameKind.COMPANION_ACCESS_BRIDGE
    if name.endswith("$Companion"):
        return SyntheticNameKind.COMPANION_WRAPPER
    if _LAMBDA_WRAPPER_RE.search(name):
        return SyntheticNameKind.LAMBDA_WRAPPER
    if "$" in name:
        return SyntheticNameKind.LOCAL_FUNCTION
    if "-" in name:
        return SyntheticNameKind.INTERNAL_MANGLED
    return SyntheticNameKind.PLAIN
