"""A textual three-address IR mirroring Kotlin-compiled bytecode shapes.

Programs are lists of classes; classes hold methods; methods hold a
straight-line list of statements.  The statement set is the minimum
needed to express taint flows through the constructs the Kotlin
compiler lowers specially: identity bindings for ``this`` and
parameters, constants, copies, calls (with receiver, arguments, and an
optional result), field stores/loads, and returns.

Layout is line-oriented: one header or statement per line, ``;`` starts
a comment, and every statement carries the physical line number of its
line unless an explicit ``line N`` suffix overrides it (so fixtures can
mimic original source lines).

Grammar::

    program   := classDecl+
    classDecl := "class" qualName ("file" STRING)? ("extends" qualName)? "{"
                     method*
                 "}"
    method    := "method" STRING ("static")? "{" stmt* "}"
    stmt      := local "=" "param" INT            ; 0-based
               | local "=" "this"
               | local "=" "const" STRING
               | local "=" local
               | (local "=")? "call" STRING ("on" local)? "(" locals? ")"
               | base "." ident "=" local         ; field store
               | local "=" base "." ident         ; field load
               | "return" local?
               | any-stmt "line" INT

The ``method`` STRING is a canonical signature whose class part must
equal the enclosing class.  A field ``base`` is either a local or a
fully-qualified class text; fields are identified by (class text, field
name) only, with local-based accesses keyed by field name alone -- the
analysis deliberately ignores object identity because alias information
is out of scope.  Calls resolve by exact canonical signature text; there
is no class-hierarchy dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .signatures import MethodSignature, SignatureError, parse_signature

__all__ = [
    "IrSyntaxError",
    "Diagnostic",
    "Identity",
    "Const",
    "Copy",
    "Invoke",
    "FieldStore",
    "FieldLoad",
    "Return",
    "IrStatement",
    "IrMethod",
    "IrClass",
    "IrProgram",
    "parse_ir",
    "render_program",
    "validate",
]


class IrSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Identity:
    """Binds a local to an incoming parameter (0-based index) or `this`."""

    dst: str
    source: int | str  # param index, or the string "this"
    line: int


@dataclass(frozen=True)
class Const:
    dst: str
    literal: str
    line: int


@dataclass(frozen=True)
class Copy:
    dst: str
    src: str
    line: int


@dataclass(frozen=True)
class Invoke:
    callee: str  # canonical signature text
    receiver: str | None
    args: tuple[str, ...]
    result: str | None
    line: int

    @property
    def is_static(self) -> bool:
        return self.receiver is None


@dataclass(frozen=True)
class FieldStore:
    base: str  # local name, or class text when base_is_local is False
    field_name: str
    src: str
    base_is_local: bool
    line: int


@dataclass(frozen=True)
class FieldLoad:
    dst: str
    base: str
    field_name: str
    base_is_local: bool
    line: int


@dataclass(frozen=True)
class Return:
    value: str | None
    line: int


IrStatement = Identity | Const | Copy | Invoke | FieldStore | FieldLoad | Return


@dataclass
class IrMethod:
    signature: MethodSignature
    statements: list[IrStatement] = field(default_factory=list)


@dataclass
class IrClass:
    name: str
    source_file: str | None = None
    super_name: str | None = None
    methods: list[IrMethod] = field(default_factory=list)


@dataclass
class IrProgram:
    classes: list[IrClass] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._index: dict[str, tuple[IrClass, IrMethod]] = {}
        self._reindex()

    def _reindex(self) -> None:
        self._index.clear()
        for cls in self.classes:
            for method in cls.methods:
                text = method.signature.render()
                if text in self._index:
                    raise IrSyntaxError(
                        f"duplicate method signature {text!r}",
                        method.statements[0].line if method.statements else 0,
                    )
                self._index[text] = (cls, method)

    @property
    def index(self) -> dict[str, tuple[IrClass, IrMethod]]:
        return self._index

    def lookup(self, signature_text: str) -> tuple[IrClass, IrMethod] | None:
        return self._index.get(signature_text)

    def class_names(self) -> set[str]:
        return {cls.name for cls in self.classes}


# ---------------------------------------------------------------------------
# Tokenizing and parsing


def _strip_comment(text: str) -> str:
    out: list[str] = []
    in_string = False
    for ch in text:
        if ch == '"':
            in_string = not in_string
        if ch == ";" and not in_string:
            break
        out.append(ch)
    return "".join(out)


_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.$")


def _tokenize_line(text: str, line_no: int) -> list[str]:
    """Tokens are quoted strings (kept quoted), identifiers, or punctuation."""
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            end = text.find('"', i + 1)
            if end < 0:
                raise IrSyntaxError("unterminated string", line_no)
            tokens.append(text[i : end + 1])
            i = end + 1
            continue
        if ch in "(),={}":
            tokens.append(ch)
            i += 1
            continue
        if ch in _IDENT_CHARS:
            j = i
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        raise IrSyntaxError(f"unexpected character {ch!r}", line_no)
    return tokens


def _unquote(token: str, line_no: int) -> str:
    if len(token) >= 2 and token.startswith('"') and token.endswith('"'):
        return token[1:-1]
    raise IrSyntaxError(f"expected quoted string, found {token!r}", line_no)


def _is_local(token: str) -> bool:
    return bool(token) and "." not in token and token[0] not in "0123456789"


class _LineCursor:
    def __init__(self, tokens: list[str], line_no: int):
        self.tokens = tokens
        self.pos = 0
        self.line_no = line_no

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise IrSyntaxError("unexpected end of line", self.line_no)
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise IrSyntaxError(f"expected {tok!r}, found {got!r}", self.line_no)

    def done(self) -> bool:
        return self.pos >= len(self.tokens)


def _parse_locals_list(cur: _LineCursor) -> tuple[str, ...]:
    cur.expect("(")
    items: list[str] = []
    if cur.peek() != ")":
        items.append(cur.take())
        while cur.peek() == ",":
            cur.take()
            items.append(cur.take())
    cur.expect(")")
    return tuple(items)


def _parse_invoke(cur: _LineCursor, result: str | None, line_no: int) -> Invoke:
    sig_text = _unquote(cur.take(), line_no)
    try:
        callee = parse_signature(sig_text)
    except SignatureError as exc:
        raise IrSyntaxError(f"bad callee signature: {exc}", line_no) from exc
    receiver = None
    if cur.peek() == "on":
        cur.take()
        receiver = cur.take()
    args = _parse_locals_list(cur)
    if len(args) != callee.arity:
        raise IrSyntaxError(
            f"call passes {len(args)} argument(s) but {sig_text!r} declares "
            f"{callee.arity}",
            line_no,
        )
    return Invoke(
        callee=callee.render(),
        receiver=receiver,
        args=args,
        result=result,
        line=line_no,
    )


def _parse_statement(tokens: list[str], physical_line: int) -> IrStatement:
    # An explicit `line N` suffix overrides the physical line number.
    line_no = physical_line
    if len(tokens) >= 2 and tokens[-2] == "line" and tokens[-1].isdigit():
        line_no = int(tokens[-1])
        tokens = tokens[:-2]
    cur = _LineCursor(tokens, physical_line)

    head = cur.take()
    if head == "return":
        value = cur.take() if not cur.done() else None
        stmt: IrStatement = Return(value=value, line=line_no)
    elif head == "call":
        stmt = _parse_invoke(cur, None, physical_line)
        stmt = Invoke(stmt.callee, stmt.receiver, stmt.args, None, line_no)
    else:
        cur.expect("=")
        if "." in head:
            base, field_name = head.rsplit(".", 1)
            src = cur.take()
            stmt = FieldStore(
                base=base,
                field_name=field_name,
                src=src,
                base_is_local=_is_local(base),
                line=line_no,
            )
        else:
            rhs = cur.take()
            if rhs == "param":
                idx_tok = cur.take()
                if not idx_tok.isdigit():
                    raise IrSyntaxError(
                        f"expected parameter index, found {idx_tok!r}", physical_line
                    )
                stmt = Identity(dst=head, source=int(idx_tok), line=line_no)
            elif rhs == "this":
                stmt = Identity(dst=head, source="this", line=line_no)
            elif rhs == "const":
                literal = _unquote(cur.take(), physical_line)
                stmt = Const(dst=head, literal=literal, line=line_no)
            elif rhs == "call":
                inv = _parse_invoke(cur, head, physical_line)
                stmt = Invoke(inv.callee, inv.receiver, inv.args, head, line_no)
            elif "." in rhs:
                base, field_name = rhs.rsplit(".", 1)
                stmt = FieldLoad(
                    dst=head,
                    base=base,
                    field_name=field_name,
                    base_is_local=_is_local(base),
                    line=line_no,
                )
            else:
                stmt = Copy(dst=head, src=rhs, line=line_no)
    if not cur.done():
        raise IrSyntaxError(
            f"trailing tokens {' '.join(cur.tokens[cur.pos:])!r}", physical_line
        )
    return stmt


def parse_ir(text: str) -> IrProgram:
    classes: list[IrClass] = []
    current_class: IrClass | None = None
    current_method: IrMethod | None = None
    physical_line = 0

    for physical_line, raw_line in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw_line).strip()
        if not stripped:
            continue
        tokens = _tokenize_line(stripped, physical_line)
        head = tokens[0]

        if head == "class":
            if current_class is not None:
                raise IrSyntaxError("nested class declaration", physical_line)
            cur = _LineCursor(tokens, physical_line)
            cur.take()
            name = cur.take()
            source_file = None
            super_name = None
            if cur.peek() == "file":
                cur.take()
                source_file = _unquote(cur.take(), physical_line)
            if cur.peek() == "extends":
                cur.take()
                super_name = cur.take()
            cur.expect("{")
            if not cur.done():
                raise IrSyntaxError("trailing tokens after '{'", physical_line)
            current_class = IrClass(name=name, source_file=source_file, super_name=super_name)
            continue

        if head == "method":
            if current_class is None:
                raise IrSyntaxError("method outside of class", physical_line)
            if current_method is not None:
                raise IrSyntaxError("nested method declaration", physical_line)
            cur = _LineCursor(tokens, physical_line)
            cur.take()
            sig_text = _unquote(cur.take(), physical_line)
            is_static = False
            if cur.peek() == "static":
                cur.take()
                is_static = True
            cur.expect("{")
            if not cur.done():
                raise IrSyntaxError("trailing tokens after '{'", physical_line)
            try:
                sig = parse_signature(sig_text, is_static=is_static)
            except SignatureError as exc:
                raise IrSyntaxError(f"bad method signature: {exc}", physical_line) from exc
            if sig.declaring_class != current_class.name:
                raise IrSyntaxError(
                    f"method class {sig.declaring_class!r} does not match "
                    f"enclosing class {current_class.name!r}",
                    physical_line,
                )
            current_method = IrMethod(signature=sig)
            continue

        if head == "}":
            if len(tokens) != 1:
                raise IrSyntaxError("trailing tokens after '}'", physical_line)
            if current_method is not None:
                current_class.methods.append(current_method)  # type: ignore[union-attr]
                current_method = None
            elif current_class is not None:
                classes.append(current_class)
                current_class = None
            else:
                raise IrSyntaxError("unmatched '}'", physical_line)
            continue

        if current_method is None:
            raise IrSyntaxError(f"statement outside of method: {stripped!r}", physical_line)
        current_method.statements.append(_parse_statement(tokens, physical_line))

    if current_method is not None or current_class is not None:
        raise IrSyntaxError("unexpected end of file: unclosed block", physical_line)
    return IrProgram(classes=classes)


# ---------------------------------------------------------------------------
# Rendering (round-trip support)


def _render_statement(stmt: IrStatement) -> str:
    if isinstance(stmt, Identity):
        rhs = "this" if stmt.source == "this" else f"param {stmt.source}"
        text = f"{stmt.dst} = {rhs}"
    elif isinstance(stmt, Const):
        text = f'{stmt.dst} = const "{stmt.literal}"'
    elif isinstance(stmt, Copy):
        text = f"{stmt.dst} = {stmt.src}"
    elif isinstance(stmt, Invoke):
        prefix = f"{stmt.result} = " if stmt.result else ""
        on = f" on {stmt.receiver}" if stmt.receiver else ""
        text = f'{prefix}call "{stmt.callee}"{on} ({",".join(stmt.args)})'
    elif isinstance(stmt, FieldStore):
        text = f"{stmt.base}.{stmt.field_name} = {stmt.src}"
    elif isinstance(stmt, FieldLoad):
        text = f"{stmt.dst} = {stmt.base}.{stmt.field_name}"
    elif isinstance(stmt, Return):
        text = f"return {stmt.value}" if stmt.value else "return"
    else:  # pragma: no cover
        raise TypeError(f"unknown statement {stmt!r}")
    return f"{text} line {stmt.line}"


def render_program(program: IrProgram) -> str:
    """Render a program; explicit `line N` suffixes keep line association."""
    lines: list[str] = []
    for cls in program.classes:
        header = f"class {cls.name}"
        if cls.source_file:
            header += f' file "{cls.source_file}"'
        if cls.super_name:
            header += f" extends {cls.super_name}"
        lines.append(header + " {")
        for method in cls.methods:
            static = " static" if method.signature.is_static else ""
            lines.append(f'  method "{method.signature.render()}"{static} {{')
            for stmt in method.statements:
                lines.append(f"    {_render_statement(stmt)}")
            lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "warning" | "info"
    line: int
    message: str

    def render(self) -> str:
        return f"{self.severity}: line {self.line}: {self.message}"


def _statement_uses(stmt: IrStatement) -> list[str]:
    if isinstance(stmt, Copy):
        return [stmt.src]
    if isinstance(stmt, Invoke):
        uses = list(stmt.args)
        if stmt.receiver:
            uses.append(stmt.receiver)
        return uses
    if isinstance(stmt, FieldStore):
        return [stmt.src] + ([stmt.base] if stmt.base_is_local else [])
    if isinstance(stmt, FieldLoad):
        return [stmt.base] if stmt.base_is_local else []
    if isinstance(stmt, Return):
        return [stmt.value] if stmt.value else []
    return []


def _statement_defs(stmt: IrStatement) -> list[str]:
    if isinstance(stmt, (Identity, Const, Copy)):
        return [stmt.dst]
    if isinstance(stmt, FieldLoad):
        return [stmt.dst]
    if isinstance(stmt, Invoke) and stmt.result:
        return [stmt.result]
    return []


def validate(program: IrProgram) -> list[Diagnostic]:
    """Non-fatal checks: use-before-def, duplicate identities, unknown callees."""
    diagnostics: list[Diagnostic] = []
    class_names = program.class_names()
    for cls in program.classes:
        for method in cls.methods:
            defined: set[str] = set()
            identity_seen: set[int | str] = set()
            for stmt in method.statements:
                for use in _statement_uses(stmt):
                    if use not in defined:
                        diagnostics.append(
                            Diagnostic(
                                "warning",
                                stmt.line,
                                f"{method.signature.name}: local {use!r} used "
                                "before definition",
                            )
                        )
                if isinstance(stmt, Identity):
                    if stmt.source in identity_seen:
                        diagnostics.append(
                            Diagnostic(
                                "warning",
                                stmt.line,
                                f"{method.signature.name}: duplicate identity "
                                f"binding for {stmt.source!r}",
                            )
                        )
                    identity_seen.add(stmt.source)
                if isinstance(stmt, Invoke):
                    callee_class = stmt.callee.split(":", 1)[0]
                    if callee_class in class_names and program.lookup(stmt.callee) is None:
                        diagnostics.append(
                            Diagnostic(
                                "info",
                                stmt.line,
                                f"call to undefined in-program method {stmt.callee!r}",
                            )
                        )
                for defined_local in _statement_defs(stmt):
                    defined.add(defined_local)
    return diagnostics
