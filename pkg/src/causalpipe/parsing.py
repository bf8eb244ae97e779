"""Readers and writers for the DOT and GML graph subsets.

DOT::

    digraph name? { stmt* }
    stmt  := node_id attrs? ';' | node_id ('->' node_id)+ attrs? ';'
    attrs := '[' key '=' value (',' key '=' value)* ']'

GML::

    graph [ directed 1 node [ id INT label STRING observed STRING? ]* edge [ source INT target INT ]* ]

The only attribute with meaning is ``observed`` (``true``/``false``); other
attributes are ignored with a warning.
"""

from __future__ import annotations

import re
import warnings
from pathlib import Path

from .errors import GraphError, GraphSyntaxError
from .graph import CausalGraph

_DOT_TOKENS = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<arrow>->)
  | (?P<undirected>--)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?(?:\d+\.?\d*|\.\d+))
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\]=;,])
    """,
    re.VERBOSE | re.DOTALL,
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_DOT_KEYWORDS = {"digraph", "graph", "node", "edge", "strict", "subgraph"}


class _Token:
    __slots__ = ("kind", "value", "line", "column")

    def __init__(self, kind, value, line, column):
        self.kind = kind
        self.value = value
        self.line = line
        self.column = column

    def __repr__(self):
        return f"{self.kind}:{self.value!r}@{self.line}:{self.column}"


def _tokenize(text, pattern, skip):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = pattern.match(text, pos)
        if m is None:
            raise GraphSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in skip:
            tokens.append(_Token(kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(value: str) -> str:
    return re.sub(r'\\(["\\])', r"\1", value[1:-1])


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.value)


class _DotParser:
    def __init__(self, text):
        self.tokens = _tokenize(text, _DOT_TOKENS, {"ws", "comment"})
        self.pos = 0
        self.nodes = []
        self.edges = []
        self.observed = {}

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected):
        tok = self.peek()
        raise GraphSyntaxError(f"expected {expected}, found {_describe(tok)}", tok.line, tok.column)

    def accept(self, value):
        tok = self.peek()
        if tok.kind == "punct" and tok.value == value or tok.kind == "arrow" and value == "->":
            self.pos += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.fail(repr(value))

    def keyword(self, word):
        tok = self.peek()
        if tok.kind == "id" and tok.value.lower() == word:
            self.pos += 1
            return True
        return False

    def node_id(self):
        tok = self.peek()
        if tok.kind == "id" and tok.value.lower() not in _DOT_KEYWORDS:
            self.pos += 1
            return tok.value
        if tok.kind == "string":
            self.pos += 1
            return _unquote(tok.value)
        if tok.kind == "number":
            self.pos += 1
            return tok.value
        self.fail("a node identifier")

    def value(self):
        tok = self.peek()
        if tok.kind in ("id", "number"):
            self.pos += 1
            return tok.value
        if tok.kind == "string":
            self.pos += 1
            return _unquote(tok.value)
        self.fail("an attribute value")

    def attrs(self):
        result = []
        while self.accept("["):
            if self.accept("]"):
                continue
            while True:
                key_tok = self.peek()
                key = self.value()
                self.expect("=")
                result.append((key, self.value(), key_tok))
                if self.accept(","):
                    continue
                if self.accept(";"):
                    continue
                if self.accept("]"):
                    break
                self.fail("',' or ']'")
        return result

    def declare(self, name):
        if name not in self.observed:
            self.observed[name] = None
            self.nodes.append(name)

    def set_observed(self, name, raw, tok):
        flag = str(raw).lower()
        if flag not in ("true", "false"):
            raise GraphSyntaxError(
                f"attribute 'observed' must be true or false, got {raw!r}", tok.line, tok.column
            )
        flag = flag == "true"
        if self.observed[name] is not None and self.observed[name] != flag:
            raise GraphSyntaxError(
                f"conflicting 'observed' attributes for node {name!r}", tok.line, tok.column
            )
        self.observed[name] = flag

    def parse(self):
        self.keyword("strict")
        if not self.keyword("digraph"):
            self.fail("'digraph'")
        if self.peek().kind in ("id", "string", "number") and not self.peek().value == "{":
            self.node_id()
        self.expect("{")
        while not self.accept("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            self.statement()
        if self.peek().kind != "eof":
            self.fail("end of input")
        latent = {n for n, flag in self.observed.items() if flag is False}
        return CausalGraph.from_edges(self.edges, nodes=self.nodes, latent=latent)

    def statement(self):
        if self.accept(";"):
            return
        tok = self.peek()
        if tok.kind == "id" and tok.value.lower() in ("graph", "node", "edge"):
            self.pos += 1
            for key, _, ktok in self.attrs():
                warnings.warn(f"ignoring default attribute {key!r} (line {ktok.line})", stacklevel=4)
            self.accept(";")
            return
        if tok.kind == "id" and tok.value.lower() == "subgraph":
            raise GraphSyntaxError("subgraphs are not supported", tok.line, tok.column)
        chain = [self.node_id()]
        if self.accept("="):
            self.value()
            warnings.warn(f"ignoring graph attribute {chain[0]!r} (line {tok.line})", stacklevel=4)
            self.accept(";")
            return
        if self.peek().kind == "undirected":
            t = self.peek()
            raise GraphSyntaxError("undirected edges ('--') are not supported", t.line, t.column)
        while self.accept("->"):
            chain.append(self.node_id())
        for name in chain:
            self.declare(name)
        for key, raw, ktok in self.attrs():
            if key == "observed" and len(chain) == 1:
                self.set_observed(chain[0], raw, ktok)
            else:
                warnings.warn(f"ignoring attribute {key!r} (line {ktok.line})", stacklevel=4)
        for a, b in zip(chain, chain[1:]):
            if a == b:
                raise GraphSyntaxError(f"self-loop on {a!r}", tok.line, tok.column)
            self.edges.append((a, b))
        self.accept(";")


def parse_dot(text: str) -> CausalGraph:
    return _DotParser(text).parse()


def _quote(name: str) -> str:
    if _IDENT.match(name) and name.lower() not in _DOT_KEYWORDS:
        return name
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(g: CausalGraph) -> str:
    lines = ["digraph {"]
    for n in sorted(g.nodes):
        attr = " [observed=false]" if n in g.latent else ""
        lines.append(f"  {_quote(n)}{attr};")
    for a, b in sorted(g.edges):
        lines.append(f"  {_quote(a)} -> {_quote(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


_GML_TOKENS = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"]*")
  | (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<key>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[\[\]])
    """,
    re.VERBOSE,
)


def _gml_list(tokens, pos, closing):
    items = []
    while True:
        tok = tokens[pos]
        if closing and tok.kind == "punct" and tok.value == "]":
            return items, pos + 1
        if tok.kind == "eof":
            if closing:
                raise GraphSyntaxError("expected ']', found end of input", tok.line, tok.column)
            return items, pos
        if tok.kind != "key":
            raise GraphSyntaxError(f"expected a key, found {_describe(tok)}", tok.line, tok.column)
        val = tokens[pos + 1]
        if val.kind == "punct" and val.value == "[":
            inner, pos = _gml_list(tokens, pos + 2, True)
            items.append((tok.value, inner, tok))
        elif val.kind == "string":
            items.append((tok.value, val.value[1:-1], tok))
            pos += 2
        elif val.kind == "number":
            num = float(val.value)
            items.append((tok.value, int(num) if re.fullmatch(r"[-+]?\d+", val.value) else num, tok))
            pos += 2
        else:
            raise GraphSyntaxError(f"expected a value for {tok.value!r}, found {_describe(val)}", val.line, val.column)


def _gml_field(items, key, tok, required=True):
    found = [v for k, v, _ in items if k == key]
    if not found:
        if required:
            raise GraphSyntaxError(f"missing {key!r}", tok.line, tok.column)
        return None
    return found[0]


def parse_gml(text: str) -> CausalGraph:
    tokens = _tokenize(text, _GML_TOKENS, {"ws", "comment"})
    top, _ = _gml_list(tokens, 0, False)
    graphs = [(v, t) for k, v, t in top if k == "graph"]
    if len(graphs) != 1 or not isinstance(graphs[0][0], list):
        tok = tokens[0]
        raise GraphSyntaxError("expected exactly one 'graph [ ... ]' block", tok.line, tok.column)
    body, gtok = graphs[0]
    directed = _gml_field(body, "directed", gtok, required=False)
    if directed != 1:
        raise GraphSyntaxError("graph must declare 'directed 1'", gtok.line, gtok.column)
    labels = {}
    names = []
    latent = set()
    edges = []
    for key, value, tok in body:
        if key == "node":
            if not isinstance(value, list):
                raise GraphSyntaxError("node must be a [ ... ] block", tok.line, tok.column)
            node_id = _gml_field(value, "id", tok)
            if node_id in labels:
                raise GraphSyntaxError(f"duplicate node id {node_id!r}", tok.line, tok.column)
            label = _gml_field(value, "label", tok, required=False)
            label = str(node_id) if label is None else str(label)
            if label in names:
                raise GraphSyntaxError(f"duplicate node label {label!r}", tok.line, tok.column)
            labels[node_id] = label
            names.append(label)
            observed = _gml_field(value, "observed", tok, required=False)
            if observed is not None:
                flag = str(observed).lower()
                if flag in ("false", "0"):
                    latent.add(label)
                elif flag not in ("true", "1"):
                    raise GraphSyntaxError(
                        f"'observed' must be \"true\" or \"false\", got {observed!r}", tok.line, tok.column
                    )
        elif key == "edge":
            if not isinstance(value, list):
                raise GraphSyntaxError("edge must be a [ ... ] block", tok.line, tok.column)
            edges.append((_gml_field(value, "source", tok), _gml_field(value, "target", tok), tok))
        elif key != "directed":
            warnings.warn(f"ignoring GML key {key!r} (line {tok.line})", stacklevel=2)
    resolved = []
    for src, dst, tok in edges:
        for end in (src, dst):
            if end not in labels:
                raise GraphError(f"edge at line {tok.line} references unknown node id {end!r}")
        resolved.append((labels[src], labels[dst]))
    return CausalGraph.from_edges(resolved, nodes=names, latent=latent)


def render_gml(g: CausalGraph) -> str:
    order = sorted(g.nodes)
    ids = {n: i for i, n in enumerate(order)}
    lines = ["graph [", "  directed 1"]
    for n in order:
        obs = ' observed "false"' if n in g.latent else ""
        lines.append(f'  node [ id {ids[n]} label "{n}"{obs} ]')
    for a, b in sorted(g.edges):
        lines.append(f"  edge [ source {ids[a]} target {ids[b]} ]")
    lines.append("]")
    return "\n".join(lines) + "\n"


def sniff_format(path_or_text: str) -> str:
    suffix = Path(path_or_text).suffix.lower() if "\n" not in path_or_text else ""
    if suffix == ".gml":
        return "gml"
    if suffix in (".dot", ".gv"):
        return "dot"
    text = path_or_text
    if suffix or Path(path_or_text).is_file():
        text = Path(path_or_text).read_text()
    return "gml" if re.match(r"\s*(?:#[^\n]*\n\s*)*graph\s*\[", text) else "dot"


def load_graph(path: str, fmt: str = "auto") -> CausalGraph:
    """Read a graph file, choosing the parser from `fmt` or the file itself."""
    if fmt == "auto":
        fmt = sniff_format(path)
    text = Path(path).read_text()
    if fmt == "dot":
        return parse_dot(text)
    if fmt == "gml":
        return parse_gml(text)
    raise ValueError(f"unknown graph format {fmt!r}")
