"""
A small CQL-like statement language with the WITH REQUIREMENTS postfix

Includes:

- the typed statements ```Insert```, ```Select```, ```Update``` and ```Delete```
- ```parse``` (recursive descent, one statement per call) and ```render``` (canonical text)
- ```read_statements``` for statement files

Grammar (keywords are case-insensitive, an optional trailing ';' is accepted):

    INSERT INTO t (key, c1, ...) VALUES ('k', 'v1', ...) [WITH REQUIREMENTS reqs]
    SELECT * FROM t WHERE key = 'k'
    UPDATE t SET c1 = 'v1', ... WHERE key = 'k' [WITH REQUIREMENTS reqs]
    DELETE FROM t WHERE key = 'k'

    reqs := type = { literal, ... } [AND type = { literal, ... }]...

The first INSERT column names the key. Error positions are byte offsets into the UTF-8 text.
"""

import re
from collections import namedtuple
from dataclasses import dataclass, field
from types import MappingProxyType

from const import OP_CREATE, OP_DELETE, OP_READ, OP_UPDATE
from dhr import DhrRequest
from errors import ParseError


############## Statements ##############

@dataclass(frozen=True)
class Insert:
    key: str
    columns: MappingProxyType = field(default_factory=dict, hash=False)
    req: DhrRequest = field(default_factory=DhrRequest)
    table: str = 't'
    key_column: str = 'key'

    op = OP_CREATE

    def __post_init__(self):
        object.__setattr__(self, 'columns', MappingProxyType(dict(self.columns)))


@dataclass(frozen=True)
class Select:
    key: str
    table: str = 't'
    key_column: str = 'key'

    op = OP_READ


@dataclass(frozen=True)
class Update:
    """```req``` is None when the statement carries no requirements clause (existing DHRs are kept)"""
    key: str
    columns: MappingProxyType = field(default_factory=dict, hash=False)
    req: DhrRequest | None = None
    table: str = 't'
    key_column: str = 'key'

    op = OP_UPDATE

    def __post_init__(self):
        object.__setattr__(self, 'columns', MappingProxyType(dict(self.columns)))


@dataclass(frozen=True)
class Delete:
    key: str
    table: str = 't'
    key_column: str = 'key'

    op = OP_DELETE


############## Tokenizer ##############

Token = namedtuple('Token', ['kind', 'value', 'pos'])  # pos is a byte offset

TOKEN_RE = re.compile(r"""
     (?P<ws>\s+)
    |(?P<string>'(?:[^']|'')*')
    |(?P<number>[0-9]+)
    |(?P<word>[A-Za-z_][A-Za-z0-9_\-]*)
    |(?P<punct>[(),;={}*])
""", re.VERBOSE)

KEYWORDS = {'INSERT', 'INTO', 'VALUES', 'SELECT', 'FROM', 'WHERE', 'UPDATE', 'SET',
            'DELETE', 'WITH', 'REQUIREMENTS', 'AND'}


def tokenize(text):
    """Split statement text into tokens, the last one being 'eof'"""
    tokens = []
    i = 0
    byte = 0
    while i < len(text):
        m = TOKEN_RE.match(text, i)
        if m is None:
            if text[i] == "'":
                raise ParseError(byte, 'closing quote', text[i:i + 10])
            raise ParseError(byte, 'token', text[i])
        kind = m.lastgroup
        raw = m.group()
        if kind == 'string':
            tokens.append(Token('string', raw[1:-1].replace("''", "'"), byte))
        elif kind == 'number':
            tokens.append(Token('number', int(raw), byte))
        elif kind == 'word':
            tokens.append(Token('word', raw, byte))
        elif kind == 'punct':
            tokens.append(Token(raw, raw, byte))
        byte += len(raw.encode('utf-8'))
        i = m.end()
    tokens.append(Token('eof', '', byte))
    return tokens


############## Parser ##############

class Parser:
    """
    Recursive descent parser over the token list of one statement

    Attributes:
        registry (Registry): DHR types the requirements clause is validated against
    """

    def __init__(self, text, registry):
        self.tokens = tokenize(text)
        self.registry = registry
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        if tok.kind != 'eof':
            self.i += 1
        return tok

    def fail(self, expected):
        tok = self.peek()
        raise ParseError(tok.pos, expected, str(tok.value) if tok.kind != 'eof' else 'end of input')

    def at_keyword(self, word):
        tok = self.peek()
        return tok.kind == 'word' and tok.value.upper() == word

    def keyword(self, word):
        if not self.at_keyword(word):
            self.fail(word)
        return self.advance()

    def expect(self, kind):
        if self.peek().kind != kind:
            self.fail(repr(kind))
        return self.advance()

    def identifier(self):
        tok = self.peek()
        if tok.kind != 'word' or tok.value.upper() in KEYWORDS:
            self.fail('identifier')
        return self.advance()

    def literal(self):
        tok = self.peek()
        if tok.kind not in ('string', 'number'):
            self.fail('literal')
        return self.advance()

    def key_literal(self):
        tok = self.peek()
        if tok.kind != 'string':
            self.fail('quoted key')
        if tok.value == '':
            self.fail('non-empty key')
        return self.advance().value

    def parse(self):
        tok = self.peek()
        if self.at_keyword('INSERT'):
            stmt = self.insert()
        elif self.at_keyword('SELECT'):
            stmt = self.select()
        elif self.at_keyword('UPDATE'):
            stmt = self.update()
        elif self.at_keyword('DELETE'):
            stmt = self.delete()
        else:
            raise ParseError(tok.pos, 'INSERT, SELECT, UPDATE or DELETE',
                             str(tok.value) if tok.kind != 'eof' else 'end of input')
        if self.peek().kind == ';':
            self.advance()
        if self.peek().kind != 'eof':
            self.fail('end of statement')
        return stmt

    def insert(self):
        self.keyword('INSERT')
        self.keyword('INTO')
        table = self.identifier().value

        self.expect('(')
        names = [self.identifier()]
        while self.peek().kind == ',':
            self.advance()
            names.append(self.identifier())
        self.expect(')')
        self.check_unique(names)

        self.keyword('VALUES')
        values_at = self.expect('(')
        values = [self.literal()]
        while self.peek().kind == ',':
            self.advance()
            values.append(self.literal())
        self.expect(')')
        if len(values) != len(names):
            raise ParseError(values_at.pos, f'{len(names)} values', f'{len(values)} values')

        key_tok = values[0]
        if key_tok.kind != 'string':
            raise ParseError(key_tok.pos, 'quoted key', str(key_tok.value))
        if key_tok.value == '':
            raise ParseError(key_tok.pos, 'non-empty key', "''")

        columns = {n.value: as_bytes(v.value) for n, v in zip(names[1:], values[1:])}
        req = self.requirements() if self.at_keyword('WITH') else DhrRequest()
        return Insert(key=key_tok.value, columns=columns, req=req, table=table, key_column=names[0].value)

    def select(self):
        self.keyword('SELECT')
        self.expect('*')
        self.keyword('FROM')
        table = self.identifier().value
        key_column, key = self.where()
        return Select(key=key, table=table, key_column=key_column)

    def update(self):
        self.keyword('UPDATE')
        table = self.identifier().value
        self.keyword('SET')

        names, values = [], []
        while True:
            names.append(self.identifier())
            self.expect('=')
            values.append(self.literal())
            if self.peek().kind != ',':
                break
            self.advance()
        self.check_unique(names)

        key_column, key = self.where()
        req = self.requirements() if self.at_keyword('WITH') else None
        columns = {n.value: as_bytes(v.value) for n, v in zip(names, values)}
        return Update(key=key, columns=columns, req=req, table=table, key_column=key_column)

    def delete(self):
        self.keyword('DELETE')
        self.keyword('FROM')
        table = self.identifier().value
        key_column, key = self.where()
        return Delete(key=key, table=table, key_column=key_column)

    def where(self):
        self.keyword('WHERE')
        key_column = self.identifier().value
        self.expect('=')
        return key_column, self.key_literal()

    def check_unique(self, names):
        seen = set()
        for n in names:
            if n.value in seen:
                raise ParseError(n.pos, 'distinct column name', n.value)
            seen.add(n.value)

    def requirements(self):
        self.keyword('WITH')
        self.keyword('REQUIREMENTS')
        demands = {}
        while True:
            type_tok = self.identifier()
            if type_tok.value in demands:
                raise ParseError(type_tok.pos, 'a DHR type not used before', type_tok.value)
            dhr_type = self.registry.type(type_tok.value, position=type_tok.pos)

            self.expect('=')
            self.expect('{')
            if self.peek().kind == '}':
                self.fail('property literal')
            wanted = set()
            while True:
                lit = self.literal()
                wanted.add(dhr_type.resolve(lit.value, position=lit.pos))
                if self.peek().kind != ',':
                    break
                self.advance()
            self.expect('}')
            demands[type_tok.value] = frozenset(wanted)

            if not self.at_keyword('AND'):
                break
            self.advance()
        return DhrRequest(demands)


def as_bytes(value):
    return str(value).encode('utf-8')


def parse(text, registry):
    """
    Parse one statement

    Raises ```ParseError```, ```UnknownDhrType``` or ```UnknownProperty``` (all carrying byte positions)
    """
    return Parser(text, registry).parse()


def read_statements(path):
    """
    Statements of a file, one per line

    Blank lines and lines starting with '--' are skipped. Yields (line number, text)
    """
    with open(path, encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if line and not line.startswith('--'):
                yield number, line


############## Rendering ##############

def quote(text):
    return "'" + text.replace("'", "''") + "'"


def render_literal(value):
    if isinstance(value, int):
        return str(value)
    return quote(value)


def render_requirements(req):
    clauses = []
    for type_id in sorted(req.demands):
        literals = ', '.join(render_literal(v) for v in req.sorted_literals(type_id))
        clauses.append(f'{type_id} = {{ {literals} }}')
    return ' WITH REQUIREMENTS ' + ' AND '.join(clauses)


def render(stmt):
    """Canonical text of a statement, ```parse(render(s))``` gives back ```s```"""
    if isinstance(stmt, Insert):
        names = ', '.join([stmt.key_column, *stmt.columns])
        values = ', '.join([quote(stmt.key), *(quote(v.decode('utf-8')) for v in stmt.columns.values())])
        text = f'INSERT INTO {stmt.table} ({names}) VALUES ({values})'
        if not stmt.req.is_empty():
            text += render_requirements(stmt.req)
        return text

    if isinstance(stmt, Select):
        return f'SELECT * FROM {stmt.table} WHERE {stmt.key_column}={quote(stmt.key)}'

    if isinstance(stmt, Update):
        sets = ', '.join(f'{c} = {quote(v.decode("utf-8"))}' for c, v in stmt.columns.items())
        text = f'UPDATE {stmt.table} SET {sets} WHERE {stmt.key_column}={quote(stmt.key)}'
        if stmt.req is not None:
            text += render_requirements(stmt.req)
        return text

    if isinstance(stmt, Delete):
        return f'DELETE FROM {stmt.table} WHERE {stmt.key_column}={quote(stmt.key)}'

    raise TypeError(f'not a statement: {stmt!r}')
