import string

import pytest
from hypothesis import given, settings, strategies as st

from dhr import DhrRequest
from errors import ParseError, UnknownDhrType, UnknownProperty
from query import Delete, Insert, Select, Update, parse, read_statements, render

EXAMPLE = ("INSERT INTO t (k, c1) VALUES ('x','v') "
           "WITH REQUIREMENTS location = { 'DE', 'FR', 'UK' } AND encryption = { 'AES-256' }")


def test_insert_with_requirements(registry):
    stmt = parse(EXAMPLE, registry)
    assert isinstance(stmt, Insert)
    assert stmt.key == 'x'
    assert stmt.key_column == 'k'
    assert dict(stmt.columns) == {'c1': b'v'}
    assert stmt.req == DhrRequest({'location': {'DE', 'FR', 'UK'}, 'encryption': {256}})


def test_insert_without_requirements(registry):
    stmt = parse("INSERT INTO t (k, c1) VALUES ('x', 'v')", registry)
    assert stmt.req.is_empty()


def test_keywords_ignore_case(registry):
    stmt = parse("select * from users where id = 'alice';", registry)
    assert stmt == Select(key='alice', table='users', key_column='id')


def test_update_keeps_requirements_without_clause(registry):
    stmt = parse("UPDATE t SET c1 = 'w', c2 = 'z' WHERE k = 'x'", registry)
    assert isinstance(stmt, Update)
    assert stmt.req is None
    assert dict(stmt.columns) == {'c1': b'w', 'c2': b'z'}

    moved = parse("UPDATE t SET c1 = 'w' WHERE k = 'x' WITH REQUIREMENTS location = { 'FR' }", registry)
    assert moved.req == DhrRequest({'location': {'FR'}})


def test_delete(registry):
    assert parse("DELETE FROM t WHERE k = 'x'", registry) == Delete(key='x', table='t', key_column='k')


def test_threshold_literal_as_number(registry):
    stmt = parse("INSERT INTO t (k) VALUES ('x') WITH REQUIREMENTS encryption = { 128 }", registry)
    assert stmt.req == DhrRequest({'encryption': {128}})


def test_unknown_property_position(registry):
    text = "INSERT INTO t (k, c1) VALUES ('x','v') WITH REQUIREMENTS location = { 'XX' }"
    with pytest.raises(UnknownProperty) as e:
        parse(text, registry)
    assert e.value.position == text.index("'XX'")


def test_unknown_type_position(registry):
    text = "INSERT INTO t (k) VALUES ('x') WITH REQUIREMENTS colour = { 'red' }"
    with pytest.raises(UnknownDhrType) as e:
        parse(text, registry)
    assert e.value.position == text.index('colour')


def test_positions_are_bytes(registry):
    text = "INSERT INTO t (k, c1) VALUES ('ä','ö') WITH REQUIREMENTS location = { 'XX' }"
    with pytest.raises(UnknownProperty) as e:
        parse(text, registry)
    assert e.value.position == len(text[:text.index("'XX'")].encode('utf-8'))


@pytest.mark.parametrize('text', [
    "INSERT INTO t (k) VALUES ('x') WITH REQUIREMENTS location = { }",
    "INSERT INTO t (k, c1) VALUES ('x')",
    "INSERT INTO t (k, k) VALUES ('x', 'y')",
    "INSERT INTO t (k) VALUES ('')",
    "INSERT INTO t (k) VALUES (5)",
    "SELECT k FROM t WHERE k = 'x'",
    "SELECT * FROM t WHERE k = 'x' extra",
    "DROP TABLE t",
    "SELECT * FROM t WHERE k = 'x",
    "INSERT INTO t (k) VALUES ('x') WITH REQUIREMENTS location = { 'DE' } AND location = { 'FR' }",
    "",
])
def test_syntax_errors(registry, text):
    with pytest.raises(ParseError) as e:
        parse(text, registry)
    assert 0 <= e.value.position <= len(text.encode('utf-8'))


def test_read_statements_skips_comments(tmp_path):
    path = tmp_path / 'script.cql'
    path.write_text("-- setup\nSELECT * FROM t WHERE k = 'a'\n\n  DELETE FROM t WHERE k = 'a'\n", encoding='utf-8')
    assert list(read_statements(path)) == [(2, "SELECT * FROM t WHERE k = 'a'"), (4, "DELETE FROM t WHERE k = 'a'")]


############## Rendering ##############

text_values = st.text(alphabet=string.ascii_letters + string.digits + " '-_.", min_size=1, max_size=12)
demands = st.fixed_dictionaries({}, optional={
    'location': st.sets(st.sampled_from(['DE', 'FR', 'UK', 'US']), min_size=1),
    'encryption': st.sets(st.sampled_from([0, 128, 192, 256]), min_size=1),
})


@st.composite
def statements(draw):
    key = draw(text_values)
    names = draw(st.lists(st.sampled_from(['c0', 'c1', 'c2', 'name']), min_size=1, max_size=3, unique=True))
    columns = {n: draw(text_values).encode('utf-8') for n in names}
    kind = draw(st.sampled_from(['insert', 'select', 'update', 'delete']))
    if kind == 'insert':
        return Insert(key, columns, DhrRequest(draw(demands)), table='t', key_column='k')
    if kind == 'update':
        req = draw(st.one_of(st.none(), demands.filter(bool).map(DhrRequest)))
        return Update(key, columns, req, table='t', key_column='k')
    if kind == 'select':
        return Select(key, table='t', key_column='k')
    return Delete(key, table='t', key_column='k')


@settings(max_examples=10_000, deadline=None)
@given(statements())
def test_render_parses_back(registry, stmt):
    text = render(stmt)
    assert parse(text, registry) == stmt
    assert render(parse(text, registry)) == text
