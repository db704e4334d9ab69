import csv
import json
import os

import pytest

from main import main
from settings import CONFIG_DIR

STATEMENTS = os.path.join(CONFIG_DIR, 'statements.cql')


@pytest.fixture
def out(tmp_path):
    return str(tmp_path / 'results')


def run(*argv):
    return main([*argv, '--quiet'])


def test_run_statement_file(out, capsys):
    assert run('run', '--file', STATEMENTS, '--out', out, '--seed', '3') == 0
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 7
    assert printed[-1].startswith('not_found')

    with open(os.path.join(out, 'ops.csv'), encoding='utf-8') as f:
        rows = list(csv.DictReader(f))
    assert [row['kind'] for row in rows] == ['create', 'read', 'update', 'read', 'create', 'delete', 'read']
    with open(os.path.join(out, 'summary.json'), encoding='utf-8') as f:
        assert json.load(f)['seed'] == 3
    assert len(os.listdir(os.path.join(out, 'snapshots'))) == 10

    assert run('check', os.path.join(out, 'snapshots')) == 0


def test_run_statements_from_arguments(out, capsys):
    code = run('run', "INSERT INTO t (k, v) VALUES ('a', 'b')", "SELECT * FROM t WHERE k = 'a'",
               '--out', out, '--coordinator', '4')
    assert code == 0
    assert "v='b'" in capsys.readouterr().out.splitlines()[1]


def test_error_reply_fails_the_run(out):
    stmt = "INSERT INTO t (k) VALUES ('a') WITH REQUIREMENTS location = { 'SE' }"
    assert run('run', stmt, "SELECT * FROM t WHERE k = 'a'", '--out', out) == 1


def test_keep_going_runs_every_statement_and_succeeds(out, capsys):
    stmt = "INSERT INTO t (k) VALUES ('a') WITH REQUIREMENTS location = { 'SE' }"
    assert run('run', stmt, "SELECT * FROM t WHERE k = 'a'", '--out', out, '--keep-going') == 0
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 2
    assert printed[1].startswith('not_found')


@pytest.mark.parametrize('argv', [
    ['run', "INSERT INTO t (k) VALUES ('a') WITH REQUIREMENTS location = { 'XX' }"],
    ['run', 'SELEKT * FROM t'],
    ['run'],
    ['run', "SELECT * FROM t WHERE k = 'a'", '--coordinator', '99'],
    ['run', "SELECT * FROM t WHERE k = 'a'", '--config', 'missing.json'],
    ['run', '--file', 'missing.cql'],
])
def test_usage_errors(out, argv, capsys):
    assert run(*argv, '--out', out) == 2
    assert capsys.readouterr().err.startswith('dhrkv: ')


def test_check_reports_violations(out, capsys):
    assert run('run', '--file', STATEMENTS, '--out', out, '--seed', '3') == 0
    snapshots = os.path.join(out, 'snapshots')
    for name in os.listdir(snapshots):
        path = os.path.join(snapshots, name)
        with open(path, encoding='utf-8') as f:
            snap = json.load(f)
        snap['target_store'] = []
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(snap, f)
    capsys.readouterr()

    assert run('check', snapshots) == 1
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'kind,key,node,target'
    assert lines[1].startswith('dangling,alice,')


def test_check_without_snapshots(tmp_path):
    assert run('check', str(tmp_path)) == 2


def test_experiment(out, capsys):
    assert run('experiment', '--experiment', 'fig6', '--repeats', '2', '--inserts', '300', '--out', out) == 0
    assert os.path.exists(os.path.join(out, 'fig6_runs.csv'))
    assert os.path.exists(os.path.join(out, 'fig6_aggregate.csv'))
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    assert all(line.startswith('fig6,balanced,') for line in lines)


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(['serve'])
