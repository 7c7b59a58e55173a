import re
import shutil
import subprocess
import time
from pathlib import Path

import pytest
import requests

from kasla import (
    OracleScorer,
    catalogs_by_id,
    extract_gold_linking,
    load_catalogs,
    load_queries,
)
from kasla.schema import resolve_catalog

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"
TABLES_PATH = FIXTURES_DIR / "tables.json"
QUERIES_PATH = FIXTURES_DIR / "queries.jsonl"


@pytest.fixture(scope="session")
def catalogs():
    return catalogs_by_id(load_catalogs(TABLES_PATH))


@pytest.fixture(scope="session")
def appendix_catalog(catalogs):
    """The 3-table department/head/management schema."""
    return resolve_catalog(catalogs, "department_management")


@pytest.fixture(scope="session")
def fixture_cases(catalogs):
    return load_queries(QUERIES_PATH, catalogs)


@pytest.fixture(scope="session")
def gold_cases(catalogs, fixture_cases):
    """Fixture cases with gold_linking bound from their gold SQL."""
    bound = []
    for case in fixture_cases:
        gold, warnings = extract_gold_linking(
            case.gold_sql, resolve_catalog(catalogs, case.db_id)
        )
        assert not warnings, f"{case.query_id}: unexpected warnings {warnings}"
        bound.append(case.with_gold(gold))
    return bound


@pytest.fixture(scope="session")
def oracle_scorer(catalogs, gold_cases):
    return OracleScorer.from_cases(gold_cases, catalogs)


SERVICE_DIR = Path(__file__).resolve().parent.parent / "service"


@pytest.fixture(scope="session")
def service_url():
    """Start the reference scoring service; skip when it is not built.

    The primary suite must pass without the service: these tests only run
    after `npm install && npm run build` in service/.
    """
    server_js = SERVICE_DIR / "dist" / "server.js"
    node = shutil.which("node")
    if node is None or not server_js.exists():
        pytest.skip("reference scoring service not built (see service/README section)")
    proc = subprocess.Popen(
        [node, str(server_js), "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        match = re.search(r"listening on port (\d+)", line)
        if not match:
            proc.terminate()
            pytest.skip(f"service failed to start: {line!r}")
        url = f"http://127.0.0.1:{match.group(1)}"
        deadline = time.time() + 10
        while time.time() < deadline:
            try:
                if requests.get(f"{url}/healthz", timeout=1).status_code == 200:
                    break
            except requests.RequestException:
                time.sleep(0.1)
        else:
            proc.terminate()
            pytest.skip("service never became healthy")
        yield url
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
