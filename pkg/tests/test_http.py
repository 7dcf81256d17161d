import json
import urllib.error
import urllib.request

import pytest

from itinopt.domain import Preferences
from itinopt.orchestrator.gateway import Gateway
from itinopt.orchestrator.http import GatewayServer


@pytest.fixture
def server(catalog42):
    gw = Gateway({"default": catalog42})
    srv = GatewayServer(gw, port=0).start()
    yield srv
    srv.stop()
    gw.close()


def call(url, body=None, raw=None):
    data = raw if raw is not None else (json.dumps(body).encode() if body is not None else None)
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"},
                                 method="POST" if data is not None else "GET")
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, resp.headers.get("Content-Type"), json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, exc.headers.get("Content-Type"), json.loads(exc.read())


def test_health_and_metrics(server):
    status, ctype, body = call(server.url + "/v1/health")
    assert status == 200 and ctype.startswith("application/json")
    assert body["status"] == "ok"
    status, _, body = call(server.url + "/v1/metrics")
    assert status == 200 and body["counters"]["requests_total"] == 0


def test_optimize_roundtrip(server, catalog42):
    prefs = Preferences(budget=1e5, max_time=1e5)
    body = {"request_id": "h1", "catalog_ref": "default", "prefs": prefs.to_dict(), "mode": "greedy"}
    status, _, resp = call(server.url + "/v1/itineraries:optimize", body)
    assert status == 200
    assert resp["request_id"] == "h1" and resp["complete"] is True
    assert set(resp) >= {"recommended", "alternatives", "match_report", "green", "diagnostics", "timings"}
    _, _, metrics = call(server.url + "/v1/metrics")
    assert metrics["counters"]["requests_total"] == 1


def test_inline_catalog(server, catalog42):
    prefs = Preferences(budget=1e5, max_time=1e5)
    body = {"request_id": "h2", "catalog_ref": {"schema_version": 1, **catalog42.to_dict()},
            "prefs": prefs.to_dict(), "mode": "greedy"}
    status, _, resp = call(server.url + "/v1/itineraries:optimize", body)
    assert status == 200 and resp["recommended"]["choices"]


@pytest.mark.parametrize("payload,status,code", [
    (b"{not json", 400, "parse_error"),
    (json.dumps({"request_id": "x"}).encode(), 400, "parse_error"),
    (json.dumps({"request_id": "x", "catalog_ref": "nope", "prefs": {"budget": 1, "max_time": 1}}).encode(),
     404, "unknown_catalog"),
    (json.dumps({"request_id": "x", "catalog_ref": "default", "prefs": {"budget": -1, "max_time": 1}}).encode(),
     400, None),
])
def test_error_bodies(server, payload, status, code):
    got, _, body = call(server.url + "/v1/itineraries:optimize", raw=payload)
    assert got == status
    assert set(body) == {"code", "message", "diagnostics"}
    if code:
        assert body["code"] == code


def test_unknown_route(server):
    status, _, body = call(server.url + "/v2/nothing")
    assert status == 404 and body["code"] == "not_found"
