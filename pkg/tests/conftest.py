import json
import os
import sys
import threading

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from adserver.fixtures import load_fixtures
from adserver.gateway import AdServerApp, GatewayConfig, build_server
from adserver.inventory import Inventory

GOLDEN_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden")

TEST_TOKEN = "test-secret"


def load_golden(name: str):
    with open(os.path.join(GOLDEN_DIR, name), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def inventory():
    return Inventory()


@pytest.fixture
def fixture_inventory():
    inv = Inventory()
    refs = load_fixtures(inv)
    return inv, refs


@pytest.fixture
def app(fixture_inventory):
    inv, refs = fixture_inventory
    application = AdServerApp(config=GatewayConfig(admin_token=TEST_TOKEN), inventory=inv)
    application.refs = refs
    return application


@pytest.fixture
def live_server():
    """Factory: spin up a real threaded HTTP server on an ephemeral port."""
    servers = []

    def start(app: AdServerApp):
        app.config.port = 0
        server = build_server(app)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append((server, thread))
        return f"http://127.0.0.1:{port}"

    yield start
    for server, thread in servers:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
