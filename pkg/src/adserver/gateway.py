"""HTTP surface: ad delivery, click redirect, invocation tags, admin API.

Public endpoints (GET /ad, GET /click) never require auth; everything under
/api needs the shared-secret X-Admin-Token header. The app core is plain
request-in/response-out methods over the inventory, matcher, auction and
ledger, with the socket layer kept to a thin stdlib handler so the whole
surface is testable in-process.
"""

from __future__ import annotations

import argparse
import html
import json
import os
import threading
import time
from datetime import datetime, timezone, tzinfo
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit
from zoneinfo import ZoneInfo

from . import vault
from .auction import gsp_assign
from .fixtures import load_fixtures
from .inventory import (DanglingReferenceError, Inventory, InvariantError,
                        InventoryError, UnknownEntityError, Zone)
from .ledger import (DeliveryEvent, Ledger, StatsScope, iso_utc,
                     parse_iso_utc)
from .lexicon import IdfCorpus
from .matcher import (DEFAULT_RELEVANCE_THRESHOLD, RequestContext,
                      rank_candidates)

NO_AD_BODY = "<!-- no ad -->"
TOKEN_HEADER = "X-Admin-Token"
DECISION_CACHE_TTL = 300.0

COLLECTIONS = {
    "advertisers": "advertiser",
    "campaigns": "campaign",
    "ads": "ad",
    "websites": "website",
    "zones": "zone",
}

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def invocation_tag(zone: Zone, base_url: str) -> str:
    """The exact iframe snippet a publisher pastes into their template."""
    src = f"{base_url}/ad?zoneid={zone.id}"
    if zone.source_label:
        src += f"&source={zone.source_label}"
    return (f'<iframe src="{src}" width="{zone.width}" height="{zone.height}" '
            f'frameborder="0" scrolling="no"></iframe>')


class DecisionCache:
    """Short-lived (adid, zoneid) -> price map for click attribution."""

    def __init__(self, ttl: float = DECISION_CACHE_TTL):
        self._ttl = ttl
        self._lock = threading.Lock()
        self._entries: dict[tuple[int, int], tuple[int, float]] = {}

    def put(self, ad_id: int, zone_id: int, price_micros: int):
        with self._lock:
            self._entries[(ad_id, zone_id)] = (price_micros, time.monotonic() + self._ttl)

    def get(self, ad_id: int, zone_id: int) -> int:
        """Cached price, or 0 on miss/expiry."""
        with self._lock:
            entry = self._entries.get((ad_id, zone_id))
            if entry is None:
                return 0
            price, expiry = entry
            if time.monotonic() > expiry:
                del self._entries[(ad_id, zone_id)]
                return 0
            return price


class GatewayConfig:
    """Runtime configuration; flags override environment variables."""

    def __init__(self, host="127.0.0.1", port=8400, admin_token="change-me",
                 reserve_micros=0, relevance_threshold=DEFAULT_RELEVANCE_THRESHOLD,
                 billing_tz="UTC", data_dir=None, console_dir=None,
                 rank_mode="bid", public_base_url=None, idf_corpus=None,
                 load_fixtures=False):
        self.host = host
        self.port = port
        self.admin_token = admin_token
        self.reserve_micros = reserve_micros
        self.relevance_threshold = relevance_threshold
        self.billing_tz = billing_tz
        self.data_dir = data_dir
        self.console_dir = console_dir
        self.rank_mode = rank_mode
        self.public_base_url = public_base_url
        self.idf_corpus = idf_corpus
        self.load_fixtures = load_fixtures

    @property
    def tz(self) -> tzinfo:
        if self.billing_tz.upper() == "UTC":
            return timezone.utc
        return ZoneInfo(self.billing_tz)


class Response:
    def __init__(self, status: int, body: bytes | str = b"",
                 content_type: str = "application/json; charset=utf-8",
                 headers: dict | None = None):
        self.status = status
        self.body = body.encode("utf-8") if isinstance(body, str) else body
        self.content_type = content_type
        self.headers = headers or {}


def _json_response(status: int, payload) -> Response:
    return Response(status, json.dumps(payload, ensure_ascii=False))


def _error(status: int, message: str, **extra) -> Response:
    return _json_response(status, {"error": message, **extra})


class AdServerApp:
    """The gateway's request logic, independent of any socket."""

    def __init__(self, config: GatewayConfig | None = None,
                 inventory: Inventory | None = None,
                 ledger: Ledger | None = None,
                 idf: IdfCorpus | None = None):
        self.config = config or GatewayConfig()
        self.inventory = inventory or Inventory()
        self.ledger = ledger or Ledger()
        self.idf = idf
        self.decisions = DecisionCache()
        self.event_log = None
        self.clock = lambda: datetime.now(timezone.utc)

    # -- routing ---------------------------------------------------------

    def handle(self, method: str, target: str, headers: dict,
               body: bytes = b"") -> Response:
        parts = urlsplit(target)
        path = parts.path.rstrip("/") or "/"
        params = {k: v[0] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
        headers = {k.lower(): v for k, v in headers.items()}
        try:
            if path == "/ad" and method == "GET":
                return self.serve_ad(params, headers)
            if path == "/click" and method == "GET":
                return self.click_redirect(params)
            if path == "/api" or path.startswith("/api/"):
                return self.admin_api(method, path, params, headers, body)
            if path == "/console" or path.startswith("/console/") or path.startswith("/demo/"):
                if method == "GET":
                    return self.static_file(path)
            return _error(404, "not found")
        except Exception as exc:  # last-resort guard so one request can't kill the worker
            return _error(500, f"internal error: {exc}")

    # -- delivery ----------------------------------------------------------

    def _base_url(self, headers: dict) -> str:
        if self.config.public_base_url:
            return self.config.public_base_url.rstrip("/")
        host = headers.get("host", f"{self.config.host}:{self.config.port}")
        return f"http://{host}"

    def _request_context(self, zone_id: int, params: dict, headers: dict) -> RequestContext:
        browser = params.get("browser") or headers.get("user-agent")
        language = params.get("language")
        if not language:
            accept = headers.get("accept-language", "")
            if accept:
                language = accept.split(",")[0].split(";")[0].strip() or None
        return RequestContext(
            zone_id=zone_id,
            instant=self.clock(),
            source=params.get("source") or None,
            country=params.get("country") or None,
            city=params.get("city") or None,
            browser=browser or None,
            language=language or None,
            context_text=params.get("context") or None,
        )

    def serve_ad(self, params: dict, headers: dict) -> Response:
        raw_zone = params.get("zoneid")
        if raw_zone is None or not raw_zone.lstrip("-").isdigit():
            return _error(400, "bad or missing zoneid")
        fmt = params.get("format", "html")
        if fmt not in ("html", "json"):
            return _error(400, f"unknown format {fmt!r}")
        zone = self.inventory.find("zone", int(raw_zone))
        if zone is None or zone.disabled:
            return Response(404, "zone not found", "text/plain; charset=utf-8")

        ctx = self._request_context(zone.id, params, headers)
        candidates = rank_candidates(
            self.inventory, zone.id, ctx,
            threshold=self.config.relevance_threshold,
            idf=self.idf, rank_mode=self.config.rank_mode, tz=self.config.tz)
        assignments = gsp_assign(candidates, slots=zone.capacity,
                                 reserve_micros=self.config.reserve_micros)
        if not assignments:
            if fmt == "json":
                return Response(200, "[]")
            return Response(200, NO_AD_BODY, "text/html; charset=utf-8")

        base = self._base_url(headers)
        ads_by_id = {c.ad.id: c.ad for c in candidates}
        payloads = []
        for slot in assignments:
            ad = ads_by_id[slot.ad_id]
            self.decisions.put(ad.id, zone.id, slot.price_micros)
            self.ledger.log_event(DeliveryEvent("impression", ad.id, zone.id,
                                                ctx.instant, 0))
            payloads.append({
                "ad_id": ad.id,
                "title": ad.title,
                "description": ad.description,
                "display_url": ad.display_url,
                "click_url": f"{base}/click?adid={ad.id}&zoneid={zone.id}",
                "creative_ref": ad.creative_ref,
                "width": ad.width,
                "height": ad.height,
                "slot_index": slot.slot_index,
            })
        if fmt == "json":
            return Response(200, json.dumps(payloads, ensure_ascii=False))
        return Response(200, self._render_html(zone, payloads), "text/html; charset=utf-8")

    def _render_html(self, zone: Zone, payloads: list[dict]) -> str:
        blocks = []
        for p in payloads:
            if p["creative_ref"].startswith("<"):
                creative = p["creative_ref"]
            else:
                creative = (
                    f'<div style="width:{p["width"]}px;height:{p["height"]}px;'
                    f'overflow:hidden;border:1px solid #ddd;border-radius:4px;'
                    f'font-family:sans-serif;padding:4px;box-sizing:border-box">'
                    f'<strong>{html.escape(p["title"])}</strong> '
                    f'<span>{html.escape(p["description"])}</span> '
                    f'<em>{html.escape(p["display_url"])}</em></div>')
            blocks.append(f'<a href="{html.escape(p["click_url"], quote=True)}" '
                          f'data-ad-id="{p["ad_id"]}" data-slot="{p["slot_index"]}" '
                          f'target="_top" style="text-decoration:none;color:inherit">'
                          f'{creative}</a>')
        joined = "\n".join(blocks)
        return (f'<!doctype html>\n<html><head><meta charset="utf-8"></head>\n'
                f'<body style="margin:0;width:{zone.width}px">\n{joined}\n</body></html>')

    def click_redirect(self, params: dict) -> Response:
        raw_ad, raw_zone = params.get("adid"), params.get("zoneid")
        if not raw_ad or not raw_zone or not raw_ad.isdigit() or not raw_zone.isdigit():
            return _error(400, "bad or missing adid/zoneid")
        ad = self.inventory.find("ad", int(raw_ad))
        zone = self.inventory.find("zone", int(raw_zone))
        if ad is None or zone is None:
            return _error(404, "unknown ad or zone")
        price = self.decisions.get(ad.id, zone.id)
        self.ledger.log_event(DeliveryEvent("click", ad.id, zone.id,
                                            self.clock(), price))
        return Response(302, b"", "text/plain; charset=utf-8",
                        headers={"Location": ad.landing_url})

    # -- admin API -----------------------------------------------------------

    def admin_api(self, method: str, path: str, params: dict,
                  headers: dict, body: bytes) -> Response:
        if headers.get(TOKEN_HEADER.lower()) != self.config.admin_token:
            return _error(401, "missing or invalid admin token")
        segments = [s for s in path.split("/") if s][1:]  # drop "api"
        if not segments:
            return _error(404, "not found")
        head = segments[0]
        try:
            if head in COLLECTIONS:
                return self._entity_api(COLLECTIONS[head], method, segments[1:], body)
            if head == "links":
                return self._links_api(method, body)
            if head == "targeting":
                return self._targeting_api(method, params, body)
            if head == "stats" and method == "GET":
                return self._stats_api(params)
            if head == "tag" and method == "GET":
                return self._tag_api(params, headers)
            return _error(404, "not found")
        except (InvariantError, DanglingReferenceError) as exc:
            return _json_response(422, {"error": str(exc), "field": exc.field})
        except UnknownEntityError as exc:
            return _error(404, str(exc))
        except InventoryError as exc:
            return _error(422, str(exc))
        except ValueError as exc:
            return _error(400, str(exc))

    @staticmethod
    def _body_json(body: bytes) -> dict:
        if not body:
            raise ValueError("empty request body")
        try:
            data = json.loads(body.decode("utf-8"))
        except ValueError as exc:
            raise ValueError(f"bad JSON body: {exc}")
        if not isinstance(data, dict):
            raise ValueError("request body must be a JSON object")
        return data

    def _entity_api(self, kind: str, method: str, rest: list[str], body: bytes) -> Response:
        from .inventory import entity_fields
        if method == "GET" and not rest:
            return _json_response(200, [entity_fields(e) for e in self.inventory.list(kind)])
        if method == "GET" and len(rest) == 1:
            return _json_response(200, entity_fields(self.inventory.get(kind, int(rest[0]))))
        if method == "POST" and not rest:
            new_id = self.inventory.register(kind, self._body_json(body))
            return _json_response(201, {"id": new_id, "kind": kind})
        if method == "PUT" and len(rest) == 1:
            entity = self.inventory.update(kind, int(rest[0]), self._body_json(body))
            return _json_response(200, entity_fields(entity))
        return _error(404, "not found")

    def _links_api(self, method: str, body: bytes) -> Response:
        if method == "GET":
            return _json_response(200, [
                {"zone_id": l.zone_id, "target_kind": l.target_kind, "target_id": l.target_id}
                for l in self.inventory.all_links()])
        data = self._body_json(body)
        zone_id = data.get("zone_id")
        if "campaign_id" in data:
            target_kind, target_id = "campaign", data["campaign_id"]
        elif "ad_id" in data:
            target_kind, target_id = "ad", data["ad_id"]
        else:
            raise ValueError("body must carry campaign_id or ad_id")
        if method == "PUT" and data.get("linked") is False:
            removed = self.inventory.unlink(zone_id, target_kind, target_id)
            return _json_response(200, {"linked": False, "removed": removed})
        if method in ("POST", "PUT"):
            link = self.inventory.link(zone_id, target_kind, target_id)
            return _json_response(201, {"zone_id": link.zone_id,
                                        "target_kind": link.target_kind,
                                        "target_id": link.target_id})
        return _error(404, "not found")

    def _targeting_api(self, method: str, params: dict, body: bytes) -> Response:
        if method == "GET":
            rules = self.inventory.all_rules()
            owner_kind, owner_id = params.get("owner_kind"), params.get("owner_id")
            if owner_kind and owner_id:
                rules = [r for r in rules if r.owner_kind == owner_kind
                         and r.owner_id == int(owner_id)]
            return _json_response(200, [
                {"owner_kind": r.owner_kind, "owner_id": r.owner_id,
                 "dimension": r.dimension, "values": list(r.values)}
                for r in rules])
        if method in ("POST", "PUT"):
            data = self._body_json(body)
            rule = self.inventory.set_targeting(
                data.get("owner_kind"), data.get("owner_id"),
                data.get("dimension"), data.get("values", []))
            return _json_response(201, {"owner_kind": rule.owner_kind,
                                        "owner_id": rule.owner_id,
                                        "dimension": rule.dimension,
                                        "values": list(rule.values)})
        return _error(404, "not found")

    def _stats_api(self, params: dict) -> Response:
        def int_param(name):
            raw = params.get(name)
            if raw is None or raw == "":
                return None
            if not raw.isdigit():
                raise ValueError(f"bad {name} id {raw!r}")
            return int(raw)

        scope = StatsScope(advertiser_id=int_param("advertiser"),
                           campaign_id=int_param("campaign"),
                           ad_id=int_param("ad"),
                           website_id=int_param("website"),
                           zone_id=int_param("zone"))
        now = self.clock()
        start = parse_iso_utc(params["from"]) if params.get("from") else datetime(1970, 1, 1, tzinfo=timezone.utc)
        end = parse_iso_utc(params["to"]) if params.get("to") else now
        report = self.ledger.query_stats(self.inventory, scope, start, end)
        return _json_response(200, report.to_dict())

    def _tag_api(self, params: dict, headers: dict) -> Response:
        raw_zone = params.get("zoneid")
        if raw_zone is None or not raw_zone.isdigit():
            raise ValueError("bad or missing zoneid")
        zone = self.inventory.get("zone", int(raw_zone))
        tag = invocation_tag(zone, self._base_url(headers))
        return Response(200, tag, "text/plain; charset=utf-8")

    # -- static console/demo files ------------------------------------------

    def static_file(self, path: str) -> Response:
        root = self.config.console_dir
        if not root:
            return Response(404, "console not built", "text/plain; charset=utf-8")
        if path == "/console":
            rel = "index.html"
        elif path.startswith("/console/"):
            rel = path[len("/console/"):]
        else:
            rel = path.lstrip("/")  # demo/<file>
        target = os.path.realpath(os.path.join(root, rel))
        if not target.startswith(os.path.realpath(root) + os.sep) and target != os.path.realpath(root):
            return _error(404, "not found")
        if os.path.isdir(target):
            target = os.path.join(target, "index.html")
        if not os.path.isfile(target):
            return _error(404, "not found")
        ext = os.path.splitext(target)[1].lower()
        with open(target, "rb") as fh:
            return Response(200, fh.read(), _CONTENT_TYPES.get(ext, "application/octet-stream"))


class _Handler(BaseHTTPRequestHandler):
    app: AdServerApp = None  # set by build_server
    protocol_version = "HTTP/1.1"

    def _dispatch(self, method: str):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        response = self.app.handle(method, self.path, dict(self.headers), body)
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(response.body)))
        for name, value in response.headers.items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(response.body)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def log_message(self, fmt, *args):  # keep request noise out of test output
        pass


def build_server(app: AdServerApp) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"app": app})
    server = ThreadingHTTPServer((app.config.host, app.config.port), handler)
    server.daemon_threads = True
    return server


def _env(name, default=None):
    return os.environ.get(name, default)


def parse_args(argv=None) -> GatewayConfig:
    parser = argparse.ArgumentParser(prog="adserverd", description="contextual ad server gateway")
    parser.add_argument("--listen", default=_env("ADSERVER_LISTEN", "127.0.0.1:8400"),
                        help="host:port to bind (env ADSERVER_LISTEN)")
    parser.add_argument("--token", default=_env("ADSERVER_TOKEN", "change-me"),
                        help="admin API shared secret (env ADSERVER_TOKEN)")
    parser.add_argument("--reserve-micros", type=int,
                        default=int(_env("ADSERVER_RESERVE_MICROS", "0")),
                        help="auction reserve price in micro-units per click")
    parser.add_argument("--relevance-threshold", type=float,
                        default=float(_env("ADSERVER_RELEVANCE_THRESHOLD",
                                           str(DEFAULT_RELEVANCE_THRESHOLD))))
    parser.add_argument("--billing-tz", default=_env("ADSERVER_BILLING_TZ", "UTC"),
                        help="timezone for campaign date boundaries")
    parser.add_argument("--data-dir", default=_env("ADSERVER_DATA_DIR"),
                        help="directory for the snapshot and event log")
    parser.add_argument("--console-dir", default=_env("ADSERVER_CONSOLE_DIR"),
                        help="built console static files to serve under /console")
    parser.add_argument("--rank-mode", choices=("bid", "weighted"),
                        default=_env("ADSERVER_RANK_MODE", "bid"))
    parser.add_argument("--public-base-url", default=_env("ADSERVER_PUBLIC_BASE_URL"),
                        help="absolute base URL for tags and click links")
    parser.add_argument("--idf-corpus", default=_env("ADSERVER_IDF_CORPUS"),
                        help="background corpus file (one document per line)")
    parser.add_argument("--load-fixtures", action="store_true",
                        default=_env("ADSERVER_LOAD_FIXTURES") == "1",
                        help="install the three-site demo corpus at startup")
    args = parser.parse_args(argv)
    host, _, port = args.listen.rpartition(":")
    return GatewayConfig(host=host or "127.0.0.1", port=int(port),
                         admin_token=args.token, reserve_micros=args.reserve_micros,
                         relevance_threshold=args.relevance_threshold,
                         billing_tz=args.billing_tz, data_dir=args.data_dir,
                         console_dir=args.console_dir, rank_mode=args.rank_mode,
                         public_base_url=args.public_base_url,
                         idf_corpus=args.idf_corpus, load_fixtures=args.load_fixtures)


def bootstrap(config: GatewayConfig) -> AdServerApp:
    """Recover state from the data directory and wire up journaling."""
    event_log = None
    if config.data_dir:
        os.makedirs(config.data_dir, exist_ok=True)
        snap_path = os.path.join(config.data_dir, vault.SNAPSHOT_FILENAME)
        log_path = os.path.join(config.data_dir, vault.EVENTS_FILENAME)
        if not os.path.exists(snap_path) and os.path.exists(log_path):
            # no snapshot yet: the log alone carries the full admin history
            inventory = vault.replay_admin_events(log_path)
            ledger = vault.fold_events(log_path)
        else:
            inventory, ledger = vault.recover(snap_path, log_path)
        event_log = vault.EventLog(log_path)
        inventory.set_journal(lambda payload: event_log.append({"kind": "admin", **payload}))
        ledger.set_sink(event_log.append)
    else:
        inventory, ledger = Inventory(), Ledger()

    idf = IdfCorpus.from_file(config.idf_corpus) if config.idf_corpus else None
    app = AdServerApp(config=config, inventory=inventory, ledger=ledger, idf=idf)
    app.event_log = event_log
    if config.load_fixtures and not inventory.list("website"):
        load_fixtures(inventory)
    return app


def save_state(app: AdServerApp) -> None:
    if app.config.data_dir:
        snap_path = os.path.join(app.config.data_dir, vault.SNAPSHOT_FILENAME)
        vault.save_snapshot(vault.Snapshot.capture(app.inventory), snap_path)


def main(argv=None) -> int:
    config = parse_args(argv)
    app = bootstrap(config)
    server = build_server(app)
    host, port = server.server_address[:2]
    print(f"adserverd listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        save_state(app)
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
