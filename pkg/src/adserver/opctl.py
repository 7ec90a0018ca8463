"""Admin command-line client for the gateway API.

A thin client: every subcommand maps onto one or more admin API calls and
prints either a stable column-ordered table or the raw JSON response body.
Exit codes: 0 success, 1 API or connection failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import requests

TABLE_COLUMNS = {
    "advertiser": ("id", "name", "contact", "email", "disabled"),
    "campaign": ("id", "advertiser_id", "name", "kind", "start_date", "end_date", "disabled"),
    "ad": ("id", "campaign_id", "title", "width", "height", "bid_micros", "landing_url", "disabled"),
    "website": ("id", "name", "url", "disabled"),
    "zone": ("id", "website_id", "name", "width", "height", "capacity", "mode", "source_label", "disabled"),
}

COLLECTION_OF = {
    "advertiser": "advertisers", "campaign": "campaigns", "ad": "ads",
    "website": "websites", "zone": "zones",
}


class ApiError(Exception):
    pass


class ApiClient:
    def __init__(self, base_url: str, token: str):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.session = requests.Session()

    def request(self, method: str, path: str, *, params=None, body=None) -> requests.Response:
        url = f"{self.base_url}{path}"
        try:
            resp = self.session.request(method, url, params=params, json=body,
                                        headers={"X-Admin-Token": self.token},
                                        timeout=30, allow_redirects=False)
        except requests.RequestException as exc:
            raise ApiError(f"cannot reach server at {url}: {exc}")
        if resp.status_code >= 400:
            detail = resp.text.strip()
            raise ApiError(f"{method} {url} -> {resp.status_code}: {detail}")
        return resp


def _print_table(rows: list[dict], columns: tuple[str, ...]):
    widths = {c: len(c) for c in columns}
    rendered = []
    for row in rows:
        cells = {c: "" if row.get(c) is None else str(row.get(c, "")) for c in columns}
        rendered.append(cells)
        for c in columns:
            widths[c] = max(widths[c], len(cells[c]))
    header = "  ".join(c.ljust(widths[c]) for c in columns)
    print(header)
    print("  ".join("-" * widths[c] for c in columns))
    for cells in rendered:
        print("  ".join(cells[c].ljust(widths[c]) for c in columns))


def _emit(args, resp: requests.Response, table_fn=None):
    if args.format == "json":
        print(resp.text)
    elif table_fn is not None:
        table_fn(resp.json())
    else:
        print(resp.text)


def _parse_keywords(raw: str | None) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


def cmd_entity_add(client: ApiClient, args, kind: str) -> int:
    fields = {k: v for k, v in args.fields.items() if v is not None}
    resp = client.request("POST", f"/api/{COLLECTION_OF[kind]}", body=fields)
    if args.format == "json":
        print(resp.text)
    else:
        print(resp.json()["id"])
    return 0


def cmd_entity_list(client: ApiClient, args, kind: str) -> int:
    resp = client.request("GET", f"/api/{COLLECTION_OF[kind]}")
    _emit(args, resp, lambda rows: _print_table(rows, TABLE_COLUMNS[kind]))
    return 0


def cmd_link(client: ApiClient, args) -> int:
    body = {"zone_id": args.zone}
    if args.campaign is not None:
        body["campaign_id"] = args.campaign
    else:
        body["ad_id"] = args.ad
    if args.remove:
        body["linked"] = False
        resp = client.request("PUT", "/api/links", body=body)
    else:
        resp = client.request("POST", "/api/links", body=body)
    _emit(args, resp, lambda row: print(json.dumps(row)))
    return 0


def cmd_target_set(client: ApiClient, args) -> int:
    body = {
        "owner_kind": "campaign" if args.campaign is not None else "ad",
        "owner_id": args.campaign if args.campaign is not None else args.ad,
        "dimension": args.dimension,
        "values": _parse_keywords(args.values),
    }
    resp = client.request("POST", "/api/targeting", body=body)
    _emit(args, resp, lambda row: print(json.dumps(row)))
    return 0


def cmd_tag(client: ApiClient, args) -> int:
    resp = client.request("GET", "/api/tag", params={"zoneid": args.zone})
    print(resp.text)
    return 0


def _parse_scope(raw: str | None) -> dict:
    scope = {}
    if raw:
        for part in raw.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ApiError(f"bad scope entry {part!r}, expected key=id")
            key, value = part.split("=", 1)
            if key not in ("advertiser", "campaign", "ad", "website", "zone"):
                raise ApiError(f"unknown scope key {key!r}")
            scope[key] = value
    return scope


def cmd_stats(client: ApiClient, args) -> int:
    params = _parse_scope(args.scope)
    if getattr(args, "from"):
        params["from"] = getattr(args, "from")
    if args.to:
        params["to"] = args.to
    resp = client.request("GET", "/api/stats", params=params)
    def table(report):
        row = {"impressions": report["impressions"], "clicks": report["clicks"],
               "ctr": f"{report['ctr']:.4f}", "revenue_micros": report["revenue_micros"]}
        _print_table([row], ("impressions", "clicks", "ctr", "revenue_micros"))
    _emit(args, resp, table)
    return 0


def cmd_fixture_load(client: ApiClient, args) -> int:
    from .fixtures import builtin_fixture_dir
    directory = builtin_fixture_dir() if args.dir == "builtin" else args.dir
    with open(os.path.join(directory, "corpus.json"), encoding="utf-8") as fh:
        corpus = json.load(fh)

    refs: dict[str, int] = {}

    def post(collection: str, row: dict, resolve: dict | None = None) -> int:
        fields = {k: v for k, v in row.items() if k != "ref"}
        for field_name, ref_key in (resolve or {}).items():
            fields[field_name] = refs[fields.pop(ref_key)]
        resp = client.request("POST", f"/api/{collection}", body=fields)
        new_id = resp.json()["id"]
        if "ref" in row:
            refs[row["ref"]] = new_id
        return new_id

    for row in corpus.get("advertisers", []):
        post("advertisers", row)
    for row in corpus.get("websites", []):
        post("websites", row)
    for row in corpus.get("campaigns", []):
        post("campaigns", row, resolve={"advertiser_id": "advertiser"})
    for row in corpus.get("zones", []):
        post("zones", row, resolve={"website_id": "website"})
    for row in corpus.get("ads", []):
        post("ads", row, resolve={"campaign_id": "campaign"})
    for row in corpus.get("links", []):
        body = {"zone_id": refs[row["zone"]]}
        if "campaign" in row:
            body["campaign_id"] = refs[row["campaign"]]
        else:
            body["ad_id"] = refs[row["ad"]]
        client.request("POST", "/api/links", body=body)
    for row in corpus.get("targeting", []):
        owner_kind = "campaign" if "campaign" in row else "ad"
        client.request("POST", "/api/targeting", body={
            "owner_kind": owner_kind, "owner_id": refs[row[owner_kind]],
            "dimension": row["dimension"], "values": row["values"]})

    if args.format == "json":
        print(json.dumps(refs, sort_keys=True))
    else:
        for ref in sorted(refs):
            print(f"{ref}\t{refs[ref]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opctl", description="ad server admin client")
    parser.add_argument("--server", default=os.environ.get("ADSERVER_URL", "http://127.0.0.1:8400"),
                        help="gateway base URL (env ADSERVER_URL)")
    parser.add_argument("--token", default=os.environ.get("ADSERVER_TOKEN", "change-me"),
                        help="admin token (env ADSERVER_TOKEN)")
    parser.add_argument("--format", choices=("table", "json"), default="table")
    sub = parser.add_subparsers(dest="command", required=True)

    def entity_sub(kind: str, add_args):
        ent = sub.add_parser(kind)
        ent_sub = ent.add_subparsers(dest="action", required=True)
        add = ent_sub.add_parser("add")
        add_args(add)
        add.set_defaults(func=lambda c, a: cmd_entity_add(c, a, kind), kind=kind)
        lst = ent_sub.add_parser("list")
        lst.set_defaults(func=lambda c, a: cmd_entity_list(c, a, kind), kind=kind)

    def advertiser_args(p):
        p.add_argument("--name", required=True)
        p.add_argument("--contact")
        p.add_argument("--email")
        p.set_defaults(fields_of=lambda a: {"name": a.name, "contact": a.contact, "email": a.email})

    def campaign_args(p):
        p.add_argument("--advertiser", type=int, required=True)
        p.add_argument("--name", required=True)
        p.add_argument("--start")
        p.add_argument("--end")
        p.set_defaults(fields_of=lambda a: {"advertiser_id": a.advertiser, "name": a.name,
                                            "start_date": a.start, "end_date": a.end})

    def ad_args(p):
        p.add_argument("--campaign", type=int, required=True)
        p.add_argument("--title", required=True)
        p.add_argument("--description")
        p.add_argument("--display-url", dest="display_url")
        p.add_argument("--landing-url", dest="landing_url", required=True)
        p.add_argument("--creative", dest="creative_ref")
        p.add_argument("--width", type=int, required=True)
        p.add_argument("--height", type=int, required=True)
        p.add_argument("--keywords", help="comma-separated terms")
        p.add_argument("--bid-micros", dest="bid_micros", type=int)
        p.add_argument("--weight", type=int)
        p.set_defaults(fields_of=lambda a: {
            "campaign_id": a.campaign, "title": a.title, "description": a.description,
            "display_url": a.display_url, "landing_url": a.landing_url,
            "creative_ref": a.creative_ref, "width": a.width, "height": a.height,
            "keywords": _parse_keywords(a.keywords) or None,
            "bid_micros": a.bid_micros, "weight": a.weight})

    def website_args(p):
        p.add_argument("--name", required=True)
        p.add_argument("--url")
        p.add_argument("--context")
        p.add_argument("--context-file", dest="context_file")
        def fields(a):
            context = a.context
            if a.context_file:
                with open(a.context_file, encoding="utf-8") as fh:
                    context = fh.read()
            return {"name": a.name, "url": a.url, "context_doc": context}
        p.set_defaults(fields_of=fields)

    def zone_args(p):
        p.add_argument("--website", type=int, required=True)
        p.add_argument("--name", required=True)
        p.add_argument("--description")
        p.add_argument("--width", type=int, required=True)
        p.add_argument("--height", type=int, required=True)
        p.add_argument("--capacity", type=int)
        p.add_argument("--mode", choices=("static_links", "stored_context", "request_context"))
        p.add_argument("--source", dest="source_label")
        p.add_argument("--context")
        p.set_defaults(fields_of=lambda a: {
            "website_id": a.website, "name": a.name, "description": a.description,
            "width": a.width, "height": a.height, "capacity": a.capacity,
            "mode": a.mode, "source_label": a.source_label, "context_doc": a.context})

    entity_sub("advertiser", advertiser_args)
    entity_sub("campaign", campaign_args)
    entity_sub("ad", ad_args)
    entity_sub("website", website_args)
    entity_sub("zone", zone_args)

    link = sub.add_parser("link")
    link.add_argument("--zone", type=int, required=True)
    group = link.add_mutually_exclusive_group(required=True)
    group.add_argument("--campaign", type=int)
    group.add_argument("--ad", type=int)
    link.add_argument("--remove", action="store_true")
    link.set_defaults(func=cmd_link)

    target = sub.add_parser("target")
    target_sub = target.add_subparsers(dest="action", required=True)
    tset = target_sub.add_parser("set")
    tgroup = tset.add_mutually_exclusive_group(required=True)
    tgroup.add_argument("--campaign", type=int)
    tgroup.add_argument("--ad", type=int)
    tset.add_argument("--dimension", required=True)
    tset.add_argument("--values", required=True, help="comma-separated accepted values")
    tset.set_defaults(func=cmd_target_set)

    tag = sub.add_parser("tag")
    tag.add_argument("--zone", type=int, required=True)
    tag.set_defaults(func=cmd_tag)

    stats = sub.add_parser("stats")
    stats.add_argument("--scope", help="key=id[,key=id] over advertiser/campaign/ad/website/zone")
    stats.add_argument("--from", dest="from")
    stats.add_argument("--to")
    stats.set_defaults(func=cmd_stats)

    fixture = sub.add_parser("fixture")
    fixture_sub = fixture.add_subparsers(dest="action", required=True)
    fload = fixture_sub.add_parser("load")
    fload.add_argument("dir", help="fixture directory holding corpus.json ('builtin' for packaged)")
    fload.set_defaults(func=cmd_fixture_load)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "fields_of"):
        args.fields = args.fields_of(args)
    client = ApiClient(args.server, args.token)
    try:
        return args.func(client, args)
    except ApiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
