"""Entity model and inventory store.

Holds advertisers, campaigns, ads, websites, zones, zone links and targeting
rules, plus the campaign-lifecycle and eligibility queries the delivery path
is built on. All mutations go through a single Inventory instance guarded by
one lock (single-writer contract); reads take the same lock briefly, so they
always observe a consistent state.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field, fields as dc_fields
from datetime import date, datetime, time, timedelta, timezone, tzinfo


class InventoryError(Exception):
    """Base class for inventory failures."""


class UnknownKindError(InventoryError):
    """Entity kind is not one of the registered kinds."""


class UnknownEntityError(InventoryError):
    """A referenced entity id does not exist (or is the wrong kind)."""


class InvariantError(InventoryError):
    """A field value violates a type invariant. Carries the field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


class DanglingReferenceError(InventoryError):
    """A reference field points at a nonexistent entity."""

    def __init__(self, field_name: str, ref_id):
        super().__init__(f"{field_name}: no such entity {ref_id!r}")
        self.field = field_name
        self.ref_id = ref_id


ZONE_MODES = ("static_links", "stored_context", "request_context")
TARGETING_DIMENSIONS = (
    "date", "day_of_week", "time_of_day", "country", "city",
    "browser", "language", "source",
)
CAMPAIGN_KINDS = ("contract",)

ZONE_CAPACITY_MIN = 1
ZONE_CAPACITY_MAX = 5

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DATE_RANGE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}\.\.\d{4}-\d{2}-\d{2}$")
_TIME_RANGE_RE = re.compile(r"^\d{2}:\d{2}-\d{2}:\d{2}$")
_DAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")


@dataclass
class Advertiser:
    id: int
    name: str
    contact: str = ""
    email: str = ""
    disabled: bool = False


@dataclass
class Campaign:
    id: int
    advertiser_id: int
    name: str
    kind: str = "contract"
    start_date: date | None = None
    end_date: date | None = None
    disabled: bool = False


@dataclass
class Ad:
    id: int
    campaign_id: int
    title: str = ""
    description: str = ""
    display_url: str = ""
    landing_url: str = ""
    creative_ref: str = ""
    width: int = 0
    height: int = 0
    keywords: tuple[str, ...] = ()
    bid_micros: int = 0
    weight: int = 1
    disabled: bool = False


@dataclass
class Website:
    id: int
    name: str
    url: str = ""
    context_doc: str = ""
    disabled: bool = False


@dataclass
class Zone:
    id: int
    website_id: int
    name: str
    description: str = ""
    width: int = 0
    height: int = 0
    capacity: int = 3
    source_label: str = ""
    context_doc: str = ""
    mode: str = "stored_context"
    disabled: bool = False


@dataclass(frozen=True)
class Link:
    zone_id: int
    target_kind: str  # "campaign" | "ad"
    target_id: int


@dataclass
class TargetingRule:
    owner_kind: str  # "campaign" | "ad"
    owner_id: int
    dimension: str
    values: tuple[str, ...]


ENTITY_KINDS = {
    "advertiser": Advertiser,
    "campaign": Campaign,
    "ad": Ad,
    "website": Website,
    "zone": Zone,
}


def parse_date(value) -> date:
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


def campaign_active_at(campaign: Campaign, instant: datetime,
                       tz: tzinfo = timezone.utc) -> bool:
    """True iff the campaign is running at ``instant``.

    Start and end dates are inclusive whole days: a campaign activates at
    midnight of its start date and keeps running until midnight *after* its
    end date. Date boundaries are interpreted in the billing timezone ``tz``
    (UTC by default). Campaigns without dates never expire.
    """
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    if campaign.start_date is not None:
        start = datetime.combine(campaign.start_date, time(0), tzinfo=tz)
        if instant < start:
            return False
    if campaign.end_date is not None:
        end = datetime.combine(campaign.end_date + timedelta(days=1), time(0), tzinfo=tz)
        if instant >= end:
            return False
    return True


def _require_positive(fields: dict, name: str) -> int:
    value = fields.get(name)
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise InvariantError(name, "must be a positive integer")
    return value


def _require_text(fields: dict, name: str) -> str:
    value = fields.get(name)
    if not isinstance(value, str) or not value.strip():
        raise InvariantError(name, "must be non-empty text")
    return value


def validate_rule_values(dimension: str, values) -> tuple[str, ...]:
    """Check matcher value syntax for one targeting dimension."""
    if dimension not in TARGETING_DIMENSIONS:
        raise InvariantError("dimension", f"unknown dimension {dimension!r}")
    cleaned = tuple(str(v).strip().lower() for v in values if str(v).strip())
    if not cleaned:
        raise InvariantError("values", "matcher must be non-empty")
    for v in cleaned:
        if dimension == "date" and not (_DATE_RE.match(v) or _DATE_RANGE_RE.match(v)):
            raise InvariantError("values", f"bad date value {v!r} (YYYY-MM-DD or YYYY-MM-DD..YYYY-MM-DD)")
        if dimension == "time_of_day" and not _TIME_RANGE_RE.match(v):
            raise InvariantError("values", f"bad time range {v!r} (HH:MM-HH:MM)")
        if dimension == "day_of_week" and v not in _DAYS:
            raise InvariantError("values", f"bad day name {v!r}")
    return cleaned


class Inventory:
    """Mutable entity store with a single global id sequence.

    Entities are never removed; a ``disabled`` flag hides them from the
    delivery path while keeping every logged reference resolvable. An
    optional ``journal`` callable receives each mutation as a dict so the
    vault can append admin events to the durable log.
    """

    def __init__(self, journal=None):
        self._lock = threading.RLock()
        self._next_id = 1
        self._entities: dict[str, dict[int, object]] = {k: {} for k in ENTITY_KINDS}
        self._links: list[Link] = []
        self._rules: list[TargetingRule] = []
        self._journal = journal

    # -- id allocation -------------------------------------------------

    def _allocate_id(self, explicit: int | None = None) -> int:
        if explicit is None:
            explicit = self._next_id
        if explicit < self._next_id:
            raise InvariantError("id", f"id {explicit} already allocated")
        self._next_id = explicit + 1
        return explicit

    # -- registration --------------------------------------------------

    def register(self, kind: str, fields: dict, *, entity_id: int | None = None) -> int:
        """Validate ``fields`` against ``kind``'s invariants and persist.

        Returns the fresh id. ``entity_id`` is for journal replay only.
        """
        with self._lock:
            if kind not in ENTITY_KINDS:
                raise UnknownKindError(f"unknown entity kind {kind!r}")
            builder = getattr(self, f"_build_{kind}")
            entity = builder(dict(fields))
            entity.id = self._allocate_id(entity_id)
            self._entities[kind][entity.id] = entity
            self._record("register", entity=kind, id=entity.id, fields=entity_fields(entity))
            return entity.id

    def _build_advertiser(self, f: dict) -> Advertiser:
        name = _require_text(f, "name")
        return Advertiser(id=0, name=name, contact=str(f.get("contact", "")),
                          email=str(f.get("email", "")),
                          disabled=bool(f.get("disabled", False)))

    def _build_campaign(self, f: dict) -> Campaign:
        advertiser_id = f.get("advertiser_id")
        if advertiser_id not in self._entities["advertiser"]:
            raise DanglingReferenceError("advertiser_id", advertiser_id)
        name = _require_text(f, "name")
        kind = f.get("kind", "contract")
        if kind not in CAMPAIGN_KINDS:
            raise InvariantError("kind", f"unsupported campaign kind {kind!r}")
        start = parse_date(f["start_date"]) if f.get("start_date") else None
        end = parse_date(f["end_date"]) if f.get("end_date") else None
        if start and end and start > end:
            raise InvariantError("start_date", "start_date must not be after end_date")
        return Campaign(id=0, advertiser_id=advertiser_id, name=name, kind=kind,
                        start_date=start, end_date=end,
                        disabled=bool(f.get("disabled", False)))

    def _build_ad(self, f: dict) -> Ad:
        campaign_id = f.get("campaign_id")
        if campaign_id not in self._entities["campaign"]:
            raise DanglingReferenceError("campaign_id", campaign_id)
        width = _require_positive(f, "width")
        height = _require_positive(f, "height")
        landing = _require_text(f, "landing_url")
        bid = f.get("bid_micros", 0)
        if not isinstance(bid, int) or isinstance(bid, bool) or bid < 0:
            raise InvariantError("bid_micros", "must be a non-negative integer (micro-units)")
        weight = f.get("weight", 1)
        if not isinstance(weight, int) or weight < 1:
            raise InvariantError("weight", "must be a positive integer")
        keywords = tuple(sorted({str(k).strip().lower() for k in f.get("keywords", ()) if str(k).strip()}))
        return Ad(id=0, campaign_id=campaign_id, title=str(f.get("title", "")),
                  description=str(f.get("description", "")),
                  display_url=str(f.get("display_url", "")), landing_url=landing,
                  creative_ref=str(f.get("creative_ref", "")), width=width,
                  height=height, keywords=keywords, bid_micros=bid, weight=weight,
                  disabled=bool(f.get("disabled", False)))

    def _build_website(self, f: dict) -> Website:
        name = _require_text(f, "name")
        return Website(id=0, name=name, url=str(f.get("url", "")),
                       context_doc=str(f.get("context_doc", "")),
                       disabled=bool(f.get("disabled", False)))

    def _build_zone(self, f: dict) -> Zone:
        website_id = f.get("website_id")
        if website_id not in self._entities["website"]:
            raise DanglingReferenceError("website_id", website_id)
        name = _require_text(f, "name")
        width = _require_positive(f, "width")
        height = _require_positive(f, "height")
        capacity = f.get("capacity", 3)
        if not isinstance(capacity, int) or not ZONE_CAPACITY_MIN <= capacity <= ZONE_CAPACITY_MAX:
            raise InvariantError("capacity", f"must be an integer in [{ZONE_CAPACITY_MIN}, {ZONE_CAPACITY_MAX}]")
        mode = f.get("mode", "stored_context")
        if mode not in ZONE_MODES:
            raise InvariantError("mode", f"unknown zone mode {mode!r}")
        return Zone(id=0, website_id=website_id, name=name,
                    description=str(f.get("description", "")), width=width,
                    height=height, capacity=capacity,
                    source_label=str(f.get("source_label", "")),
                    context_doc=str(f.get("context_doc", "")), mode=mode,
                    disabled=bool(f.get("disabled", False)))

    # -- lookup ----------------------------------------------------------

    def get(self, kind: str, entity_id: int):
        with self._lock:
            if kind not in ENTITY_KINDS:
                raise UnknownKindError(f"unknown entity kind {kind!r}")
            entity = self._entities[kind].get(entity_id)
            if entity is None:
                raise UnknownEntityError(f"no {kind} with id {entity_id}")
            return entity

    def find(self, kind: str, entity_id: int):
        """Like get() but returns None instead of raising."""
        with self._lock:
            return self._entities.get(kind, {}).get(entity_id)

    def list(self, kind: str) -> list:
        with self._lock:
            if kind not in ENTITY_KINDS:
                raise UnknownKindError(f"unknown entity kind {kind!r}")
            return sorted(self._entities[kind].values(), key=lambda e: e.id)

    def update(self, kind: str, entity_id: int, fields: dict):
        """Re-validate and apply a partial field update."""
        with self._lock:
            entity = self.get(kind, entity_id)
            merged = entity_fields(entity)
            merged.update(fields)
            merged.pop("id", None)
            rebuilt = getattr(self, f"_build_{kind}")(merged)
            rebuilt.id = entity_id
            self._entities[kind][entity_id] = rebuilt
            self._record("update", entity=kind, id=entity_id, fields=entity_fields(rebuilt))
            return rebuilt

    # -- links -----------------------------------------------------------

    def link(self, zone_id: int, target_kind: str, target_id: int) -> Link:
        """Attach a campaign or individual ad to a zone. Idempotent."""
        with self._lock:
            self.get("zone", zone_id)
            if target_kind not in ("campaign", "ad"):
                raise InvariantError("target_kind", "must be 'campaign' or 'ad'")
            self.get(target_kind, target_id)
            candidate = Link(zone_id, target_kind, target_id)
            for existing in self._links:
                if existing == candidate:
                    return existing
            self._links.append(candidate)
            self._record("link", zone_id=zone_id, target_kind=target_kind, target_id=target_id)
            return candidate

    def unlink(self, zone_id: int, target_kind: str, target_id: int) -> bool:
        with self._lock:
            candidate = Link(zone_id, target_kind, target_id)
            if candidate in self._links:
                self._links.remove(candidate)
                self._record("unlink", zone_id=zone_id, target_kind=target_kind, target_id=target_id)
                return True
            return False

    def links_for_zone(self, zone_id: int) -> list[Link]:
        with self._lock:
            return [l for l in self._links if l.zone_id == zone_id]

    def all_links(self) -> list[Link]:
        with self._lock:
            return list(self._links)

    # -- targeting rules ---------------------------------------------------

    def set_targeting(self, owner_kind: str, owner_id: int, dimension: str, values) -> TargetingRule:
        """Replace the owner's rule on ``dimension``; empty values clears it."""
        with self._lock:
            if owner_kind not in ("campaign", "ad"):
                raise InvariantError("owner_kind", "must be 'campaign' or 'ad'")
            self.get(owner_kind, owner_id)
            self._rules = [r for r in self._rules
                           if not (r.owner_kind == owner_kind and r.owner_id == owner_id
                                   and r.dimension == dimension)]
            values = tuple(values)
            if values:
                rule = TargetingRule(owner_kind, owner_id, dimension,
                                     validate_rule_values(dimension, values))
                self._rules.append(rule)
            else:
                rule = TargetingRule(owner_kind, owner_id, dimension, ())
            self._record("set_targeting", owner_kind=owner_kind, owner_id=owner_id,
                         dimension=dimension, values=list(rule.values))
            return rule

    def rules_for(self, owner_kind: str, owner_id: int) -> list[TargetingRule]:
        with self._lock:
            return [r for r in self._rules
                    if r.owner_kind == owner_kind and r.owner_id == owner_id]

    def all_rules(self) -> list[TargetingRule]:
        with self._lock:
            return list(self._rules)

    def rules_for_ad(self, ad: Ad) -> list[TargetingRule]:
        """Campaign-level and ad-level rules combined (both must match)."""
        with self._lock:
            return self.rules_for("campaign", ad.campaign_id) + self.rules_for("ad", ad.id)

    # -- delivery queries ----------------------------------------------------

    def eligible_ads(self, zone_id: int, instant: datetime,
                     tz: tzinfo = timezone.utc) -> list[Ad]:
        """Ads linked to the zone (directly or via campaign), in a campaign
        active at ``instant``, fitting within the zone's dimensions.
        Ordered by ad id ascending."""
        with self._lock:
            zone = self.get("zone", zone_id)
            found: dict[int, Ad] = {}
            for link in self._links:
                if link.zone_id != zone_id:
                    continue
                if link.target_kind == "ad":
                    ad = self._entities["ad"].get(link.target_id)
                    if ad is not None:
                        found[ad.id] = ad
                else:
                    for ad in self._entities["ad"].values():
                        if ad.campaign_id == link.target_id:
                            found[ad.id] = ad
            result = []
            for ad in found.values():
                if ad.disabled:
                    continue
                campaign = self._entities["campaign"].get(ad.campaign_id)
                if campaign is None or campaign.disabled:
                    continue
                advertiser = self._entities["advertiser"].get(campaign.advertiser_id)
                if advertiser is None or advertiser.disabled:
                    continue
                if not campaign_active_at(campaign, instant, tz):
                    continue
                if ad.width > zone.width or ad.height > zone.height:
                    continue
                result.append(ad)
            return sorted(result, key=lambda a: a.id)

    # -- resolution helpers used by stats scoping -----------------------------

    def campaign_of_ad(self, ad_id: int) -> Campaign | None:
        with self._lock:
            ad = self._entities["ad"].get(ad_id)
            if ad is None:
                return None
            return self._entities["campaign"].get(ad.campaign_id)

    def website_of_zone(self, zone_id: int) -> Website | None:
        with self._lock:
            zone = self._entities["zone"].get(zone_id)
            if zone is None:
                return None
            return self._entities["website"].get(zone.website_id)

    # -- journaling / snapshot support ----------------------------------------

    def _record(self, op: str, **payload):
        if self._journal is not None:
            self._journal({"op": op, **payload})

    def set_journal(self, journal) -> None:
        with self._lock:
            self._journal = journal

    @property
    def next_id(self) -> int:
        with self._lock:
            return self._next_id

    def dump_state(self) -> dict:
        """Full state as plain JSON-ready data (sorted, canonical)."""
        with self._lock:
            state = {"next_id": self._next_id, "entities": {}, "links": [], "rules": []}
            for kind in sorted(ENTITY_KINDS):
                state["entities"][kind] = [entity_fields(e, with_id=True)
                                           for e in self.list(kind)]
            state["links"] = [{"zone_id": l.zone_id, "target_kind": l.target_kind,
                               "target_id": l.target_id}
                              for l in sorted(self._links, key=lambda l: (l.zone_id, l.target_kind, l.target_id))]
            state["rules"] = [{"owner_kind": r.owner_kind, "owner_id": r.owner_id,
                               "dimension": r.dimension, "values": list(r.values)}
                              for r in sorted(self._rules, key=lambda r: (r.owner_kind, r.owner_id, r.dimension))]
            return state

    @classmethod
    def from_state(cls, state: dict, journal=None) -> "Inventory":
        inv = cls()
        for kind in ("advertiser", "website", "campaign", "zone", "ad"):
            for row in state.get("entities", {}).get(kind, []):
                row = dict(row)
                entity_id = row.pop("id")
                # bypass sequence monotonicity while replaying stored ids
                builder = getattr(inv, f"_build_{kind}")
                entity = builder(row)
                entity.id = entity_id
                inv._entities[kind][entity_id] = entity
        for row in state.get("links", []):
            inv._links.append(Link(row["zone_id"], row["target_kind"], row["target_id"]))
        for row in state.get("rules", []):
            inv._rules.append(TargetingRule(row["owner_kind"], row["owner_id"],
                                            row["dimension"], tuple(row["values"])))
        inv._next_id = state.get("next_id", 1 + max(
            [e.id for kind in ENTITY_KINDS for e in inv._entities[kind].values()], default=0))
        inv._journal = journal
        return inv


def entity_fields(entity, with_id: bool = True) -> dict:
    """Dataclass fields as JSON-ready values (dates ISO, keywords list)."""
    out = {}
    for f in dc_fields(entity):
        value = getattr(entity, f.name)
        if isinstance(value, date):
            value = value.isoformat()
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    if not with_id:
        out.pop("id", None)
    return out
