"""Bucket logging of impressions and clicks, and stats summarization.

Every delivery event lands in an hourly (ad, zone) bucket holding running
impression/click totals and a revenue accumulator. Events also stream to an
append-only sink so the bucket state can always be rebuilt by replay. The
ledger never rejects an event: malformed ones are counted in a quarantine
counter instead of a bucket.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone

EVENT_KINDS = ("impression", "click")


def iso_utc(instant: datetime) -> str:
    """ISO-8601 UTC with trailing Z, second precision."""
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso_utc(value: str) -> datetime:
    """Parse ISO-8601, accepting both Z and numeric offsets."""
    raw = value.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    parsed = datetime.fromisoformat(raw)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def hour_bucket(instant: datetime) -> datetime:
    """Truncate an instant to its UTC hour."""
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc).replace(minute=0, second=0, microsecond=0)


@dataclass(frozen=True)
class DeliveryEvent:
    kind: str
    ad_id: int
    zone_id: int
    instant: datetime
    price_micros: int = 0

    def to_wire(self) -> dict:
        return {"kind": self.kind, "ad_id": self.ad_id, "zone_id": self.zone_id,
                "ts": iso_utc(self.instant), "price": self.price_micros}

    @classmethod
    def from_wire(cls, row: dict) -> "DeliveryEvent":
        return cls(kind=row.get("kind"), ad_id=row.get("ad_id"),
                   zone_id=row.get("zone_id"),
                   instant=parse_iso_utc(row["ts"]),
                   price_micros=int(row.get("price", 0)))


@dataclass
class BucketRecord:
    ad_id: int
    zone_id: int
    hour: datetime
    impressions: int = 0
    clicks: int = 0
    revenue_micros: int = 0


@dataclass
class StatsScope:
    """Any subset of these narrows the report; empty scope is global."""

    advertiser_id: int | None = None
    campaign_id: int | None = None
    ad_id: int | None = None
    website_id: int | None = None
    zone_id: int | None = None

    def is_global(self) -> bool:
        return all(v is None for v in (self.advertiser_id, self.campaign_id,
                                       self.ad_id, self.website_id, self.zone_id))


@dataclass
class StatsReport:
    scope: StatsScope
    start: datetime
    end: datetime
    impressions: int
    clicks: int
    ctr: float
    revenue_micros: int

    def to_dict(self) -> dict:
        scope = {k: v for k, v in (("advertiser", self.scope.advertiser_id),
                                   ("campaign", self.scope.campaign_id),
                                   ("ad", self.scope.ad_id),
                                   ("website", self.scope.website_id),
                                   ("zone", self.scope.zone_id)) if v is not None}
        return {"scope": scope, "from": iso_utc(self.start), "to": iso_utc(self.end),
                "impressions": self.impressions, "clicks": self.clicks,
                "ctr": self.ctr, "revenue_micros": self.revenue_micros}


def _well_formed(event: DeliveryEvent) -> bool:
    def good_id(v):
        return isinstance(v, int) and not isinstance(v, bool) and v >= 1
    return event.kind in EVENT_KINDS and good_id(event.ad_id) and good_id(event.zone_id)


class Ledger:
    """Thread-safe running totals per (ad, zone, hour).

    ``sink`` (when given) receives every event's wire dict before the bucket
    update, preserving exact append order under the same lock.
    """

    def __init__(self, sink=None):
        self._lock = threading.Lock()
        self._buckets: dict[tuple[int, int, datetime], BucketRecord] = {}
        self._sink = sink
        self.quarantined = 0

    def set_sink(self, sink) -> None:
        with self._lock:
            self._sink = sink

    def log_event(self, event: DeliveryEvent) -> BucketRecord | None:
        """Record one event; returns the updated bucket (None if quarantined)."""
        with self._lock:
            if self._sink is not None:
                self._sink(event.to_wire())
            if not _well_formed(event):
                self.quarantined += 1
                return None
            return self._apply(event)

    def _apply(self, event: DeliveryEvent) -> BucketRecord:
        hour = hour_bucket(event.instant)
        key = (event.ad_id, event.zone_id, hour)
        bucket = self._buckets.get(key)
        if bucket is None:
            bucket = BucketRecord(ad_id=event.ad_id, zone_id=event.zone_id, hour=hour)
            self._buckets[key] = bucket
        if event.kind == "impression":
            bucket.impressions += 1
        else:
            bucket.clicks += 1
            bucket.revenue_micros += event.price_micros
        return bucket

    def replay(self, event: DeliveryEvent):
        """Fold an already-persisted event into the buckets (no sink append)."""
        with self._lock:
            if not _well_formed(event):
                self.quarantined += 1
                return None
            return self._apply(event)

    def buckets(self) -> list[BucketRecord]:
        """Consistent snapshot of all buckets, ordered by (ad, zone, hour)."""
        with self._lock:
            copies = [BucketRecord(b.ad_id, b.zone_id, b.hour, b.impressions,
                                   b.clicks, b.revenue_micros)
                      for b in self._buckets.values()]
        return sorted(copies, key=lambda b: (b.ad_id, b.zone_id, b.hour))

    def totals(self) -> tuple[int, int, int]:
        """(impressions, clicks, revenue_micros) across every bucket."""
        with self._lock:
            imp = sum(b.impressions for b in self._buckets.values())
            clk = sum(b.clicks for b in self._buckets.values())
            rev = sum(b.revenue_micros for b in self._buckets.values())
            return imp, clk, rev

    def query_stats(self, inventory, scope: StatsScope,
                    start: datetime, end: datetime) -> StatsReport:
        """Sum bucket counters with hour in [start, end) resolving scope
        through the inventory (ad -> campaign -> advertiser; zone -> website)."""
        if start > end:
            raise ValueError("range start must not be after range end")
        start, end = _as_utc(start), _as_utc(end)
        impressions = clicks = revenue = 0
        for bucket in self.buckets():
            if not (start <= bucket.hour < end):
                continue
            if not _bucket_in_scope(inventory, scope, bucket):
                continue
            impressions += bucket.impressions
            clicks += bucket.clicks
            revenue += bucket.revenue_micros
        ctr = clicks / impressions if impressions > 0 else 0.0
        return StatsReport(scope=scope, start=start, end=end,
                           impressions=impressions, clicks=clicks, ctr=ctr,
                           revenue_micros=revenue)


def _as_utc(instant: datetime) -> datetime:
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return instant.astimezone(timezone.utc)


def _bucket_in_scope(inventory, scope: StatsScope, bucket: BucketRecord) -> bool:
    if scope.ad_id is not None and bucket.ad_id != scope.ad_id:
        return False
    if scope.zone_id is not None and bucket.zone_id != scope.zone_id:
        return False
    if scope.campaign_id is not None or scope.advertiser_id is not None:
        campaign = inventory.campaign_of_ad(bucket.ad_id)
        if campaign is None:
            return False
        if scope.campaign_id is not None and campaign.id != scope.campaign_id:
            return False
        if scope.advertiser_id is not None and campaign.advertiser_id != scope.advertiser_id:
            return False
    if scope.website_id is not None:
        website = inventory.website_of_zone(bucket.zone_id)
        if website is None or website.id != scope.website_id:
            return False
    return True
