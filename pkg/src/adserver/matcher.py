"""Targeting filters and relevance ranking for an ad request.

Takes the zone's eligible ads, applies campaign- and ad-level targeting
rules against the request context, scores content relevance by cosine
similarity between the resolved context vector and each ad's vector, and
returns a bid-ordered candidate list capped at the zone's capacity.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone, tzinfo

from .inventory import Ad, Inventory, TargetingRule, Zone
from .lexicon import IdfCorpus, TermVector, ad_vector, page_vector

DEFAULT_RELEVANCE_THRESHOLD = 0.05
RANK_MODES = ("bid", "weighted")


@dataclass
class RequestContext:
    """Everything known about one ad request."""

    zone_id: int
    instant: datetime
    source: str | None = None
    country: str | None = None
    city: str | None = None
    browser: str | None = None
    language: str | None = None
    context_text: str | None = None


@dataclass
class Candidate:
    ad: Ad
    relevance: float
    bid_micros: int


def _match_date(values, local: datetime) -> bool:
    day = local.date().isoformat()
    for v in values:
        if ".." in v:
            lo, hi = v.split("..", 1)
            if lo <= day <= hi:
                return True
        elif v == day:
            return True
    return False


def _match_time(values, local: datetime) -> bool:
    hhmm = local.strftime("%H:%M")
    for v in values:
        lo, hi = v.split("-", 1)
        if lo <= hi:
            if lo <= hhmm <= hi:
                return True
        elif hhmm >= lo or hhmm <= hi:  # overnight range, e.g. 22:00-02:00
            return True
    return False


def _match_literal(values, ctx_value: str | None) -> bool:
    if ctx_value is None:
        return False
    return ctx_value.strip().lower() in values


def _match_language(values, ctx_value: str | None) -> bool:
    if ctx_value is None:
        return False
    lang = ctx_value.strip().lower()
    return any(lang == v or lang.startswith(v + "-") for v in values)


def _match_browser(values, ctx_value: str | None) -> bool:
    if ctx_value is None:
        return False
    agent = ctx_value.lower()
    return any(v in agent for v in values)


def passes_targeting(rules: list[TargetingRule], ctx: RequestContext,
                     tz: tzinfo = timezone.utc) -> bool:
    """True iff every rule matches the context.

    Rules at campaign and ad level are ANDed; within one rule the matcher
    set is an OR. A rule on a dimension the context does not carry fails
    (hard filter). No rules at all passes.
    """
    instant = ctx.instant
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    local = instant.astimezone(tz)
    for rule in rules:
        if not rule.values:
            continue
        dim = rule.dimension
        if dim == "date":
            ok = _match_date(rule.values, local)
        elif dim == "day_of_week":
            ok = local.strftime("%A").lower() in rule.values
        elif dim == "time_of_day":
            ok = _match_time(rule.values, local)
        elif dim == "country":
            ok = _match_literal(rule.values, ctx.country)
        elif dim == "city":
            ok = _match_literal(rule.values, ctx.city)
        elif dim == "browser":
            ok = _match_browser(rule.values, ctx.browser)
        elif dim == "language":
            ok = _match_language(rule.values, ctx.language)
        elif dim == "source":
            ok = _match_literal(rule.values, ctx.source)
        else:
            ok = False
        if not ok:
            return False
    return True


def relevance(a: TermVector, b: TermVector) -> float:
    """Cosine similarity in [0, 1]; 0 when either vector is empty."""
    if a.is_empty() or b.is_empty():
        return 0.0
    denom = a.norm * b.norm
    if denom == 0.0:
        return 0.0
    return min(1.0, max(0.0, a.dot(b) / denom))


def resolve_context(inventory: Inventory, zone: Zone, ctx: RequestContext,
                    idf: IdfCorpus | None = None) -> TermVector:
    """Context vector per zone mode.

    request_context vectorizes the request's page text; stored_context uses
    the zone's stored document, falling back to the website's; static_links
    yields an empty vector so link order alone governs.
    """
    if zone.mode == "static_links":
        return TermVector()
    if zone.mode == "request_context":
        return page_vector(ctx.context_text or "", idf)
    doc = zone.context_doc
    if not doc:
        website = inventory.find("website", zone.website_id)
        doc = website.context_doc if website else ""
    return page_vector(doc or "", idf)


def rank_candidates(inventory: Inventory, zone_id: int, ctx: RequestContext, *,
                    threshold: float = DEFAULT_RELEVANCE_THRESHOLD,
                    idf: IdfCorpus | None = None,
                    rank_mode: str = "bid",
                    tz: tzinfo = timezone.utc) -> list[Candidate]:
    """Ranked, capacity-capped candidates for one request.

    Eligible ads that fail targeting are dropped; when the context vector is
    non-empty, ads below the relevance threshold are dropped too. Order is
    bid descending (or bid x relevance with rank_mode="weighted"), then
    relevance descending, then ad id ascending.
    """
    if rank_mode not in RANK_MODES:
        raise ValueError(f"unknown rank mode {rank_mode!r}")
    zone = inventory.get("zone", zone_id)
    context = resolve_context(inventory, zone, ctx, idf)
    candidates = []
    for ad in inventory.eligible_ads(zone_id, ctx.instant, tz):
        if not passes_targeting(inventory.rules_for_ad(ad), ctx, tz):
            continue
        rel = 0.0
        if not context.is_empty():
            rel = relevance(context, ad_vector(ad))
            if rel < threshold:
                continue
        candidates.append(Candidate(ad=ad, relevance=rel, bid_micros=ad.bid_micros))
    if rank_mode == "weighted":
        key = lambda c: (-(c.bid_micros * c.relevance), -c.relevance, c.ad.id)
    else:
        key = lambda c: (-c.bid_micros, -c.relevance, c.ad.id)
    candidates.sort(key=key)
    return candidates[:zone.capacity]
