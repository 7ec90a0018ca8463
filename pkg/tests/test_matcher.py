import math
import random
from datetime import datetime, timezone

import pytest

import oracle_tools as ot
from conftest import load_golden
from adserver.inventory import Inventory, TargetingRule
from adserver.lexicon import TermVector, page_vector
from adserver.matcher import (Candidate, RequestContext, passes_targeting,
                              rank_candidates, relevance, resolve_context)


def raw_vec(weights):
    """Unnormalized vector with a correct cached norm."""
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return TermVector(entries=dict(weights), norm=norm)


def ctx(zone_id=1, instant=None, **fields):
    return RequestContext(zone_id=zone_id,
                          instant=instant or datetime(2013, 3, 1, 12, tzinfo=timezone.utc),
                          **fields)


def rule(dimension, *values, owner_kind="campaign", owner_id=1):
    return TargetingRule(owner_kind, owner_id, dimension, tuple(values))


class TestRelevance:
    def test_identical(self):
        v = page_vector("wedding bridal gown")
        assert relevance(v, v) == pytest.approx(1.0)

    def test_disjoint(self):
        assert relevance(page_vector("camera lens"), page_vector("bridal gown")) == 0.0

    def test_hand_half(self):
        a = raw_vec({"camera": 1.0, "lens": 1.0})
        b = raw_vec({"camera": 1.0, "tripod": 1.0})
        assert relevance(a, b) == pytest.approx(0.5)

    def test_empty_is_zero(self):
        assert relevance(TermVector(), page_vector("camera")) == 0.0

    def test_symmetric_bounded_scale_invariant(self):
        rng = random.Random(4)
        vocab = [f"w{i}" for i in range(30)]
        for _ in range(200):
            a = raw_vec({rng.choice(vocab): rng.uniform(0.1, 5) for _ in range(rng.randint(1, 8))})
            b = raw_vec({rng.choice(vocab): rng.uniform(0.1, 5) for _ in range(rng.randint(1, 8))})
            r = relevance(a, b)
            assert 0.0 <= r <= 1.0
            assert relevance(b, a) == pytest.approx(r, abs=1e-12)
            c = rng.uniform(0.01, 100)
            scaled = raw_vec({t: c * w for t, w in a.entries.items()})
            assert relevance(scaled, b) == pytest.approx(r, abs=1e-9)


class TestTargeting:
    def test_language_match(self):
        assert passes_targeting([rule("language", "en")], ctx(language="en"))

    def test_country_mismatch(self):
        assert not passes_targeting([rule("country", "my")], ctx(country="SG"))

    def test_missing_ctx_field_fails_hard(self):
        assert not passes_targeting([rule("source", "news")], ctx())

    def test_no_rules_passes(self):
        assert passes_targeting([], ctx())

    def test_campaign_and_ad_rules_anded(self):
        rules = [rule("language", "en", owner_kind="campaign"),
                 rule("country", "my", owner_kind="ad")]
        assert passes_targeting(rules, ctx(language="en", country="MY"))
        assert not passes_targeting(rules, ctx(language="en", country="SG"))
        assert not passes_targeting(rules, ctx(language="fr", country="MY"))

    def test_matcher_set_is_or(self):
        assert passes_targeting([rule("country", "my", "sg")], ctx(country="SG"))

    def test_date_range(self):
        r = [rule("date", "2013-03-01..2013-03-05")]
        assert passes_targeting(r, ctx(instant=datetime(2013, 3, 3, tzinfo=timezone.utc)))
        assert not passes_targeting(r, ctx(instant=datetime(2013, 3, 6, tzinfo=timezone.utc)))

    def test_day_of_week(self):
        friday = datetime(2013, 3, 1, 12, tzinfo=timezone.utc)
        assert passes_targeting([rule("day_of_week", "friday")], ctx(instant=friday))
        assert not passes_targeting([rule("day_of_week", "monday")], ctx(instant=friday))

    def test_time_of_day_with_overnight_range(self):
        noon = ctx(instant=datetime(2013, 3, 1, 12, 30, tzinfo=timezone.utc))
        night = ctx(instant=datetime(2013, 3, 1, 23, 30, tzinfo=timezone.utc))
        assert passes_targeting([rule("time_of_day", "09:00-17:00")], noon)
        assert not passes_targeting([rule("time_of_day", "09:00-17:00")], night)
        assert passes_targeting([rule("time_of_day", "22:00-02:00")], night)

    def test_browser_substring_case_insensitive(self):
        ua = "Mozilla/5.0 (X11; Linux) Firefox/119.0"
        assert passes_targeting([rule("browser", "firefox")], ctx(browser=ua))
        assert not passes_targeting([rule("browser", "chrome")], ctx(browser=ua))

    def test_language_prefix(self):
        assert passes_targeting([rule("language", "en")], ctx(language="en-US"))
        assert not passes_targeting([rule("language", "en")], ctx(language="eng"))


class TestResolveContext:
    def setup_method(self, _):
        self.inv = Inventory()
        self.site = self.inv.register("website", {
            "name": "s", "context_doc": "wedding photography tips"})

    def make_zone(self, mode, context_doc=""):
        zid = self.inv.register("zone", {"website_id": self.site, "name": "z",
                                         "width": 728, "height": 90,
                                         "mode": mode, "context_doc": context_doc})
        return self.inv.get("zone", zid)

    def test_stored_context_uses_zone_doc(self):
        zone = self.make_zone("stored_context", "camera lens reviews")
        vec = resolve_context(self.inv, zone, ctx())
        assert vec == page_vector("camera lens reviews")

    def test_stored_context_falls_back_to_website(self):
        zone = self.make_zone("stored_context")
        vec = resolve_context(self.inv, zone, ctx())
        assert vec == page_vector("wedding photography tips")

    def test_static_links_empty(self):
        zone = self.make_zone("static_links", "ignored text")
        assert resolve_context(self.inv, zone, ctx()).is_empty()

    def test_request_context_uses_request_text(self):
        zone = self.make_zone("request_context")
        vec = resolve_context(self.inv, zone, ctx(context_text="bridal gown shop"))
        assert vec == page_vector("bridal gown shop")

    def test_request_context_absent_text_empty(self):
        zone = self.make_zone("request_context")
        assert resolve_context(self.inv, zone, ctx()).is_empty()


class TestRankCandidates:
    def build(self, mode="stored_context", context="camera lens reviews"):
        inv = Inventory()
        adv = inv.register("advertiser", {"name": "a"})
        camp = inv.register("campaign", {"advertiser_id": adv, "name": "c"})
        site = inv.register("website", {"name": "s"})
        zone = inv.register("zone", {"website_id": site, "name": "z",
                                     "width": 728, "height": 90, "capacity": 3,
                                     "mode": mode, "context_doc": context})
        inv.link(zone, "campaign", camp)
        return inv, camp, zone

    def add_ad(self, inv, camp, bid, keywords):
        return inv.register("ad", {"campaign_id": camp, "title": "t",
                                   "landing_url": "http://x", "width": 728,
                                   "height": 90, "bid_micros": bid,
                                   "keywords": list(keywords)})

    def test_bid_descending_order(self):
        inv, camp, zone = self.build()
        a = self.add_ad(inv, camp, 5_000_000, ["camera"])
        b = self.add_ad(inv, camp, 3_000_000, ["lens"])
        c = self.add_ad(inv, camp, 2_000_000, ["reviews"])
        got = rank_candidates(inv, zone, ctx(zone_id=zone))
        assert [x.ad.id for x in got] == [a, b, c]

    def test_zero_relevance_excluded(self):
        inv, camp, zone = self.build(context="wedding bridal gown")
        self.add_ad(inv, camp, 9_000_000, ["camera"])
        keep = self.add_ad(inv, camp, 1_000_000, ["wedding"])
        got = rank_candidates(inv, zone, ctx(zone_id=zone))
        assert [x.ad.id for x in got] == [keep]

    def test_static_links_mode_skips_relevance(self):
        inv, camp, zone = self.build(mode="static_links")
        off_topic = self.add_ad(inv, camp, 1_000_000, ["unrelated"])
        got = rank_candidates(inv, zone, ctx(zone_id=zone))
        assert [x.ad.id for x in got] == [off_topic]
        assert got[0].relevance == 0.0

    def test_capacity_truncation_and_tiebreak(self):
        inv, camp, zone = self.build()
        ads = [self.add_ad(inv, camp, 1_000_000, ["camera"]) for _ in range(5)]
        got = rank_candidates(inv, zone, ctx(zone_id=zone))
        assert [x.ad.id for x in got] == ads[:3]  # equal bid+relevance -> id asc

    def test_targeting_filters_candidates(self):
        inv, camp, zone = self.build()
        keep = self.add_ad(inv, camp, 1_000_000, ["camera"])
        drop = self.add_ad(inv, camp, 2_000_000, ["lens"])
        inv.set_targeting("ad", drop, "country", ["my"])
        got = rank_candidates(inv, zone, ctx(zone_id=zone, country="SG"))
        assert [x.ad.id for x in got] == [keep]

    def test_weighted_rank_mode(self):
        inv, camp, zone = self.build(context="camera camera camera lens")
        low_bid_high_rel = self.add_ad(inv, camp, 2_000_000, ["camera"])
        high_bid_low_rel = self.add_ad(inv, camp, 2_500_000, ["lens"])
        by_bid = rank_candidates(inv, zone, ctx(zone_id=zone))
        weighted = rank_candidates(inv, zone, ctx(zone_id=zone), rank_mode="weighted")
        assert [x.ad.id for x in by_bid] == [high_bid_low_rel, low_bid_high_rel]
        assert [x.ad.id for x in weighted] == [low_bid_high_rel, high_bid_low_rel]

    def test_bridalsnaps_fixture_matches_golden(self, fixture_inventory):
        inv, refs = fixture_inventory
        golden = load_golden("fixture_serving.json")
        zone = refs["zone_bridalsnaps_leader"]
        got = rank_candidates(inv, zone, ctx(zone_id=zone))
        assert [c.ad.id for c in got] == [refs[r] for r in golden["zone_bridalsnaps_leader"]]
        served_ids = {c.ad.id for c in got}
        gear_and_portrait = {refs[r["ref"]] for r in ot.load_corpus()["ads"]
                             if not r["ref"].startswith("ad_bridal")}
        assert not served_ids & gear_and_portrait
