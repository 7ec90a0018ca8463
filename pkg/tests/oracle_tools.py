"""Independent brute-force oracles for the test suite.

Everything here re-derives expected behavior from first principles with
plain dict/Counter arithmetic and deliberately imports nothing from the
adserver package, so oracle and implementation can only agree by both
being right.
"""

from __future__ import annotations

import json
import math
import os
import re
from collections import Counter

_HERE = os.path.dirname(os.path.abspath(__file__))
STOPWORD_FILE = os.path.join(_HERE, "..", "src", "adserver", "data", "stopwords.txt")
CORPUS_FILE = os.path.join(_HERE, "..", "src", "adserver", "data", "fixtures", "corpus.json")
GOLDEN_DIR = os.path.join(_HERE, "golden")


def load_stopwords() -> frozenset:
    with open(STOPWORD_FILE, encoding="utf-8") as fh:
        return frozenset(w.strip() for w in fh if w.strip())


def load_corpus() -> dict:
    with open(CORPUS_FILE, encoding="utf-8") as fh:
        return json.load(fh)


# --- text pipeline, re-derived -------------------------------------------

def toks(text: str) -> list:
    """Strip tags, lowercase, split on non-alphanumerics, drop short/digit tokens."""
    no_tags = re.sub(r"<[^>]*>", " ", text or "").lower()
    return [t for t in re.findall(r"[a-z0-9]+", no_tags)
            if len(t) >= 2 and not t.isdigit()]


def page_weights(text: str, stop: frozenset) -> dict:
    return dict(Counter(t for t in toks(text) if t not in stop))


def ad_weights(ad: dict, stop: frozenset) -> dict:
    weights: dict = {}
    for kw in ad.get("keywords", []):
        for t in toks(kw):
            if t not in stop:
                weights[t] = weights.get(t, 0.0) + 3.0
    for t in toks(ad.get("title", "")):
        if t not in stop:
            weights[t] = weights.get(t, 0.0) + 2.0
    for t in toks(ad.get("description", "")):
        if t not in stop:
            weights[t] = weights.get(t, 0.0) + 1.0
    return weights


def cosine(a: dict, b: dict) -> float:
    if not a or not b:
        return 0.0
    dot = sum(w * b.get(t, 0.0) for t, w in a.items())
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def keyword_scores(text: str, stop: frozenset) -> dict:
    """Frequency-count candidate scores: unigrams, repeated bigrams,
    trailing-'s' merge into an existing singular candidate."""
    tokens = toks(text)
    counts = Counter(t for t in tokens if t not in stop)
    bigram_counts = Counter()
    for a, b in zip(tokens, tokens[1:]):
        if a not in stop and b not in stop:
            bigram_counts[f"{a} {b}"] += 1
    for term, freq in bigram_counts.items():
        if freq >= 2:
            counts[term] += freq
    scores = {t: float(f) for t, f in counts.items()}
    merged: dict = {}
    for term in sorted(scores):
        target = term[:-1] if term.endswith("s") and term[:-1] in scores else term
        merged[target] = merged.get(target, 0.0) + scores[term]
    return merged


def top_keywords(text: str, k: int, stop: frozenset) -> list:
    ranked = sorted(keyword_scores(text, stop).items(), key=lambda kv: (-kv[1], kv[0]))
    return [[term, score] for term, score in ranked[:k]]


# --- fixture serving oracle ------------------------------------------------

def expected_serving(corpus: dict, stop: frozenset, threshold: float = 0.05) -> dict:
    """For each zone ref: the ad refs that should serve, in final order.

    Walks the corpus directly: link table, size fit, cosine against the
    website context, threshold, bid-descending order, capacity cap.
    """
    sites = {w["ref"]: w for w in corpus["websites"]}
    ads = {a["ref"]: a for a in corpus["ads"]}
    campaigns = {c["ref"]: c for c in corpus["campaigns"]}
    ads_of_campaign: dict = {}
    for ref, ad in ads.items():
        ads_of_campaign.setdefault(ad["campaign"], []).append(ref)

    # insertion order across all entity lists defines the global id sequence
    order = (corpus["advertisers"] + corpus["websites"] + corpus["campaigns"]
             + corpus["zones"] + corpus["ads"])
    ids = {row["ref"]: i + 1 for i, row in enumerate(order)}

    result = {}
    for zone in corpus["zones"]:
        zref = zone["ref"]
        linked_ads = []
        for link in corpus["links"]:
            if link["zone"] != zref:
                continue
            if "ad" in link:
                linked_ads.append(link["ad"])
            else:
                linked_ads.extend(ads_of_campaign.get(link["campaign"], []))
        context = zone.get("context_doc") or sites[zone["website"]]["context_doc"]
        ctx_vec = page_weights(context, stop)
        survivors = []
        for aref in dict.fromkeys(linked_ads):
            ad = ads[aref]
            if ad["width"] > zone["width"] or ad["height"] > zone["height"]:
                continue
            rel = cosine(ctx_vec, ad_weights(ad, stop))
            if ctx_vec and rel < threshold:
                continue
            survivors.append((aref, rel, ad.get("bid_micros", 0)))
        survivors.sort(key=lambda s: (-s[2], -s[1], ids[s[0]]))
        result[zref] = [aref for aref, _, _ in survivors[:zone.get("capacity", 3)]]
    assert all(campaigns[ads[a]["campaign"]] is not None
               for refs in result.values() for a in refs)
    return result


def relevance_matrix(corpus: dict, stop: frozenset) -> dict:
    """cosine(site context, ad) for every (site ref, ad ref) pair."""
    matrix = {}
    for site in corpus["websites"]:
        ctx = page_weights(site["context_doc"], stop)
        matrix[site["ref"]] = {
            ad["ref"]: cosine(ctx, ad_weights(ad, stop)) for ad in corpus["ads"]}
    return matrix


# --- GSP oracle --------------------------------------------------------------

def gsp_oracle(bids: list, slots: int, reserve: int) -> list:
    """Brute-force GSP over (bidder_id, bid) pairs already sorted bid-desc.

    Returns [(slot_index, bidder_id, price), ...].
    """
    pool = [(bidder, bid) for bidder, bid in bids if bid >= reserve]
    out = []
    for i in range(min(slots, len(pool))):
        bidder, _ = pool[i]
        price = max(pool[i + 1][1], reserve) if i + 1 < len(pool) else reserve
        out.append((i, bidder, price))
    return out


# --- ledger replay oracle ------------------------------------------------------

def replay_oracle(events: list) -> dict:
    """Sequential fold of (kind, ad_id, zone_id, hour_iso, price) tuples into
    {(ad_id, zone_id, hour_iso): [impressions, clicks, revenue]}."""
    buckets: dict = {}
    for kind, ad_id, zone_id, hour_iso, price in events:
        key = (ad_id, zone_id, hour_iso)
        bucket = buckets.setdefault(key, [0, 0, 0])
        if kind == "impression":
            bucket[0] += 1
        else:
            bucket[1] += 1
            bucket[2] += price
    return buckets
