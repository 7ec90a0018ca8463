"""Self-contained contextual ad server.

Inventory of advertisers/campaigns/ads/websites/zones, term-vector content
matching, generalized second-price slot pricing, HTTP delivery with bucket
logging, snapshot/event-log durability, and an admin CLI.
"""

from .auction import SlotAssignment, gsp_assign
from .inventory import (Ad, Advertiser, Campaign, Inventory, Link,
                        TargetingRule, Website, Zone, campaign_active_at)
from .ledger import (BucketRecord, DeliveryEvent, Ledger, StatsReport,
                     StatsScope)
from .lexicon import (IdfCorpus, ScoredTerm, TermVector, ad_vector,
                      extract_keywords, normalize_text, page_vector)
from .matcher import (Candidate, RequestContext, passes_targeting,
                      rank_candidates, relevance, resolve_context)
from .vault import Snapshot, load_snapshot, recover, save_snapshot

__version__ = "0.1.0"

__all__ = [
    "Ad", "Advertiser", "BucketRecord", "Campaign", "Candidate",
    "DeliveryEvent", "IdfCorpus", "Inventory", "Ledger", "Link",
    "RequestContext", "ScoredTerm", "SlotAssignment", "Snapshot",
    "StatsReport", "StatsScope", "TargetingRule", "TermVector", "Website",
    "Zone", "ad_vector", "campaign_active_at", "extract_keywords",
    "gsp_assign", "load_snapshot", "normalize_text", "page_vector",
    "passes_targeting", "rank_candidates", "recover", "relevance",
    "resolve_context", "save_snapshot",
]
