"""Demo corpus: three photography websites and a 15-ad pool.

The corpus file holds a gadget-review site, a portrait-service site and a
bridal site, each with three sized zones, all cross-linked to all three
campaigns so content matching (not manual linking) decides what serves.
Entity refs in the file are symbolic; ids are assigned by insertion order,
so loading into a fresh inventory is fully deterministic.
"""

from __future__ import annotations

import json
import os
from importlib import resources

from .inventory import Inventory


def builtin_fixture_dir() -> str:
    """Path of the packaged corpus directory."""
    return str(resources.files("adserver.data").joinpath("fixtures"))


def load_corpus(path=None) -> dict:
    """Read corpus.json from a fixture directory (packaged one by default)."""
    directory = builtin_fixture_dir() if path is None else os.fspath(path)
    with open(os.path.join(directory, "corpus.json"), encoding="utf-8") as fh:
        return json.load(fh)


def load_fixtures(inventory: Inventory, path=None) -> dict[str, int]:
    """Install the corpus into ``inventory``; returns symbolic ref -> id."""
    corpus = load_corpus(path)
    refs: dict[str, int] = {}

    def strip_ref(row: dict) -> dict:
        return {k: v for k, v in row.items() if k != "ref"}

    for row in corpus.get("advertisers", []):
        refs[row["ref"]] = inventory.register("advertiser", strip_ref(row))
    for row in corpus.get("websites", []):
        refs[row["ref"]] = inventory.register("website", strip_ref(row))
    for row in corpus.get("campaigns", []):
        fields = strip_ref(row)
        fields["advertiser_id"] = refs[fields.pop("advertiser")]
        refs[row["ref"]] = inventory.register("campaign", fields)
    for row in corpus.get("zones", []):
        fields = strip_ref(row)
        fields["website_id"] = refs[fields.pop("website")]
        refs[row["ref"]] = inventory.register("zone", fields)
    for row in corpus.get("ads", []):
        fields = strip_ref(row)
        fields["campaign_id"] = refs[fields.pop("campaign")]
        refs[row["ref"]] = inventory.register("ad", fields)
    for row in corpus.get("links", []):
        if "campaign" in row:
            inventory.link(refs[row["zone"]], "campaign", refs[row["campaign"]])
        else:
            inventory.link(refs[row["zone"]], "ad", refs[row["ad"]])
    for row in corpus.get("targeting", []):
        owner_kind = "campaign" if "campaign" in row else "ad"
        owner_id = refs[row[owner_kind]]
        inventory.set_targeting(owner_kind, owner_id, row["dimension"], row["values"])
    return refs
