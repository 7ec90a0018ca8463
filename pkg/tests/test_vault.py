import json
import os
import random
from datetime import datetime, timedelta, timezone

import pytest

import oracle_tools as ot
from adserver.fixtures import load_fixtures
from adserver.inventory import Inventory
from adserver.ledger import DeliveryEvent, Ledger, hour_bucket, iso_utc
from adserver.vault import (EventLog, Snapshot, VaultError, fold_events,
                            load_snapshot, recover, replay_admin_events,
                            save_snapshot)

T0 = datetime(2013, 3, 1, 9, 0, tzinfo=timezone.utc)


class TestSnapshot:
    def test_save_load_roundtrip_identical_state(self, tmp_path, fixture_inventory):
        inv, _ = fixture_inventory
        path = tmp_path / "inventory.snapshot.json"
        save_snapshot(Snapshot.capture(inv, created_at=T0), path)
        loaded = load_snapshot(path)
        assert loaded.entities == inv.dump_state()
        assert loaded.created_at == T0

    def test_load_then_save_byte_identical(self, tmp_path, fixture_inventory):
        inv, _ = fixture_inventory
        path = tmp_path / "a.json"
        save_snapshot(Snapshot.capture(inv, created_at=T0), path)
        first = path.read_bytes()
        save_snapshot(load_snapshot(path), path)
        assert path.read_bytes() == first

    def test_same_state_same_bytes(self, tmp_path, fixture_inventory):
        inv, _ = fixture_inventory
        snap = Snapshot.capture(inv, created_at=T0)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_snapshot(snap, p1)
        save_snapshot(snap, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_first_in_bytes(self, tmp_path, inventory):
        path = tmp_path / "a.json"
        save_snapshot(Snapshot.capture(inventory, created_at=T0), path)
        assert path.read_bytes().startswith(b'{"version":1,')

    def test_unwritable_path_names_path(self, inventory):
        with pytest.raises(VaultError) as err:
            save_snapshot(Snapshot.capture(inventory), "/nonexistent-dir/x/snap.json")
        assert "/nonexistent-dir/x/snap.json" in str(err.value)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text('{"version": 99, "created_at": "2013-03-01T00:00:00Z", "entities": {}}')
        with pytest.raises(VaultError) as err:
            load_snapshot(path)
        assert "version" in str(err.value)

    def test_garbage_snapshot_rejected(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text("not json at all")
        with pytest.raises(VaultError):
            load_snapshot(path)


def write_log(path, events):
    log = EventLog(path)
    for e in events:
        log.append(e.to_wire())
    log.close()


class TestRecovery:
    def test_empty_directory_empty_state(self, tmp_path):
        inv, ledger = recover(tmp_path / "snap.json", tmp_path / "events.log")
        assert inv.list("advertiser") == []
        assert ledger.buckets() == []

    def test_fold_counts_match_manual(self, tmp_path):
        path = tmp_path / "events.log"
        write_log(path, [DeliveryEvent("impression", 7, 2, T0)] * 3)
        _, ledger = recover(None, path)
        assert [b.impressions for b in ledger.buckets()] == [3]

    def test_corrupt_line_reports_number(self, tmp_path):
        path = tmp_path / "events.log"
        good = json.dumps(DeliveryEvent("impression", 1, 1, T0).to_wire())
        path.write_text(good + "\n{broken\n" + good + "\n")
        with pytest.raises(VaultError) as err:
            fold_events(path)
        assert "event log line 2" in str(err.value)

    def test_snapshot_plus_log(self, tmp_path, fixture_inventory):
        inv, refs = fixture_inventory
        snap = tmp_path / "snap.json"
        log = tmp_path / "events.log"
        save_snapshot(Snapshot.capture(inv, created_at=T0), snap)
        write_log(log, [DeliveryEvent("impression", refs["ad_gear_sky"],
                                      refs["zone_picstop_sky"], T0),
                        DeliveryEvent("click", refs["ad_gear_sky"],
                                      refs["zone_picstop_sky"], T0, 42)])
        inv2, ledger = recover(snap, log)
        assert inv2.dump_state() == inv.dump_state()
        bucket = ledger.buckets()[0]
        assert (bucket.impressions, bucket.clicks, bucket.revenue_micros) == (1, 1, 42)

    def test_truncation_prefix_fold(self, tmp_path):
        rng = random.Random(13)
        events = [DeliveryEvent(rng.choice(["impression", "click"]),
                                rng.randint(1, 5), rng.randint(1, 3),
                                T0 + timedelta(minutes=i),
                                rng.randrange(100) if rng.random() < 0.5 else 0)
                  for i in range(60)]
        path = tmp_path / "events.log"
        write_log(path, events)
        data = path.read_bytes()
        boundaries = [i + 1 for i, b in enumerate(data) if b == 0x0A]
        for cut_index in (0, 10, 35, len(boundaries) - 1):
            cut = boundaries[cut_index]
            trunc = tmp_path / f"trunc-{cut}.log"
            trunc.write_bytes(data[:cut])
            _, ledger = recover(None, trunc)
            surviving = events[:cut_index + 1]
            oracle = ot.replay_oracle([(e.kind, e.ad_id, e.zone_id,
                                        iso_utc(hour_bucket(e.instant)), e.price_micros)
                                       for e in surviving])
            got = {(b.ad_id, b.zone_id, iso_utc(b.hour)):
                   [b.impressions, b.clicks, b.revenue_micros]
                   for b in ledger.buckets()}
            assert got == oracle


class TestAdminReplay:
    def test_journal_rebuilds_inventory(self, tmp_path):
        log_path = tmp_path / "events.log"
        log = EventLog(log_path)
        inv = Inventory(journal=lambda payload: log.append({"kind": "admin", **payload}))
        refs = load_fixtures(inv)
        inv.set_targeting("campaign", refs["camp_gear"], "language", ["en"])
        inv.unlink(refs["zone_picstop_sky"], "campaign", refs["camp_bridal"])
        inv.update("ad", refs["ad_gear_sky"], {"bid_micros": 123})
        log.close()

        rebuilt = replay_admin_events(log_path)
        assert rebuilt.dump_state() == inv.dump_state()

    def test_mixed_log_replays_and_folds(self, tmp_path):
        log_path = tmp_path / "events.log"
        log = EventLog(log_path)
        inv = Inventory(journal=lambda payload: log.append({"kind": "admin", **payload}))
        refs = load_fixtures(inv)
        ledger = Ledger(sink=log.append)
        ledger.log_event(DeliveryEvent("impression", refs["ad_bridal_sky"],
                                       refs["zone_bridalsnaps_sky"], T0))
        log.close()
        rebuilt_ledger = fold_events(log_path)
        assert rebuilt_ledger.totals() == (1, 0, 0)
        assert replay_admin_events(log_path).dump_state() == inv.dump_state()
