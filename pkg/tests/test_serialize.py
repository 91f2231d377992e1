import json
import random

import pytest

from conftest import build_bench, build_random_state, drive_round
from ska import serialize
from ska.agreement import PhaseLabel
from ska.db import Database
from ska.errors import ValidationError
from ska.protocol import RoundPhase
from ska.store import Workbench


class TestCanonicalExport:
    def test_same_state_same_bytes(self):
        bench = build_random_state(42)
        a = serialize.canonical_json(serialize.to_document(bench))
        b = serialize.canonical_json(serialize.to_document(bench))
        assert a == b
        assert a.endswith("\n")

    def test_insertion_order_does_not_leak(self):
        # two benches reaching the same state through differently ordered
        # annotator registration must export identically
        b1 = Workbench()
        b2 = Workbench()
        from conftest import make_raw_book
        from ska.corpus import IngestConfig

        raw = make_raw_book(random.Random(0), 1, 1)
        b1.ingest(raw, IngestConfig(textbook_id="tb", min_section_chars=1))
        b2.ingest(raw, IngestConfig(textbook_id="tb", min_section_chars=1))
        for a in ("x", "y", "z"):
            b1.add_annotator(a)
        for a in ("z", "x", "y"):
            b2.add_annotator(a)
        d1 = serialize.to_document(b1)  # tokens excluded without include_auth
        d2 = serialize.to_document(b2)
        assert serialize.canonical_json(d1) == serialize.canonical_json(d2)

    def test_tokens_only_with_auth(self):
        bench = build_bench(random.Random(2))
        assert "tokens" not in serialize.to_document(bench)
        withauth = serialize.to_document(bench, include_auth=True)
        assert set(withauth["tokens"].values()) == {"ann1", "ann2", "ann3"}

    def test_unicode_not_escaped(self):
        bench = Workbench()
        from ska.corpus import IngestConfig

        bench.ingest(
            "# Ch\n\n## S\nnaïve café 漢字 body text\n",
            IngestConfig(textbook_id="tb", min_section_chars=1),
        )
        text = serialize.canonical_json(serialize.to_document(bench))
        assert "naïve" in text and "漢字" in text
        assert "\\u" not in text


class TestImport:
    def test_round_trip_equality(self):
        bench = build_random_state(7)
        doc = serialize.to_document(bench, include_auth=True)
        restored = serialize.from_document(doc)
        again = serialize.to_document(restored, include_auth=True)
        assert serialize.canonical_json(doc) == serialize.canonical_json(again)

    def test_round_trip_preserves_behavior(self):
        # the restored store accepts operations exactly like the original
        rng = random.Random(8)
        bench = build_bench(rng, n_chapters=1)
        drive_round(bench, rng, "tb.c01", stop_phase=RoundPhase.CODEBOOK_UPDATE)
        doc = serialize.to_document(bench, include_auth=True)
        restored = serialize.from_document(doc)
        r = restored.rounds[restored.round_order[0]]
        restored.close_round(r.id, r.lead_id, [])
        assert r.phase is RoundPhase.CLOSED

    def test_missing_key_rejected(self):
        doc = serialize.to_document(build_bench(random.Random(3)))
        del doc["annotations"]
        with pytest.raises(ValidationError, match="annotations"):
            serialize.from_document(doc)

    def test_wrong_schema_version_rejected(self):
        doc = serialize.to_document(build_bench(random.Random(3)))
        doc["schema_version"] = 99
        with pytest.raises(ValidationError, match="schema_version"):
            serialize.from_document(doc)

    def test_malformed_entity_rejected(self):
        doc = serialize.to_document(build_bench(random.Random(3)))
        doc["annotators"][0] = {"id": "broken"}
        with pytest.raises(ValidationError, match="malformed"):
            serialize.from_document(doc)

    def test_non_object_rejected(self):
        with pytest.raises(ValidationError):
            serialize.from_document(["not", "a", "document"])

    def test_concepts_document_not_importable(self):
        bench = build_random_state(11)
        doc = serialize.concepts_document(bench)
        with pytest.raises(ValidationError, match="concept-list"):
            serialize.from_document(doc)


class TestConceptsDocument:
    def test_lists_closed_round_consensus(self):
        rng = random.Random(12)
        bench = build_bench(rng, n_chapters=1)
        drive_round(bench, rng, "tb.c01", promote_all=True)
        doc = serialize.concepts_document(bench, PhaseLabel.AFTER_DISCUSSION)
        assert doc["document_type"] == "concept_lists"
        assert doc["phase"] == "after_discussion"
        assert doc["sections"], "closed round should produce sections"
        for entry in doc["sections"]:
            assert entry["round_id"] == bench.round_order[0]
            for concept in entry["concepts"]:
                assert set(concept) == {"value", "gram_length"}
        # no body text anywhere in the payload
        text = json.dumps(doc)
        body = bench.section(doc["sections"][0]["section_id"]).body
        assert body not in text

    def test_open_rounds_excluded(self):
        rng = random.Random(13)
        bench = build_bench(rng, n_chapters=1)
        drive_round(bench, rng, "tb.c01", stop_phase=RoundPhase.DISCUSSION)
        doc = serialize.concepts_document(bench)
        assert doc["sections"] == []


class TestDatabase:
    def test_fresh_database_loads_none(self, tmp_path):
        db = Database(tmp_path / "w.db")
        assert db.load() is None

    def test_save_load_round_trip(self, tmp_path):
        db = Database(tmp_path / "w.db")
        bench = build_random_state(21)
        db.save(bench)
        restored = db.load()
        assert serialize.canonical_json(
            serialize.to_document(restored, include_auth=True)
        ) == serialize.canonical_json(serialize.to_document(bench, include_auth=True))

    def test_save_overwrites_single_row(self, tmp_path):
        db = Database(tmp_path / "w.db")
        db.save(build_bench(random.Random(1)))
        bench2 = build_random_state(22)
        db.save(bench2)
        restored = db.load()
        assert len(restored.rounds) == len(bench2.rounds)
        import sqlite3

        with sqlite3.connect(db.path) as conn:
            count = conn.execute("SELECT COUNT(*) FROM workbench").fetchone()[0]
        assert count == 1

    def test_load_or_create(self, tmp_path):
        db = Database(tmp_path / "w.db")
        bench = db.load_or_create()
        assert isinstance(bench, Workbench)
        assert db.load() is not None

    def test_tokens_survive_persistence(self, tmp_path):
        db = Database(tmp_path / "w.db")
        bench = build_bench(random.Random(1))
        db.save(bench)
        restored = db.load()
        assert restored.tokens == bench.tokens

    def test_corrupt_payload_rejected(self, tmp_path):
        import sqlite3

        db = Database(tmp_path / "w.db")
        db.save(Workbench())
        with sqlite3.connect(db.path) as conn:
            conn.execute("UPDATE workbench SET document = 'not json'")
        with pytest.raises(ValidationError):
            db.load()
