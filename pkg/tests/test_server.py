"""Tests for the HTTP layer: auth, error mapping, and a full protocol walk
driven entirely through requests."""
import json
import random

import pytest
from fastapi.testclient import TestClient

from conftest import build_bench, build_random_state, drive_round
from ska import serialize
from ska.db import Database
from ska.protocol import RoundPhase
from ska.server import create_app
from ska.store import Workbench

ADMIN = "adm-secret"

BOOK = """# One

## A
alpha beta gamma delta

## B
epsilon zeta eta theta
"""

S1 = "tb.c01.s01"
S2 = "tb.c01.s02"


def auth(token):
    return {"Authorization": f"Bearer {token}"}


def make_env():
    """Fresh empty workbench behind a test client."""
    bench = Workbench()
    app = create_app(bench, admin_token=ADMIN)
    return bench, TestClient(app)


def seed_corpus(client):
    """Book, three annotators, qualification; returns annotator tokens."""
    r = client.post(
        "/textbooks",
        json={"text": BOOK, "textbook_id": "tb", "min_section_chars": 1},
        headers=auth(ADMIN),
    )
    assert r.status_code == 201, r.text
    tokens = {}
    for aid in ("a1", "a2", "a3"):
        r = client.post("/annotators", json={"id": aid}, headers=auth(ADMIN))
        assert r.status_code == 201
        tokens[aid] = r.json()["token"]
    r = client.post(
        "/qualification",
        json={"gold_section_id": S1, "concepts": ["alpha", "beta"]},
        headers=auth(ADMIN),
    )
    assert r.status_code == 201
    for aid, token in tokens.items():
        r = client.post(
            f"/annotators/{aid}/qualify",
            json={"concepts": ["alpha", "beta"]},
            headers=auth(token),
        )
        assert r.status_code == 200 and r.json()["passed"]
    return tokens


def spans(*triples):
    return [{"section_id": s, "start": a, "end": b} for s, a, b in triples]


class TestAuth:
    def test_healthz_needs_no_token(self):
        _, client = make_env()
        r = client.get("/healthz")
        assert r.status_code == 200 and r.json() == {"status": "ok"}

    def test_missing_token_rejected(self):
        _, client = make_env()
        r = client.get("/rounds")
        assert r.status_code == 403
        assert r.json()["error"]["type"] == "AuthorizationError"

    def test_unknown_token_rejected(self):
        _, client = make_env()
        r = client.get("/rounds", headers=auth("nope"))
        assert r.status_code == 403

    def test_non_bearer_scheme_rejected(self):
        _, client = make_env()
        r = client.get("/rounds", headers={"Authorization": f"Basic {ADMIN}"})
        assert r.status_code == 403

    def test_annotator_cannot_use_admin_routes(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        for route, payload in [
            ("/textbooks", {"text": BOOK}),
            ("/annotators", {"id": "a4"}),
            ("/qualification", {"gold_section_id": S1, "concepts": ["x"]}),
            ("/rounds", {"chapter_id": "tb.c01"}),
        ]:
            r = client.post(route, json=payload, headers=auth(tokens["a1"]))
            assert r.status_code == 403, route

    def test_admin_submission_must_name_annotator(self):
        _, client = make_env()
        seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": []},
            headers=auth(ADMIN),
        )
        assert r.status_code == 422
        assert "name the annotator" in r.json()["error"]["message"]

    def test_annotator_cannot_act_as_peer(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": [], "annotator_id": "a2"},
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 403

    def test_review_listing_is_private_to_the_reviewer(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.get(f"/rounds/{rid}/review/a1", headers=auth(tokens["a2"]))
        assert r.status_code == 403
        # the admin may inspect anyone's queue; phase guard fires instead
        r = client.get(f"/rounds/{rid}/review/a1", headers=auth(ADMIN))
        assert r.status_code == 409

    def test_qualification_answers_stay_hidden(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        r = client.get("/qualification", headers=auth(tokens["a1"]))
        assert r.status_code == 200
        assert "concepts" not in r.json() and "gold_concepts" not in r.json()


class TestErrorMapping:
    def test_unknown_round_is_404(self):
        _, client = make_env()
        seed_corpus(client)
        r = client.get("/rounds/r99", headers=auth(ADMIN))
        assert r.status_code == 404
        body = r.json()
        assert body["error"]["type"] == "NotFoundError"
        assert "r99" in body["error"]["message"]

    def test_unknown_submit_phase_is_404(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        r = client.post(
            "/rounds/r1/submit/lunch",
            json={"annotations": []},
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 404

    def test_wrong_phase_submission_is_409(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/missed_review",
            json={"decisions": []},
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 409
        assert r.json()["error"]["type"] == "PhaseError"

    def test_double_submission_is_409(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        payload = {"annotations": spans((S1, 0, 5))}
        assert (
            client.post(
                f"/rounds/{rid}/submit/annotating",
                json=payload,
                headers=auth(tokens["a1"]),
            ).status_code
            == 200
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json=payload,
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 409
        assert r.json()["error"]["type"] == "ConflictError"

    def test_malformed_json_body_is_422(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            content=b"{not json",
            headers={**auth(tokens["a1"]), "Content-Type": "application/json"},
        )
        assert r.status_code == 422
        assert r.json()["error"]["type"] == "ValidationError"

    def test_non_object_body_is_422(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json=[1, 2, 3],
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 422

    def test_missing_field_is_422(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": [{"section_id": S1, "start": 0}]},
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 422

    def test_unknown_verdict_is_422(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        r = client.post(
            f"/rounds/{rid}/review/a1",
            json={
                "decisions": [
                    {"section_id": S1, "concept": "x", "verdict": "maybe"}
                ]
            },
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 422
        assert "maybe" in r.json()["error"]["message"]

    def test_bad_agreement_phase_is_422(self):
        _, client = make_env()
        seed_corpus(client)
        client.post("/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN))
        r = client.get("/rounds/r1/agreement?phase=mid", headers=auth(ADMIN))
        assert r.status_code == 422

    def test_bad_stats_range_is_422(self):
        _, client = make_env()
        seed_corpus(client)
        r = client.get("/stats/table?rounds=1,x", headers=auth(ADMIN))
        assert r.status_code == 422

    def test_convergence_without_closed_rounds_is_404(self):
        _, client = make_env()
        seed_corpus(client)
        r = client.get("/codebook/convergence", headers=auth(ADMIN))
        assert r.status_code == 404
        assert r.json()["error"]["type"] == "EmptyRangeError"

    def test_incomplete_agreement_is_409(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        rid = (
            client.post(
                "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
            )
            .json()["id"]
        )
        client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5))},
            headers=auth(tokens["a1"]),
        )
        r = client.get(
            f"/rounds/{rid}/agreement?phase=before_discussion", headers=auth(ADMIN)
        )
        assert r.status_code == 409
        assert r.json()["error"]["type"] == "IncompleteDataError"


@pytest.fixture(scope="class")
def flow():
    """The full protocol driven over HTTP, state captured along the way."""
    _, client = make_env()
    tokens = seed_corpus(client)
    captured = {"client": client, "tokens": tokens, "versions": []}

    def check(resp, expect=200):
        assert resp.status_code == expect, resp.text
        body = resp.json()
        if isinstance(body, dict) and "version" in body:
            captured["versions"].append(body["version"])
        return body

    rid = check(
        client.post("/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)),
        201,
    )["id"]
    captured["round_id"] = rid

    check(
        client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5), (S1, 6, 10), (S2, 0, 7))},
            headers=auth(tokens["a1"]),
        )
    )
    check(
        client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5), (S2, 0, 7), (S2, 8, 12))},
            headers=auth(tokens["a2"]),
        )
    )
    body = check(
        client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5), (S2, 0, 7))},
            headers=auth(tokens["a3"]),
        )
    )
    assert body["phase"] == "missed_review"

    captured["candidates_a3"] = check(
        client.get(f"/rounds/{rid}/review/a3", headers=auth(tokens["a3"]))
    )
    check(
        client.post(
            f"/rounds/{rid}/review/a1",
            json={
                "decisions": [
                    {
                        "section_id": S2,
                        "concept": "zeta",
                        "verdict": "accept",
                        "start": 8,
                        "end": 12,
                    }
                ]
            },
            headers=auth(tokens["a1"]),
        )
    )
    check(
        client.post(
            f"/rounds/{rid}/review/a2",
            json={
                "decisions": [
                    {
                        "section_id": S1,
                        "concept": "beta",
                        "verdict": "reject",
                        "rationale": "ordinary word",
                    }
                ]
            },
            headers=auth(tokens["a2"]),
        )
    )
    body = check(
        client.post(
            f"/rounds/{rid}/submit/missed_review",
            json={
                "decisions": [
                    {"section_id": S1, "concept": "beta", "verdict": "reject"},
                    {"section_id": S2, "concept": "zeta", "verdict": "reject"},
                ]
            },
            headers=auth(tokens["a3"]),
        )
    )
    assert body["phase"] == "discussion"

    captured["disagreements"] = check(
        client.get(f"/rounds/{rid}/disagreements", headers=auth(tokens["a1"]))
    )
    body = check(
        client.post(
            f"/rounds/{rid}/resolutions",
            json={
                "resolutions": [
                    {"section_id": S1, "concept": "beta", "outcome": "drop"},
                    {"section_id": S2, "concept": "zeta", "outcome": "promote"},
                ]
            },
            headers=auth(tokens["a1"]),
        )
    )
    assert body["phase"] == "codebook_update"

    body = check(
        client.post(
            f"/rounds/{rid}/close",
            json={
                "changes": [
                    {
                        "action": "add",
                        "text": "Tag single named entities, skip ordinary nouns.",
                        "examples": [["zeta", "kept after group discussion"]],
                    }
                ]
            },
            headers=auth(tokens["a1"]),
        )
    )
    assert body["phase"] == "closed"
    return captured


class TestFullFlow:
    def test_versions_strictly_increase(self, flow):
        versions = flow["versions"]
        assert all(b > a for a, b in zip(versions, versions[1:]))

    def test_candidate_listing(self, flow):
        assert flow["candidates_a3"] == [
            {
                "section_id": S1,
                "concept": "beta",
                "gram_length": 1,
                "tagged_by": ["a1"],
            },
            {
                "section_id": S2,
                "concept": "zeta",
                "gram_length": 1,
                "tagged_by": ["a2"],
            },
        ]

    def test_disagreement_listing(self, flow):
        assert flow["disagreements"] == [
            {
                "section_id": S1,
                "concept": "beta",
                "gram_length": 1,
                "tagged_by": ["a1"],
                "support": 1,
            },
            {
                "section_id": S2,
                "concept": "zeta",
                "gram_length": 1,
                "tagged_by": ["a1", "a2"],
                "support": 2,
            },
        ]

    def test_agreement_before_and_after(self, flow):
        client, rid = flow["client"], flow["round_id"]
        before = client.get(
            f"/rounds/{rid}/agreement?phase=before_discussion", headers=auth(ADMIN)
        ).json()
        assert before["phase_label"] == "before_discussion"
        assert before["mean_pairwise"] == pytest.approx(2 / 3)
        assert before["full_consensus_fraction"] == pytest.approx(0.5)
        assert len(before["sections"]) == 2
        after = client.get(f"/rounds/{rid}/agreement", headers=auth(ADMIN)).json()
        assert after["phase_label"] == "after_discussion"
        assert after["mean_pairwise"] == pytest.approx(1.0)
        assert after["full_consensus_fraction"] == pytest.approx(1.0)

    def test_codebook_and_convergence(self, flow):
        client = flow["client"]
        rules = client.get("/codebook", headers=auth(ADMIN)).json()["rules"]
        assert [r["id"] for r in rules] == ["r01"]
        assert rules[0]["round_introduced"] == 1
        conv = client.get("/codebook/convergence", headers=auth(ADMIN)).json()
        assert conv == {"additions": [[1, 1]], "converged_at": None}

    def test_stats_table(self, flow):
        client = flow["client"]
        table = client.get("/stats/table", headers=auth(ADMIN)).json()
        assert table["occurrences_before"]["total"] == 2
        assert table["unique_before"]["total"] == 2
        assert table["occurrences_after"]["total"] == 3
        assert table["unique_after"]["total"] == 3
        ones = table["occurrences_after"]["buckets"]["1"]
        assert ones == {"count": 3, "percent": "100.00%"}

    def test_export_is_deterministic_and_tokenless(self, flow):
        client = flow["client"]
        one = client.get("/export", headers=auth(ADMIN))
        two = client.get("/export", headers=auth(ADMIN))
        assert one.content == two.content
        doc = json.loads(one.content)
        assert "tokens" not in doc
        assert doc["schema_version"] == serialize.SCHEMA_VERSION

    def test_text_free_export(self, flow):
        client = flow["client"]
        r = client.get(
            "/export?include_text=false&phase=after_discussion", headers=auth(ADMIN)
        )
        doc = json.loads(r.content)
        assert doc["document_type"] == "concept_lists"
        got = {
            (s["section_id"], c["value"])
            for s in doc["sections"]
            for c in s["concepts"]
        }
        assert got == {(S1, "alpha"), (S2, "epsilon"), (S2, "zeta")}

    def test_validate_reports_clean(self, flow):
        client = flow["client"]
        body = client.get("/validate", headers=auth(ADMIN)).json()
        assert body == {"ok": True, "problems": []}

    def test_closed_round_rejects_more_work(self, flow):
        client, rid, tokens = flow["client"], flow["round_id"], flow["tokens"]
        r = client.post(
            f"/rounds/{rid}/close", json={}, headers=auth(tokens["a1"])
        )
        assert r.status_code == 409


class TestVersionGuard:
    def test_stale_version_conflicts(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        created = client.post(
            "/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN)
        ).json()
        rid, v0 = created["id"], created["version"]
        r = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5)), "round_version": v0},
            headers=auth(tokens["a1"]),
        )
        assert r.status_code == 200
        stale = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={"annotations": spans((S1, 0, 5)), "round_version": v0},
            headers=auth(tokens["a2"]),
        )
        assert stale.status_code == 409
        assert "version" in stale.json()["error"]["message"]
        current = client.get(f"/rounds/{rid}", headers=auth(tokens["a2"])).json()
        retry = client.post(
            f"/rounds/{rid}/submit/annotating",
            json={
                "annotations": spans((S1, 0, 5)),
                "round_version": current["version"],
            },
            headers=auth(tokens["a2"]),
        )
        assert retry.status_code == 200


class TestImportExport:
    def test_import_restores_an_export(self):
        bench = build_random_state(31)
        app = create_app(bench, admin_token=ADMIN)
        client = TestClient(app)
        exported = client.get("/export", headers=auth(ADMIN)).content

        _, fresh = make_env()
        r = fresh.post(
            "/import",
            content=exported,
            headers={**auth(ADMIN), "Content-Type": "application/json"},
        )
        assert r.status_code == 200
        body = r.json()
        assert body["rounds"] == len(bench.rounds)
        assert body["annotations"] == len(bench.annotations)
        again = fresh.get("/export", headers=auth(ADMIN)).content
        assert again == exported

    def test_import_requires_admin(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        r = client.post("/import", json={}, headers=auth(tokens["a1"]))
        assert r.status_code == 403

    def test_concept_list_document_rejected(self):
        rng = random.Random(17)
        bench = build_bench(rng, n_chapters=1)
        drive_round(bench, rng, "tb.c01")
        app = create_app(bench, admin_token=ADMIN)
        client = TestClient(app)
        lists = client.get("/export?include_text=false", headers=auth(ADMIN)).content
        r = client.post(
            "/import",
            content=lists,
            headers={**auth(ADMIN), "Content-Type": "application/json"},
        )
        assert r.status_code == 422

    def test_import_keeps_existing_tokens(self):
        _, client = make_env()
        tokens = seed_corpus(client)
        exported = client.get("/export", headers=auth(ADMIN)).content
        r = client.post(
            "/import",
            content=exported,
            headers={**auth(ADMIN), "Content-Type": "application/json"},
        )
        assert r.status_code == 200
        # annotator tokens issued before the import still authenticate
        r = client.get("/rounds", headers=auth(tokens["a1"]))
        assert r.status_code == 200


class TestPersistence:
    def test_mutations_reach_the_database(self, tmp_path):
        db = Database(tmp_path / "w.db")
        bench = Workbench()
        client = TestClient(create_app(bench, admin_token=ADMIN, database=db))
        seed_corpus(client)
        client.post("/rounds", json={"chapter_id": "tb.c01"}, headers=auth(ADMIN))

        restored = db.load()
        assert restored is not None
        assert set(restored.annotators) == {"a1", "a2", "a3"}
        assert restored.round_order == ["r1"]
        # tokens persist, so a restarted server still honors them
        assert set(restored.tokens.values()) == {"a1", "a2", "a3"}

    def test_reads_do_not_write(self, tmp_path):
        db = Database(tmp_path / "w.db")
        client = TestClient(create_app(Workbench(), admin_token=ADMIN, database=db))
        client.get("/rounds", headers=auth(ADMIN))
        assert db.load() is None
