"""Regenerate the console's scripted-query fixtures from a live service.

Builds a small seeded benchmark, serves it in process, replays a fixed set
of scripted retrieval requests, and records each request/response pair as
JSON. The console's vitest suite replays these pairs against the rendering
layer, so the fixtures are real API payloads, not hand-written mocks.

Usage: python3 frontend/scripts/generate_fixtures.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from crest.artifacts import export_benchmark, load_bundle
from crest.benchmark import BenchmarkConfig, prepare_benchmark
from crest.service import create_app

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CONFIG = BenchmarkConfig(
    n_trs=60, val_size=15, test_size=15, dim=1024, missing_criterion_rate=0.1
)


def scripted_requests(artifacts):
    """Twenty deterministic retrieval requests over the benchmark corpus."""
    test_ids = list(artifacts.split.test)
    val_ids = list(artifacts.split.validation)
    chosen = (test_ids + val_ids)[:16]
    requests = []
    for i, tr_id in enumerate(chosen):
        tr = artifacts.by_id[tr_id]
        body = {"headline": tr.headline, "observation_raw": tr.observation.raw}
        if i == 4:
            body["active"] = ["impact"]
        elif i == 7:
            body["active"] = ["condition", "frequency"]
        elif i == 10:
            body["k"] = 12
            body["max_results"] = 5
        elif i == 13:
            body["rerank"] = False
        requests.append({"name": f"corpus-{tr_id}", "body": body})

    # 17: headline only — no observation text, so the base query alone runs.
    requests.append(
        {
            "name": "headline-only",
            "body": {"headline": "checkout fails for large carts"},
        }
    )
    # 18: messy observation with diagnostics-worthy structure.
    messy = (
        "imported from the legacy tracker\n"
        "Description:\nsearch page renders blank after login\n\n"
        "System impact: search unusable Condition: compact layout enabled\n\n"
        "Frequency:\nroughly one session in ten\n\n"
        "Frequency:\nhourly on staging"
    )
    requests.append(
        {
            "name": "messy-observation",
            "body": {"headline": "blank search page", "observation_raw": messy},
        }
    )
    # 19: explicit three-criterion subset.
    tr = artifacts.by_id[chosen[2]]
    requests.append(
        {
            "name": "three-active",
            "body": {
                "headline": tr.headline,
                "observation_raw": tr.observation.raw,
                "active": ["impact", "condition", "reproducibility"],
            },
        }
    )
    # 20: small K with a small result cap.
    tr = artifacts.by_id[chosen[3]]
    requests.append(
        {
            "name": "small-k",
            "body": {
                "headline": tr.headline,
                "observation_raw": tr.observation.raw,
                "k": 8,
                "max_results": 3,
            },
        }
    )
    return requests


def toggle_pairs(artifacts):
    """Request pairs: the full ensemble, then the same query with one
    criterion switched off — what the console sends when a bar is toggled."""
    pairs = []
    for tr_id, removed in zip(artifacts.split.test[:3], ("impact", "condition", "frequency")):
        tr = artifacts.by_id[tr_id]
        base = {"headline": tr.headline, "observation_raw": tr.observation.raw}
        all_active = ["impact", "condition", "frequency", "reproducibility"]
        pairs.append(
            {
                "name": f"toggle-{tr_id}-{removed}",
                "removed": removed,
                "full": {**base, "active": all_active},
                "reduced": {**base, "active": [c for c in all_active if c != removed]},
            }
        )
    return pairs


def main():
    with tempfile.TemporaryDirectory() as tmp:
        run_dir = Path(tmp) / "run"
        artifacts = prepare_benchmark(CONFIG)
        export_benchmark(artifacts, run_dir)
        app = create_app(load_bundle(run_dir))
        client = TestClient(app)

        scripted = []
        for request in scripted_requests(artifacts):
            response = client.post("/v1/retrieve", json=request["body"])
            assert response.status_code == 200, (request["name"], response.text)
            scripted.append(
                {
                    "name": request["name"],
                    "request": request["body"],
                    "response": response.json(),
                }
            )
        assert len(scripted) == 20

        paired = []
        for pair in toggle_pairs(artifacts):
            full = client.post("/v1/retrieve", json=pair["full"])
            reduced = client.post("/v1/retrieve", json=pair["reduced"])
            assert full.status_code == 200 and reduced.status_code == 200
            paired.append(
                {
                    "name": pair["name"],
                    "removed": pair["removed"],
                    "full": {"request": pair["full"], "response": full.json()},
                    "reduced": {
                        "request": pair["reduced"],
                        "response": reduced.json(),
                    },
                }
            )

        errors = {}
        bad_criterion = client.post(
            "/v1/retrieve",
            json={"headline": "x", "observation_raw": "", "active": ["urgency"]},
        )
        errors["unknown_criterion"] = {
            "status": bad_criterion.status_code,
            "body": bad_criterion.json(),
        }
        empty = client.post("/v1/retrieve", json={"headline": "", "observation_raw": ""})
        errors["empty_query"] = {"status": empty.status_code, "body": empty.json()}

        OUT.mkdir(parents=True, exist_ok=True)
        payload = {
            "scripted_queries": scripted,
            "toggle_pairs": paired,
            "error_responses": errors,
        }
        out_file = OUT / "scripted_queries.json"
        out_file.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out_file} ({len(scripted)} queries, {len(paired)} toggle pairs)")


if __name__ == "__main__":
    main()
