import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from opresponse import bayes, logistic, pipeline
from opresponse.errors import ContractError, InputError
from opresponse.evidence import predict_payload, resolve_evidence, whatif_payload
from opresponse.service.app import create_app, load_snapshot, snapshot_from_models
from opresponse.sessions import FeatureVector, Group, Scenario


def synthetic_vectors(n=80, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        g = Group(f"G{rng.integers(1, 5)}")
        s = Scenario(f"S{rng.integers(1, 4)}")
        alarms = int(rng.poisson(2 + 3 * (s.code - 1)))
        p = 1 / (1 + np.exp(-(-3.0 + 1.3 * (s.code - 1) + 0.3 * alarms)))
        err = bool(rng.random() < p)
        out.append(FeatureVector(
            participant_id=f"P{i:03d}", group=g, scenario=s,
            reaction_time_s=float(rng.gamma(3, 40)),
            response_time_s=float(rng.gamma(3, 80) + (150 if err else 0)),
            recovery_time_s=None if s is Scenario.S3 else float(rng.gamma(3, 60)),
            accuracy_mse=float(rng.exponential(2.0)),
            alarms_silenced=int(rng.poisson(2)),
            acknowledgements=int(rng.poisson(3)),
            mimics_opened=int(rng.poisson(4)),
            procedures_opened=int(rng.poisson(2)) if g.has_procedure_tracking else None,
            num_alarms=alarms, consequence=int(rng.integers(1, 6)), error=err,
        ))
    return out


@pytest.fixture(scope="module")
def trained():
    table = pipeline.build_table(synthetic_vectors())
    bn = pipeline.train_bn(table, "tan")
    lr = pipeline.train_lr(table, "lr", "aic")
    return table, bn, lr


@pytest.fixture()
def client(trained):
    _, bn, lr = trained
    app = create_app(snapshot=snapshot_from_models(bn, lr))
    return TestClient(app)


class TestEvidenceResolution:
    def test_label_and_index_are_equivalent(self, trained):
        _, bn, _ = trained
        by_label = resolve_evidence(bn, {"scenario": "S3"})
        by_index = resolve_evidence(bn, {"scenario": 2})
        assert by_label.states == by_index.states == {"scenario": 2}

    def test_raw_value_equals_pre_discretized_state(self, trained):
        _, bn, _ = trained
        name = next(n for n in bn.cuts if bn.cuts[n])
        cut = bn.cuts[name][0]
        raw = resolve_evidence(bn, raw={name: cut - 1e-6})
        assert raw.states[name] == 0
        direct = predict_payload(bn, evidence={name: 0})
        via_raw = predict_payload(bn, raw={name: cut - 1e-6})
        assert via_raw["p_error"] == direct["p_error"]

    def test_unknown_feature_rejected(self, trained):
        _, bn, _ = trained
        with pytest.raises(ContractError):
            resolve_evidence(bn, {"nonsense": 0})

    def test_non_finite_raw_rejected(self, trained):
        _, bn, _ = trained
        name = next(n for n in bn.cuts if bn.cuts[n])
        with pytest.raises(InputError):
            resolve_evidence(bn, raw={name: float("nan")})

    def test_overlapping_channels_rejected(self, trained):
        _, bn, _ = trained
        name = next(n for n in bn.cuts if bn.cuts[n])
        with pytest.raises(ContractError):
            resolve_evidence(bn, {name: 0}, {name: 1.0})

    def test_missing_features_listed_not_guessed(self, trained):
        _, bn, _ = trained
        resolved = resolve_evidence(bn, {"scenario": 0})
        assert "scenario" not in resolved.missing
        assert set(resolved.missing) == set(bn.feature_names()) - {"scenario"}


class TestHealthAndSummary:
    def test_health_reports_loaded_model(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["model_loaded"] is True
        assert body["lr_loaded"] is True

    def test_unloaded_service_returns_503(self):
        app = create_app()
        c = TestClient(app)
        assert c.get("/model").status_code == 503
        assert c.post("/predict", json={}).status_code == 503

    def test_summary_lists_features_without_cpts(self, client, trained):
        _, bn, _ = trained
        body = client.get("/model").json()
        assert {f["name"] for f in body["features"]} == set(bn.feature_names())
        assert "cpts" not in body
        assert body["root"] == bn.root

    def test_summary_prior_matches_model(self, client, trained):
        _, bn, _ = trained
        body = client.get("/model").json()
        assert body["prior"] == pytest.approx(bn.prior.tolist())

    def test_cpts_on_request(self, client):
        body = client.get("/model", params={"include_cpts": "true"}).json()
        assert body["cpts"]


class TestPredict:
    def test_empty_body_returns_prior(self, client, trained):
        _, bn, _ = trained
        body = client.post("/predict", json={}).json()
        assert body["p_error"] == pytest.approx(float(bn.prior[1]), abs=1e-12)
        assert set(body["missing_features"]) == set(bn.feature_names())

    def test_full_evidence_matches_library_inference(self, client, trained):
        _, bn, _ = trained
        rng = np.random.default_rng(1)
        for _ in range(10):
            evidence = {
                nd.name: int(rng.integers(0, nd.n_states)) for nd in bn.nodes
            }
            want = predict_payload(bn, evidence)
            got = client.post("/predict", json={"evidence": evidence}).json()
            assert got["p_error"] == want["p_error"]
            assert got["missing_features"] == []

    def test_out_of_range_state_is_400(self, client):
        response = client.post("/predict", json={"evidence": {"scenario": 99}})
        assert response.status_code == 400

    def test_non_finite_raw_is_422(self, client, trained):
        _, bn, _ = trained
        name = next(n for n in bn.cuts if bn.cuts[n])
        response = client.post(
            "/predict", content=json.dumps({"raw": {name: float("nan")}}),
            headers={"content-type": "application/json"},
        )
        assert response.status_code == 422

    def test_model_version_echoed(self, client):
        a = client.post("/predict", json={}).json()["model_version"]
        b = client.get("/model").json()["model_version"]
        assert a == b

    def test_predict_is_idempotent(self, client, trained):
        _, bn, _ = trained
        body = {"evidence": {"scenario": 1, "group": 2}}
        first = client.post("/predict", json=body).json()
        second = client.post("/predict", json=body).json()
        assert first == second


class TestWhatif:
    def test_empty_overrides_empty_results(self, client):
        body = client.post("/whatif", json={"evidence": {}, "overrides": []}).json()
        assert body["results"] == []

    def test_override_of_observed_state_has_zero_delta(self, client):
        body = client.post(
            "/whatif",
            json={
                "evidence": {"scenario": 1},
                "overrides": [{"feature": "scenario", "state": 1}],
            },
        ).json()
        assert body["results"][0]["delta_vs_base"] == pytest.approx(0.0, abs=1e-15)

    def test_deltas_match_direct_predictions(self, client, trained):
        _, bn, _ = trained
        base_evidence = {"group": 0}
        overrides = [{"feature": "scenario", "state": s} for s in range(3)]
        body = client.post(
            "/whatif", json={"evidence": base_evidence, "overrides": overrides}
        ).json()
        want = whatif_payload(bn, base_evidence, None, overrides)
        assert body["base_p_error"] == want["base_p_error"]
        for got_r, want_r in zip(body["results"], want["results"]):
            assert got_r["p_error"] == want_r["p_error"]
            assert got_r["delta_vs_base"] == want_r["delta_vs_base"]

    def test_override_posterior_matches_brute_force(self, client, trained):
        from oracles import brute_posterior

        _, bn, _ = trained
        base_evidence = {"group": 1}
        top = bn.node("num_alarms" if "num_alarms" in bn.feature_names() else
                      bn.feature_names()[0])
        override = {"feature": top.name, "state": top.n_states - 1}
        body = client.post(
            "/whatif", json={"evidence": base_evidence, "overrides": [override]}
        ).json()
        variant = {"group": 1, top.name: top.n_states - 1}
        want = float(brute_posterior(bn, variant)[1])
        assert body["results"][0]["p_error"] == pytest.approx(want, abs=1e-12)

    def test_scenario_override_moves_risk_upward(self, client):
        # flood scenario carries more failures than the easy one by design
        body = client.post(
            "/whatif",
            json={"evidence": {}, "overrides": [
                {"feature": "scenario", "state": 0},
                {"feature": "scenario", "state": 2},
            ]},
        ).json()
        easy, flood = body["results"][0], body["results"][1]
        assert flood["p_error"] > easy["p_error"]


class TestPredictLr:
    def test_requires_all_selected_features(self, client, trained):
        _, _, lr = trained
        response = client.post("/predict-lr", json={"values": {}})
        assert response.status_code == 400

    def test_matches_library_prediction(self, client, trained):
        _, _, lr = trained
        row = {name: 1.0 for name in lr.feature_names}
        body = client.post("/predict-lr", json={"values": row}).json()
        assert body["p_error"] == logistic.predict_proba(lr, row)

    def test_503_without_lr_model(self, trained):
        _, bn, _ = trained
        app = create_app(snapshot=snapshot_from_models(bn))
        c = TestClient(app)
        assert c.post("/predict-lr", json={"values": {}}).status_code == 503


class TestReload:
    def test_reload_swaps_version_atomically(self, trained, tmp_path):
        table, bn, _ = trained
        app = create_app(snapshot=snapshot_from_models(bn))
        c = TestClient(app)
        old_version = c.get("/model").json()["model_version"]

        nb = pipeline.train_bn(table, "nb")
        path = tmp_path / "nb.json"
        path.write_text(bayes.model_to_json(nb))
        body = c.post("/reload", json={"model_path": str(path)}).json()
        assert body["model_version"] != old_version
        assert c.get("/model").json()["kind"] == "nb"

    def test_reload_with_bad_path_is_400_and_keeps_old_model(self, trained):
        _, bn, _ = trained
        app = create_app(snapshot=snapshot_from_models(bn))
        c = TestClient(app)
        old_version = c.get("/model").json()["model_version"]
        assert c.post("/reload", json={"model_path": "/nope.json"}).status_code == 400
        assert c.get("/model").json()["model_version"] == old_version


class TestSnapshotLoad:
    def test_load_snapshot_from_files(self, trained, tmp_path):
        _, bn, lr = trained
        mp = tmp_path / "m.json"
        lp = tmp_path / "lr.json"
        mp.write_text(bayes.model_to_json(bn))
        lp.write_text(logistic.model_to_json(lr))
        snap = load_snapshot(mp, lp)
        assert snap.model.kind == bn.kind
        assert snap.lr_model is not None
