"""HTTP service endpoints through the ASGI test client."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from bevtrack.service.app import create_app
from scenarios import build, clean_spec


@pytest.fixture()
def client():
    return TestClient(create_app())


def bev_detection(frame, sensor, x, y):
    return {"frame": frame, "sensor": sensor, "kind": "bev",
            "z": [x, y], "cov": [0.2, 0.0, 0.0, 0.2], "confidence": 0.9,
            "class": "pedestrian"}


def straight_batch(n_frames):
    dets = []
    for f in range(n_frames):
        dets.append(bev_detection(f, "s1", 0.5 * f, 0.0))
        dets.append(bev_detection(f, "s2", 0.5 * f, 0.0))
    return dets


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_track_one_shot(client):
    r = client.post("/track", json={"detections": straight_batch(8),
                                    "calibration": []})
    assert r.status_code == 200
    body = r.json()
    assert body["manifest"]["n_frames"] == 8
    assert body["tracks"]
    ids = {t["id"] for t in body["tracks"]}
    assert len(ids) == 1


def test_track_with_camera_calibration(client):
    spec = clean_spec(n_frames=6, targets=2)
    _, rows, _ = build(spec, seed=1)
    from bevtrack import pipeline
    from bevtrack.sim import generate_scenario
    scenario = generate_scenario(spec, 1)
    calib = pipeline.calibration_entries_from_scenario(scenario)
    r = client.post("/track", json={"detections": rows, "calibration": calib})
    assert r.status_code == 200
    assert r.json()["tracks"]


def test_track_rejects_bad_config(client):
    r = client.post("/track", json={"detections": [], "calibration": [],
                                    "config": {"tracking": {"bogus": 1}}})
    assert r.status_code == 422


def test_session_streaming_matches_batch(client):
    batch = straight_batch(8)
    one_shot = client.post("/track", json={"detections": batch,
                                           "calibration": []}).json()["tracks"]
    r = client.post("/sessions", json={"calibration": []})
    assert r.status_code == 200
    sid = r.json()["session_id"]
    streamed = []
    for f in range(8):
        dets = [d for d in batch if d["frame"] == f]
        rr = client.post(f"/sessions/{sid}/frames",
                         json={"frame": f, "detections": dets})
        assert rr.status_code == 200
        streamed.extend(rr.json()["tracks"])
    assert streamed == one_shot

    info = client.get(f"/sessions/{sid}").json()
    assert info["frames_processed"] == 8
    assert info["active_tracks"] == 1

    assert client.delete(f"/sessions/{sid}").status_code == 200
    assert client.get(f"/sessions/{sid}").status_code == 404


def test_session_rejects_out_of_order_frames(client):
    sid = client.post("/sessions", json={"calibration": []}).json()["session_id"]
    assert client.post(f"/sessions/{sid}/frames",
                       json={"frame": 3, "detections": []}).status_code == 200
    assert client.post(f"/sessions/{sid}/frames",
                       json={"frame": 2, "detections": []}).status_code == 422


def test_evaluate_endpoint(client):
    tracks = [{"frame": f, "id": 1, "x": 0.5 * f, "y": 0.0, "vx": 1.0, "vy": 0.0,
               "cov": [0.5, 0.0, 0.0, 0.5], "mode": 2, "state": "confirmed"}
              for f in range(6)]
    gt = [{"frame": f, "gt_id": 9, "x": 0.5 * f, "y": 0.0} for f in range(6)]
    r = client.post("/evaluate", json={"tracks": tracks, "gt": gt})
    assert r.status_code == 200
    body = r.json()
    assert body["MOTA"] == 100.0
    assert body["IDF1"] == 100.0
    assert body["NEES"]["verdict"] == "CONSERVATIVE"


def test_evaluate_endpoint_rejects_empty_gt(client):
    tracks = [{"frame": 0, "id": 1, "x": 0.0, "y": 0.0, "vx": 0.0, "vy": 0.0,
               "cov": [1.0, 0.0, 0.0, 1.0], "mode": 2, "state": "confirmed"}]
    r = client.post("/evaluate", json={"tracks": tracks, "gt": []})
    assert r.status_code == 400


def test_simulate_endpoint(client):
    spec = clean_spec(n_frames=5, targets=2)
    r = client.post("/simulate", json={"spec": spec, "seed": 7})
    assert r.status_code == 200
    body = r.json()
    assert body["gt"]
    assert body["detections"]
    assert len(body["calibration"]) == 6
    again = client.post("/simulate", json={"spec": spec, "seed": 7}).json()
    assert again == body


def test_calibrate_nees_endpoint(client):
    tracks = [{"frame": f, "id": 1, "x": 0.5 * f, "y": 0.0, "vx": 1.0, "vy": 0.0,
               "cov": [0.5, 0.0, 0.0, 0.5], "mode": 2, "state": "confirmed"}
              for f in range(20)]
    gt = [{"frame": f, "gt_id": 9, "x": 0.5 * f, "y": 0.0} for f in range(20)]
    r = client.post("/calibrate-nees", json={"tracks": tracks, "gt": gt})
    assert r.status_code == 200
    assert r.json()["verdict"] == "CONSERVATIVE"
