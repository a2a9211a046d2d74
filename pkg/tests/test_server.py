import json
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from eigenshape.apps import shape_from_spectrum
from eigenshape.server import BackgroundServer, make_server


def get(url):
    with urllib.request.urlopen(url, timeout=10) as resp:
        return resp.status, json.loads(resp.read())


def post(url, payload):
    req = urllib.request.Request(url, data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


@pytest.fixture(scope="module")
def server(mini_bundle, mini_data):
    coords, spectra = mini_data
    samples = [{"id": i, "spectrum": spectra[i, :12].tolist(),
                "coords": coords[i].tolist()} for i in range(8)]
    with BackgroundServer(mini_bundle, samples=samples) as srv:
        yield srv, mini_bundle, coords, spectra[:, :12]


def test_model_endpoint(server):
    srv, bundle, _, _ = server
    status, body = get(srv.url + "/model")
    assert status == 200
    assert body["k"] == 12 and body["latent_dim"] == 12
    assert body["template"]["n"] == 64
    assert body["normalization"]["eig_scale"] == bundle.eig_scale


def test_api_listing(server):
    srv, _, _, _ = server
    status, body = get(srv.url + "/api")
    assert status == 200
    paths = {e["path"] for e in body["endpoints"]}
    assert {"/decode", "/band", "/encode"} <= paths


def test_samples_endpoint(server):
    srv, _, _, _ = server
    status, body = get(srv.url + "/samples?n=3")
    assert status == 200
    assert len(body["samples"]) == 3
    assert body["samples"][0]["id"] == 0


def test_decode_matches_library_call(server):
    srv, bundle, _, spectra = server
    status, body = post(srv.url + "/decode", {"eigenvalues": spectra[2].tolist()})
    assert status == 200
    direct = np.asarray(shape_from_spectrum(bundle, spectra[2]).points)
    assert np.array_equal(np.asarray(body["vertices"]), direct)
    assert len(body["latent"]) == 12


def test_decode_latent_round(server):
    srv, bundle, _, spectra = server
    _, dec = post(srv.url + "/decode", {"eigenvalues": spectra[0].tolist()})
    _, via_latent = post(srv.url + "/decode-latent", {"latent": dec["latent"]})
    assert np.array_equal(np.asarray(via_latent["vertices"]),
                          np.asarray(dec["vertices"]))


def test_encode_endpoint(server):
    srv, bundle, coords, _ = server
    status, body = post(srv.url + "/encode", {"shape": {"vertices": coords[1].tolist()}})
    assert status == 200
    assert np.allclose(body["latent"], bundle.encode(coords[1]))
    assert len(body["predicted_spectrum"]) == 12


def test_band_factor_one_matches_decode(server):
    srv, _, _, spectra = server
    base = spectra[3].tolist()
    _, plain = post(srv.url + "/decode", {"eigenvalues": base})
    status, banded = post(srv.url + "/band",
                          {"base_spectrum": base, "lo": 1, "hi": 5, "factor": 1.0})
    assert status == 200
    assert np.array_equal(np.asarray(banded["vertices"]),
                          np.asarray(plain["vertices"]))
    assert banded["spectrum"] == base


def test_style_transfer_endpoint(server):
    srv, _, _, spectra = server
    status, body = post(srv.url + "/style-transfer",
                        {"spec_style": spectra[5].tolist(), "pose_sample_id": 1,
                         "steps": 5})
    assert status == 200
    assert len(body["alignment"]) == 6
    assert len(body["vertices"]) == 64


def test_missing_field_is_400_with_field_name(server):
    srv, _, _, _ = server
    status, body = post(srv.url + "/decode", {})
    assert status == 400
    assert body["field"] == "eigenvalues"


def test_wrong_bandwidth_is_400(server):
    srv, _, _, _ = server
    status, body = post(srv.url + "/decode", {"eigenvalues": [0.0, 1.0, 2.0]})
    assert status == 400
    assert "12" in body["error"]


def test_unknown_endpoint_is_404(server):
    srv, _, _, _ = server
    status, body = post(srv.url + "/nope", {})
    assert status == 404


def test_missing_bundle_returns_503():
    with BackgroundServer(None) as srv:
        req = urllib.request.Request(srv.url + "/model")
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req, timeout=5)
        assert err.value.code == 503


def test_concurrent_decode_matches_serial(server):
    srv, _, _, spectra = server
    payloads = [{"eigenvalues": spectra[i % 8].tolist()} for i in range(100)]
    serial = [post(srv.url + "/decode", p)[1]["vertices"] for p in payloads[:8]]
    with ThreadPoolExecutor(max_workers=16) as pool:
        results = list(pool.map(lambda p: post(srv.url + "/decode", p)[1]["vertices"],
                                payloads))
    for i, res in enumerate(results):
        assert np.array_equal(np.asarray(res), np.asarray(serial[i % 8]))


def test_ui_static_serving(tmp_path, mini_bundle):
    (tmp_path / "index.html").write_text("<html><body>explorer</body></html>")
    with BackgroundServer(mini_bundle, ui_dir=str(tmp_path)) as srv:
        with urllib.request.urlopen(srv.url + "/ui", timeout=5) as resp:
            assert resp.status == 200
            assert b"explorer" in resp.read()
        req = urllib.request.Request(srv.url + "/ui/../secret")
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(req, timeout=5)
        assert err.value.code == 404
