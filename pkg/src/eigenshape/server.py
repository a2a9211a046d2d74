"""Local HTTP inference service over a frozen model bundle.

Plain JSON request/response over HTTP/1.1; every endpoint is a pure
function of (bundle, body), so concurrent requests are safe: the bundle is
immutable after load. The browser explorer talks exclusively to this API
and can be served as static assets under /ui.
"""

import json
import mimetypes
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import apps
from .eigensolve import Spectrum
from .geometry import Contour, Mesh, PointCloud, ShapeFamily
from .spectral_ae import load_bundle


class ApiError(Exception):
    def __init__(self, status, message, field=None):
        super().__init__(message)
        self.status = status
        self.field = field


class ApiSession:
    """One loaded bundle plus an optional browsable sample set."""

    def __init__(self, bundle, samples=None):
        self.bundle = bundle
        self.samples = samples or []  # list of {"id", "spectrum", "coords"}

    @staticmethod
    def from_dataset_dir(bundle, data_dir, limit=64):
        """Load sample shapes + spectra from a gen-data directory."""
        data_dir = Path(data_dir)
        manifest = json.loads((data_dir / "manifest.json").read_text())
        fam = ShapeFamily.from_manifest(manifest)
        shapes = ShapeFamily.rebuild_from_manifest(manifest)[:limit]
        from .eigensolve import spectrum_of

        samples = []
        order = "cubic" if fam.kind == "blob3d" else "cubic"
        for i, shape in enumerate(shapes):
            spec = spectrum_of(shape, bundle.k, order=order)
            samples.append({
                "id": i,
                "spectrum": spec.values.tolist(),
                "coords": np.asarray(
                    getattr(shape, "vertices", getattr(shape, "points", shape))
                ).tolist(),
            })
        return ApiSession(bundle, samples)


def _require(body, key, length=None):
    if key not in body:
        raise ApiError(400, f"missing field {key!r}", field=key)
    value = body[key]
    if length is not None:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 1 or arr.size != length:
            raise ApiError(400, f"field {key!r} must be a flat list of {length} "
                                f"numbers, got shape {arr.shape}", field=key)
        return arr
    return value


def _shape_payload(shape):
    if isinstance(shape, Mesh):
        return {"vertices": shape.vertices.tolist(), "faces": shape.faces.tolist()}
    if isinstance(shape, (Contour, PointCloud)):
        return {"vertices": shape.points.tolist()}
    return {"vertices": np.asarray(shape).tolist()}


ENDPOINTS = [
    {"method": "GET", "path": "/api", "doc": "this endpoint listing"},
    {"method": "GET", "path": "/model",
     "doc": "bundle facts: k, latent_dim, template, normalization"},
    {"method": "GET", "path": "/samples?n=", "doc": "dataset samples with spectra"},
    {"method": "POST", "path": "/decode",
     "doc": "{eigenvalues: [k]} -> {vertices, latent}"},
    {"method": "POST", "path": "/decode-latent",
     "doc": "{latent: [latent_dim]} -> {vertices}"},
    {"method": "POST", "path": "/encode",
     "doc": "{shape: {vertices}} -> {latent, predicted_spectrum}"},
    {"method": "POST", "path": "/band",
     "doc": "{base_spectrum, lo, hi, factor} -> {spectrum, vertices}"},
    {"method": "POST", "path": "/style-transfer",
     "doc": "{spec_style, pose_sample_id, w, steps} -> {vertices, alignment}"},
]


def _handle(session, method, path, query, body):
    bundle = session.bundle
    if bundle is None:
        raise ApiError(503, "no bundle loaded")
    if method == "GET" and path == "/api":
        return {"endpoints": ENDPOINTS}
    if method == "GET" and path == "/model":
        template = {"n": bundle.n, "dim": bundle.dim}
        if bundle.template_faces is not None:
            template["faces"] = bundle.template_faces.tolist()
        return {
            "k": bundle.k,
            "latent_dim": bundle.latent_dim,
            "kind": bundle.kind,
            "template": template,
            "normalization": {
                "center": bundle.center.tolist(),
                "coord_scale": bundle.coord_scale,
                "eig_scale": bundle.eig_scale,
            },
        }
    if method == "GET" and path == "/samples":
        n = int(query.get("n", "16"))
        return {"samples": [
            {"id": s["id"], "spectrum": s["spectrum"]}
            for s in session.samples[:n]
        ]}
    if method == "POST" and path == "/decode":
        lam = _require(body, "eigenvalues", length=bundle.k)
        latent = bundle.spec_to_latent(lam)
        out = _shape_payload(bundle.decode(latent))
        out["latent"] = latent.tolist()
        return out
    if method == "POST" and path == "/decode-latent":
        latent = _require(body, "latent", length=bundle.latent_dim)
        return _shape_payload(bundle.decode(latent.astype(np.float32)))
    if method == "POST" and path == "/encode":
        shape = _require(body, "shape")
        if not isinstance(shape, dict) or "vertices" not in shape:
            raise ApiError(400, "field 'shape' must be {vertices: [[...]...]}",
                           field="shape")
        coords = np.asarray(shape["vertices"], dtype=np.float64)
        latent = bundle.encode(coords)
        out = {"latent": latent.tolist()}
        if bundle.with_inverse:
            out["predicted_spectrum"] = bundle.latent_to_spec(latent).tolist()
        return out
    if method == "POST" and path == "/band":
        lam = _require(body, "base_spectrum", length=bundle.k)
        lo = int(_require(body, "lo"))
        hi = int(_require(body, "hi"))
        factor = float(_require(body, "factor"))
        spec = apps.band_modify(Spectrum(np.sort(lam), "request"), lo, hi, factor)
        out = _shape_payload(apps.shape_from_spectrum(bundle, spec))
        out["spectrum"] = spec.values.tolist()
        return out
    if method == "POST" and path == "/style-transfer":
        lam = _require(body, "spec_style", length=bundle.k)
        sample_id = int(_require(body, "pose_sample_id"))
        matches = [s for s in session.samples if s["id"] == sample_id]
        if not matches:
            raise ApiError(400, f"unknown pose_sample_id {sample_id}",
                           field="pose_sample_id")
        pose_coords = np.asarray(matches[0]["coords"])
        cfg = apps.StyleTransferConfig(
            w=float(body.get("w", 1e-2)),
            steps=int(body.get("steps", 200)),
            lr=float(body.get("lr", 1e-2)),
        )
        res = apps.style_transfer(bundle, np.sort(lam), pose_coords, cfg)
        out = _shape_payload(res.shape)
        out["alignment"] = [float(a) for a in res.alignment]
        out["predicted_spectrum"] = res.predicted_spectrum.tolist()
        return out
    raise ApiError(404, f"no endpoint {method} {path}")


class _Handler(BaseHTTPRequestHandler):
    session = None
    ui_dir = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status, payload, content_type="application/json"):
        body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", self._cors_origin())
        self.end_headers()
        self.wfile.write(body)

    def _cors_origin(self):
        origin = self.headers.get("Origin", "")
        if origin.startswith("http://localhost") or origin.startswith("http://127.0.0.1"):
            return origin
        return "http://localhost"

    def _dispatch(self, method):
        path, _, query_str = self.path.partition("?")
        query = dict(part.split("=", 1) for part in query_str.split("&") if "=" in part)
        if method == "GET" and (path == "/ui" or path.startswith("/ui/")):
            return self._serve_ui(path)
        try:
            if method == "POST":
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    body = json.loads(raw or b"{}")
                except json.JSONDecodeError as exc:
                    raise ApiError(400, f"malformed JSON body: {exc}") from None
            else:
                body = {}
            out = _handle(self.session, method, path, query, body)
            self._send(200, out)
        except ApiError as exc:
            payload = {"error": str(exc)}
            if exc.field:
                payload["field"] = exc.field
            self._send(exc.status, payload)
        except (ValueError, KeyError) as exc:
            self._send(400, {"error": str(exc)})
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            self._send(422, {"error": f"numerical failure: {exc}"})

    def _serve_ui(self, path):
        if self.ui_dir is None:
            self._send(404, {"error": "no UI assets configured"})
            return
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        target = (Path(self.ui_dir) / rel).resolve()
        if not str(target).startswith(str(Path(self.ui_dir).resolve())) \
                or not target.is_file():
            self._send(404, {"error": f"no asset {rel}"})
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type=ctype)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def make_server(bundle, host="127.0.0.1", port=0, samples=None, ui_dir=None):
    """Threaded HTTP server bound to (host, port); port 0 picks a free one."""
    handler = type("_BoundHandler", (_Handler,), {
        "session": ApiSession(bundle, samples),
        "ui_dir": ui_dir,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve(checkpoint, host="127.0.0.1", port=8707, data_dir=None, ui_dir=None):
    """Blocking entry point used by the CLI."""
    bundle = load_bundle(checkpoint)
    samples = None
    if data_dir:
        samples = ApiSession.from_dataset_dir(bundle, data_dir).samples
    httpd = make_server(bundle, host=host, port=port, samples=samples, ui_dir=ui_dir)
    print(f"serving on http://{host}:{httpd.server_address[1]} "
          f"(k={bundle.k}, kind={bundle.kind}); endpoint listing at /api")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        httpd.shutdown()


class BackgroundServer:
    """Context manager running the service on a daemon thread (tests, demos)."""

    def __init__(self, bundle, samples=None, ui_dir=None):
        self.httpd = make_server(bundle, port=0, samples=samples, ui_dir=ui_dir)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def url(self):
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()
