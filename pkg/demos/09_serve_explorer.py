"""Serve a trained model plus the browser explorer.

Run demos/03_train_contours.py first, and build the frontend once with
`npm install && npm run build` inside frontend/. Then open the printed URL:
band sliders re-decode the shape live through the /band endpoint.

Equivalent CLI:
  eigenshape serve --checkpoint demos/_out/contour_model.bin \
      --data <dataset dir> --ui frontend/dist
"""

import pathlib

import numpy as np

from eigenshape import load_bundle
from eigenshape.server import make_server

HERE = pathlib.Path(__file__).parent
OUT = HERE / "_out"
if not (OUT / "contour_model.bin").exists():
    raise SystemExit("run demos/03_train_contours.py first")

bundle = load_bundle(OUT / "contour_model.bin")
data = np.load(OUT / "contour_dataset.npz")
samples = [{"id": i, "spectrum": data["spectra"][i].tolist(),
            "coords": data["coords"][i].tolist()} for i in range(12)]

ui = HERE.parent / "frontend" / "dist"
httpd = make_server(bundle, port=8707, samples=samples,
                    ui_dir=str(ui) if ui.exists() else None)
print("API on http://127.0.0.1:8707 (see /api for endpoints)")
if ui.exists():
    print("explorer UI on http://127.0.0.1:8707/ui")
else:
    print("frontend/dist not found; build it with: cd frontend && npm run build")
print("Ctrl-C to stop")
httpd.serve_forever()
