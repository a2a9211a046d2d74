"""Recover shapes from eigenvalues alone, next to the retrieval baseline.

Run demos/03_train_contours.py first to produce the checkpoint. For a few
held-out shapes we decode the spectrum in a single forward pass and compare
against retrieving the training shape with the closest spectrum.
"""

import pathlib
import time

import numpy as np

from eigenshape import NearestIndex, load_bundle, shape_from_spectrum

OUT = pathlib.Path(__file__).parent / "_out"
if not (OUT / "contour_model.bin").exists():
    raise SystemExit("run demos/03_train_contours.py first")

bundle = load_bundle(OUT / "contour_model.bin")
data = np.load(OUT / "contour_dataset.npz")
coords, spectra = data["coords"], data["spectra"]

index = NearestIndex(spectra[:300], payload=coords[:300],
                     scale=float(np.median(spectra[:300, -1])))

print(f"{'shape':>6} {'ours (ms)':>10} {'ours MSE':>10} {'NN MSE':>10}")
for i in (300, 310, 325, 350):
    t0 = time.perf_counter()
    rec = np.asarray(shape_from_spectrum(bundle, spectra[i]).points)
    ms = (time.perf_counter() - t0) * 1000
    nn_shape, _, _ = index.query(spectra[i])
    mse = ((rec - coords[i]) ** 2).sum() / len(rec)
    mse_nn = ((nn_shape - coords[i]) ** 2).sum() / len(rec)
    print(f"{i:>6} {ms:>10.2f} {mse:>10.5f} {mse_nn:>10.5f}")

print("\nthe decode is a single forward pass; no optimization runs at test time")
