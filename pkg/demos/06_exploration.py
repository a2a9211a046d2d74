"""Explore the space of shapes through the spectrum.

Two modes: scaling eigenvalue bands of one shape (damping low frequencies
exaggerates coarse features, amplifying high ones sharpens detail), and
bilinear interpolation of four shapes in latent space with eigenvalues as
the only input.
"""

import pathlib

import numpy as np

from eigenshape import (
    Spectrum,
    band_modify,
    interpolate_latent,
    interpolate_spectra,
    load_bundle,
    save_shape,
    shape_from_spectrum,
)

OUT = pathlib.Path(__file__).parent / "_out"
if not (OUT / "contour_model.bin").exists():
    raise SystemExit("run demos/03_train_contours.py first")

bundle = load_bundle(OUT / "contour_model.bin")
data = np.load(OUT / "contour_dataset.npz")
spectra = data["spectra"]

base = Spectrum(spectra[300], "contour_fem")
save_shape(shape_from_spectrum(bundle, base), OUT / "explore_base.json")
for name, lo, hi, factor in (("lowpass", 1, 12, 0.7), ("bandpass", 8, 19, 1.3)):
    edited = band_modify(base, lo, hi, factor)
    save_shape(shape_from_spectrum(bundle, edited), OUT / f"explore_{name}.json")
    print(f"{name}: scaled eigenvalues {lo}..{hi} by {factor}")

grid = interpolate_latent(bundle, [spectra[i] for i in (300, 310, 325, 350)], grid=4)
for i, row in enumerate(grid):
    for j, shape in enumerate(row):
        save_shape(shape, OUT / f"grid_{i}{j}.json")
print("wrote a 4x4 latent interpolation grid")

mid = interpolate_spectra(bundle, spectra[300], spectra[350], 0.5)
save_shape(mid, OUT / "between_spectra.json")
print("wrote the halfway shape of a linear blend between two spectra")
