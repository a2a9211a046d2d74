"""Correspondence-free style transfer between two held-out contours.

The style donor contributes only its eigenvalues; the pose donor contributes
the starting latent code. A short latent-space search pulls the predicted
spectrum onto the donor's while an anchor keeps the pose. Writes the three
shapes and the alignment curve to demos/_out/.
"""

import json
import pathlib

import numpy as np

from eigenshape import (
    Contour,
    StyleTransferConfig,
    load_bundle,
    save_shape,
    style_transfer,
)

OUT = pathlib.Path(__file__).parent / "_out"
if not (OUT / "contour_model.bin").exists():
    raise SystemExit("run demos/03_train_contours.py first")

bundle = load_bundle(OUT / "contour_model.bin")
data = np.load(OUT / "contour_dataset.npz")
coords, spectra = data["coords"], data["spectra"]

style_id, pose_id = 305, 340
pose_shape = Contour(coords[pose_id])
res = style_transfer(bundle, spectra[style_id], pose_shape,
                     StyleTransferConfig(w=1e-2, steps=400, lr=1e-2))

print(f"alignment gap: {res.alignment[0]:.4f} -> {res.alignment[-1]:.4f} "
      f"({1 - res.alignment[-1] / res.alignment[0]:.0%} reduction)")
save_shape(Contour(coords[style_id]), OUT / "style_donor.json")
save_shape(pose_shape, OUT / "pose_donor.json")
save_shape(res.shape, OUT / "transfer_result.json")
(OUT / "alignment_curve.json").write_text(json.dumps(res.alignment))
print(f"wrote donors, result, and curve to {OUT}")
