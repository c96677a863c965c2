"""Canonical alignment and the three region selections, on generated eyes.

Generates a four-subject dataset, aligns one image into the canonical
400x340 frame, and writes out the three region variants as PGM files so
they can be eyeballed.  Output lands in demos/output/.
Run with: python3 demos/02_alignment_and_regions.py
"""

from pathlib import Path

from ocutex.align import AlignParams, InsufficientBorder, Region, align_ocular, apply_region
from ocutex.image import load_pgm, write_pgm
from ocutex.synth import SynthSpec, generate

out = Path(__file__).resolve().parent / "output" / "alignment"
out.mkdir(parents=True, exist_ok=True)

data_dir = out / "dataset"
if (data_dir / "manifest.csv").exists():
    from ocutex.dataset import load_manifest

    manifest = load_manifest(data_dir / "manifest.csv")
else:
    manifest = generate(SynthSpec(subjects_per_class=2, images_per_subject=1, seed=3), data_dir)

rec = manifest.records[0]
img = load_pgm(rec.image_path)
geo = rec.geometry
print(f"{Path(rec.image_path).name}: subject {rec.subject_id}, "
      f"iris at ({geo.center_x:.1f}, {geo.center_y:.1f}) radius {geo.radius:.1f}")

params = AlignParams()  # 400x340 frame, canonical radius 60
canon = align_ocular(img, geo, params)
print(f"aligned to {canon.shape[1]}x{canon.shape[0]}, "
      f"iris now centered at {params.canonical_center} with radius "
      f"{params.canonical_radius} (scale {params.canonical_radius / geo.radius:.3f})")

write_pgm(out / "canonical.pgm", canon)
for sel in Region:
    view = apply_region(canon, sel, params)
    write_pgm(out / f"{sel.value}.pgm", view)
    print(f"  {sel.value}: {view.shape[1]}x{view.shape[0]} -> {sel.value}.pgm")

# IrisOnly is a tight 120x120 crop around the disc; the other two keep
# the full frame and differ only in which side of the disc is blanked.

# Alignment refuses to fabricate border pixels.  An iris close to the
# image edge cannot fill the canonical frame, so it raises instead:
try:
    from ocutex.align import OcularGeometry

    align_ocular(img, OcularGeometry(30.0, 30.0, geo.radius), params)
except InsufficientBorder as e:
    print("\nnear-edge iris correctly rejected:")
    print(" ", e)

print(f"\nwrote PGM files under {out}")
