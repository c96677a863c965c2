"""Tour of the three texture descriptors on a small synthetic image.

Each descriptor maps a gray image to an integer code per pixel; the
classifier never sees pixels, only per-cell histograms of these codes.
Run with: python3 demos/01_descriptor_tour.py
"""

import numpy as np

from ocutex.descriptors import Bsif, Lbp, Lpq, default_bank
from ocutex.descriptors.lbp import lbp_code_image

rng = np.random.default_rng(42)

# A 128x128 test card: smooth gradient + oriented sine + a bit of noise.
yy, xx = np.mgrid[0:128, 0:128].astype(np.float64)
img = 90 + 0.3 * xx + 25 * np.sin(2 * np.pi * (0.08 * xx + 0.03 * yy))
img = np.clip(img + rng.normal(0, 4, img.shape), 0, 255).astype(np.uint8)

print("input image:", img.shape, img.dtype, f"gray range [{img.min()}, {img.max()}]")
print()

for desc in (Bsif(default_bank()), Lbp(), Lpq()):
    codes = desc.code_image(img)
    hist = np.bincount(codes.ravel(), minlength=desc.cardinality)
    top = hist.argsort()[-3:][::-1]
    shares = ", ".join(f"{int(c)}: {hist[c] / codes.size:.1%}" for c in top)
    print(f"{desc.tag}: {desc.cardinality} codes, output {codes.shape}")
    print(f"  observed code range [{codes.min()}, {codes.max()}]")
    print(f"  three most common codes: {shares}")
print()

# The BSIF bit convention, by hand: filter i contributes bit 2^(n-1-i),
# set when the zero-mean filter response is strictly positive.  Five
# responses (+, -, -, +, +) therefore give bits 10011 = code 19.
bits = [1, 0, 0, 1, 1]
code = 0
for b in bits:
    code = code * 2 + b
print("BSIF bit order check: responses (+,-,-,+,+) -> bits 10011 -> code", code)

# LBP on two hand-made patches.  Neighbors >= center set a bit, read
# clockwise from the top-left with the first bit most significant; the
# 58 uniform patterns (at most two 0/1 transitions around the circle)
# get labels 0..57 in ascending binary order, everything else maps to 58.
uniform_patch = np.array(
    [
        [9, 9, 9],
        [1, 5, 9],
        [1, 1, 1],
    ],
    dtype=np.uint8,
)
ragged_patch = np.array(
    [
        [9, 1, 9],
        [1, 5, 1],
        [9, 1, 9],
    ],
    dtype=np.uint8,
)
print("LBP label, uniform neighborhood:", int(lbp_code_image(uniform_patch)[1, 1]))
print("LBP label, alternating neighborhood:", int(lbp_code_image(ragged_patch)[1, 1]))
print("(the alternating one has eight transitions, so it lands in bin 58)")
