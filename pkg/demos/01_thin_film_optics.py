"""
Thin-film reflectance with characteristic matrices
==================================================

A quarter-wave stack of alternating high/low index layers reflects strongly
around its design wavelength.  We check the computed peak against the closed
form and look at how the stop band narrows as pairs are removed.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pbomix.tmm import GLASS, MGF2, TIO2, SpectrumGrid, StackDesign, reflectance_spectrum

lam0 = 400.0


def quarter_wave(pairs):
    return StackDesign([(0, lam0 / (4 * TIO2.n)), (1, lam0 / (4 * MGF2.n))] * pairs)


# Peak reflectance: compare with ((1 - Y) / (1 + Y))**2, Y = n_s (n_H / n_L)^(2N)
for pairs in (1, 3, 5, 10):
    rho = reflectance_spectrum(quarter_wave(pairs), SpectrumGrid(lam0 - 1, lam0 + 1, 3))[1]
    y = GLASS * (TIO2.n / MGF2.n) ** (2 * pairs)
    print(f"{pairs:2d} pairs: R(400 nm) = {rho:.6f}   closed form {((1 - y) / (1 + y)) ** 2:.6f}")

# Spectra over a wide band
grid = SpectrumGrid(250, 700, 901)
fig, ax = plt.subplots(figsize=(6, 3.5))
for pairs in (2, 5, 10):
    ax.plot(grid.wavelengths(), reflectance_spectrum(quarter_wave(pairs), grid),
            label=f"{pairs} pairs")
ax.axvspan(300, 500, color="0.9", zorder=0)
ax.set_xlabel("wavelength (nm)")
ax.set_ylabel("reflectance")
ax.legend()
fig.tight_layout()
fig.savefig("quarter_wave_spectra.png", dpi=120)

# The stop band of a single quarter-wave design does not cover 300-500 nm,
# which is why the layer thicknesses and materials have to be optimized.
band = SpectrumGrid(300, 500, 101)
print("mean R over 300-500 nm, 10 pairs:",
      round(float(reflectance_spectrum(quarter_wave(10), band).mean()), 4))
