"""
Photon counting from raw calorimeter pulses
===========================================

Synthesizes noisy pulse records whose height scales with photon number,
projects each onto the matched template, separates the energy ladder with a
Gaussian mixture, and reads photon numbers back off the cluster labels.
"""
import numpy as np

from photonsub import (
    assign_photon_numbers,
    default_template,
    fit_mixture,
    synth_batch,
    wiener_project,
)

PMF = np.array([0.28, 0.26, 0.20, 0.13, 0.08, 0.05])
N_PULSES = 20_000
NOISE = 0.125  # peak separation / sigma = 8

tmpl = default_template()
rng = np.random.default_rng(12)
true_n = rng.choice(PMF.size, size=N_PULSES, p=PMF)
traces = synth_batch(true_n, tmpl, 1.0, NOISE, rng)
energies = wiener_project(traces, tmpl)

mix = fit_mixture(energies, k_max=5)
labels, pmf_hat = assign_photon_numbers(energies, mix)

print("cluster centers:", "  ".join(f"{m:.3f}" for m in mix.means))
print(f"{'n':>3} {'true pmf':>9} {'recovered':>10}")
for n in range(PMF.size):
    print(f"{n:3d} {PMF[n]:9.3f} {pmf_hat[n]:10.3f}")

acc = float((labels == true_n).mean())
tv = float(0.5 * np.abs(pmf_hat - PMF).sum())
print(f"\nper-pulse accuracy {acc:.4f}, pmf total variation {tv:.5f}")
# misassignments come from the Gaussian tails crossing the midpoints; at
# separation/sigma = 8 that overlap is about 6e-5 per boundary
