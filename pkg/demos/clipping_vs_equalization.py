"""Why limit a perturbation in frequency instead of clipping it in time.

Run: python demos/clipping_vs_equalization.py
"""

from psyadv.attack import compare_projections, distortion_report

# %% The same 500 Hz candidate, constrained two ways
# Clipping at 60% of the amplitude squares off the peaks, which pours energy
# into odd harmonics. Equalization only rescales existing spectral content,
# so nothing appears at 1, 1.5, 2 or 2.5 kHz.
outputs = compare_projections(freq=500.0, amplitude=0.5, clip_ratio=0.6)
for row in distortion_report(outputs, 500.0):
    print(f"{row['method']:10s} harmonic distortion {row['harmonic_distortion_db']:8.1f} dB"
          f"   SNR vs candidate {row['snr_db']:6.1f} dB")

# %% Griffin-Lim passes
# Extra passes let phase drift in the near-silent edge frames, which raises
# the floor a little, but the result stays far below the clipped version.
for k in (0, 1, 8):
    eq = distortion_report(compare_projections(k=k), 500.0)[1]
    print(f"k={k}: equalized distortion {eq['harmonic_distortion_db']:.1f} dB")
