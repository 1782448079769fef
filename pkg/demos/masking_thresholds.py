"""How a loud tone hides quieter sounds around it.

Run: python demos/masking_thresholds.py
"""

import numpy as np

from psyadv import StftConfig, generate_thresholds, magnitude, stft, synth_tone
from psyadv.psychoacoustic import ath_db, hz_to_bark

cfg = StftConfig()
freqs = cfg.bin_freqs(16000)

# %% Threshold in quiet
# With nothing playing, the only limit is the hearing threshold itself,
# lowest around 3 to 4 kHz.
for f in (100, 500, 1000, 3300, 6000, 8000):
    print(f"threshold in quiet at {f:5d} Hz: {ath_db(float(f)):6.1f} dB SPL")

# %% A 1 kHz tone raises the ceiling near 1 kHz
tone = synth_tone(1000.0, 0.5, 0.8)
th, maskers = generate_thresholds(magnitude(stft(tone, cfg)), 16000, cfg, return_maskers=True)
frame = th.shape[0] // 2
db = th.levels_db()[frame]
print(f"\nframe {frame}: maskers at bins {[m.bin for m in maskers if m.frame == frame]}")
for f in (500, 800, 1000, 1250, 2000, 4000):
    b = int(round(f / freqs[1]))
    print(f"{f:5d} Hz  bark {hz_to_bark(freqs[b]):5.2f}  threshold {db[b]:6.1f} dB"
          f"  (quiet {ath_db(freqs[b]):6.1f} dB)")

# %% Spread is asymmetric on the Bark axis
# The tone masks upward in frequency further than downward.
z0 = hz_to_bark(1000.0)
lo = freqs[int(round(600 / freqs[1]))]
hi = freqs[int(round(1600 / freqs[1]))]
print(f"\n{hz_to_bark(lo) - z0:+.2f} Bark -> {db[int(round(600 / freqs[1]))]:.1f} dB, "
      f"{hz_to_bark(hi) - z0:+.2f} Bark -> {db[int(round(1600 / freqs[1]))]:.1f} dB")

# %% Edge frames
# The first and last frames mostly see reflected padding around a ramp, so no
# peak survives the tonal test and they fall back to the threshold in quiet.
edge = np.allclose(th.levels_db()[0], ath_db(freqs))
print(f"\nfirst frame equals the threshold in quiet: {edge}")
