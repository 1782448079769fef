"""How many Griffin-Lim passes does the attack need?

Run: python demos/griffin_lim_sweep.py   (about 20 s)
"""

import numpy as np

from psyadv import AttackConfig, build_keyword_dataset, stft, train_toy
from psyadv.cli import run_sweep
from psyadv.spectral import consistency_error, griffin_lim

# %% Consistency improves with every pass
rng = np.random.default_rng(0)
spec = stft(rng.uniform(-0.5, 0.5, 8000))
modified = spec.with_bins(spec.bins * rng.uniform(0, 2, spec.shape))
for k in (0, 1, 2, 4, 8):
    print(f"k={k}: consistency error {consistency_error(modified, griffin_lim(modified, k)):.4f}")

# %% Attack cost versus k
# More passes make each step more faithful to the equalized spectrogram but
# also smooth it, so the attack tends to need a few more iterations.
buffers, labels = build_keyword_dataset(4, 25, seed=0)
model = train_toy((buffers, labels), seed=0)
_, aggregate = run_sweep(model, buffers, [1, 2, 4, 8], n_pairs=50, seed=7,
                         base_config=AttackConfig(), jobs=4)
print()
for row in aggregate:
    print(f"k={row['k']}: success {row['success_rate']:.0%}, "
          f"mean iterations {row['mean_iterations']:.2f}")
