# Detector threshold, ROC, reference ECDFs and the final score.

# %%
import numpy as np

from neusv.io import data_path, load_profile
from neusv.perception import auc, find_optimal_threshold, read_calibration_csv, roc_curve
from neusv.scoring import ALL_MODES, aggregate, ecdf_map, pearson

samples = read_calibration_csv(data_path("fixtures/calibration.csv"))
best = find_optimal_threshold(samples)
points = roc_curve(samples)
print(f"gamma_fp = {best.gamma:.6f}, accuracy {best.accuracy:.3f}, AUC {auc(points):.3f}")

# %% a profile bundles gamma_fp with one reference distribution per mode
profile = load_profile()
print(profile.version, profile.gamma_fp)
for mode in ALL_MODES:
    d = profile.distribution(mode)
    print(f"{mode.value:26s} n={len(d.samples):3d}  P=0.5 -> {ecdf_map(0.5, d):.3f}")

# %% per-mode scores average into the final score
scores = {m: ecdf_map(p, profile.distribution(m)) for m, p in zip(ALL_MODES, [0.9, 0.4, 0.7, 0.6])}
print("final:", aggregate(scores).final)

# %% correlation with human ratings
rng = np.random.default_rng(1)
ours = rng.random(20)
human = ours + rng.normal(0, 0.2, 20)
print("pearson r:", round(pearson(ours, human), 4))
