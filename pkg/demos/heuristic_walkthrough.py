"""
Labelling a centroid by hand
============================

A cluster centroid is twelve monthly NDVI values. Peaks above 0.3 are crop
seasons, and a season whose peak months were dry must have been watered.
"""

import numpy as np

from irrigrid.seasons import HeuristicConfig, detect_peaks, label_cluster

cfg = HeuristicConfig()
months = np.arange(1, 13)

# a double-cropped field: a wet-season crop in August and a dry-season crop in February
ndvi = 0.15 + 0.5 * np.exp(-0.5 * ((months - 8) / 1.0) ** 2) \
    + 0.45 * np.exp(-0.5 * (np.minimum(abs(months - 2), 12 - abs(months - 2)) / 1.0) ** 2)
precip = np.where((months >= 6) & (months <= 9), 160.0, 15.0)
temp = np.full(12, 24.0)

print("NDVI  ", np.round(ndvi, 2))
print("peaks ", detect_peaks(ndvi, cfg))

label = label_cluster(ndvi, precip, temp, cfg)
for s in label.seasons:
    print(f"  month {s.season.peak_month:2d}: peak {s.season.peak_ndvi:.2f}, "
          f"{s.season.mean_precip_mm:.0f} mm -> {s.verdict.name}")
print("overall", label.overall.name)

# the cold branch lowers the water need to 85 mm
for t in (20.0, 10.0):
    lab = label_cluster(ndvi, np.full(12, 90.0), np.full(12, t), cfg)
    print(f"90 mm/month at {t:.0f} C ->", lab.overall.name)
