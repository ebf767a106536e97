#!/usr/bin/env python3
"""Regenerates the bundled synthetic weather CSVs.

Four sites with distinct, fully deterministic hourly patterns over 28 days:
  coast  - sea-breeze wind peaking with the sun (positive solar-wind correlation)
  valley - moderate night wind (negative correlation)
  ridge  - strong night wind, clear skies (negative correlation, high wind yield)
  urban  - weak night wind, hazier sky (negative correlation, low wind yield)
Day-to-day variability comes from incommensurate cosine periods, not randomness,
so the files are reproducible byte for byte.
"""

import math
import os

DAYS = 28

SITES = {
    "coast": dict(imax=880.0, s_period=9.0, s_phase=0.0, w_period=8.0, w_phase=0.4),
    "valley": dict(imax=920.0, s_period=7.0, s_phase=1.1, w_period=10.0, w_phase=1.9),
    "ridge": dict(imax=980.0, s_period=11.0, s_phase=2.3, w_period=6.0, w_phase=3.1),
    "urban": dict(imax=850.0, s_period=13.0, s_phase=0.7, w_period=9.0, w_phase=2.6),
}


def bell(hour):
    """Daylight shape: 0 outside 6..18, sine arch peaking at noon."""
    if hour < 6 or hour > 18:
        return 0.0
    return math.sin(math.pi * (hour - 6) / 12.0)


def night(hour, peak):
    """Cosine arch peaking at `peak` o'clock, in [0, 1]."""
    return 0.5 * (1.0 + math.cos(2.0 * math.pi * (hour - peak) / 24.0))


def day_factor(day, period, phase, lo, hi):
    mid = 0.5 * (hi + lo)
    amp = 0.5 * (hi - lo)
    return mid + amp * math.cos(2.0 * math.pi * day / period + phase)


def wind_speed(site, day, hour, w):
    if site == "coast":
        return 2.8 + 7.5 * bell(hour) * w + 0.8 * night(hour, 14)
    if site == "valley":
        return 3.2 + 6.0 * night(hour, 2) * w
    if site == "ridge":
        return 6.5 + 7.0 * night(hour, 1) * w
    return 2.0 + 3.5 * night(hour, 3) * w  # urban


def main():
    out_dir = os.path.dirname(os.path.abspath(__file__))
    for site, p in SITES.items():
        lines = ["day,hour,irradiance_wm2,wind_speed_ms"]
        for day in range(DAYS):
            ws = day_factor(day, p["s_period"], p["s_phase"], 0.24, 1.0)
            ww = day_factor(day, p["w_period"], p["w_phase"], 0.35, 1.0)
            for hour in range(24):
                irr = p["imax"] * bell(hour) ** 1.3 * ws
                v = wind_speed(site, day, hour, ww)
                lines.append(f"{day},{hour},{irr:.1f},{v:.2f}")
        path = os.path.join(out_dir, f"{site}.csv")
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
