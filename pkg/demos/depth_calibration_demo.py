"""Fit the depth sensor's scale and offset with the particle swarm.

Generates noisy (raw, truth) pairs from a known affine model, runs the
swarm, and compares the answer against ordinary least squares.
"""

import numpy as np

from aquapos import PsoConfig, calibrate
from aquapos.depth_calibration import calibrate_with_trace


def main():
    rng = np.random.default_rng(1)
    true_scale, true_offset = 1.3, -0.2
    raw = rng.uniform(0.4, 1.8, size=150)
    truth = true_scale * raw + true_offset + rng.normal(0.0, 0.002, size=raw.size)
    pairs = np.column_stack([raw, truth])

    params, trace = calibrate_with_trace(pairs, PsoConfig(seed=1))
    print(f"truth        scale {true_scale:+.6f}  offset {true_offset:+.6f}")
    print(f"swarm        scale {params.scale:+.6f}  offset {params.offset:+.6f}")

    design = np.column_stack([raw, np.ones(raw.size)])
    ls_scale, ls_offset = np.linalg.lstsq(design, truth, rcond=None)[0]
    print(f"least squares scale {ls_scale:+.6f}  offset {ls_offset:+.6f}")

    marks = [0, 1, 2, 5, 10, 20, 50, 100, len(trace) - 1]
    print("\nbest cost by iteration:")
    for m in marks:
        print(f"  iter {m:3d}: {trace[m]:.6e}")

    assert abs(params.scale - ls_scale) < 1e-3
    assert abs(params.offset - ls_offset) < 1e-3


if __name__ == "__main__":
    main()
