"""Track a rocking deck with the roll/pitch filter.

Feeds the tracker a 10-degree swell with noisy gyro and accelerometer
readings and prints how the error settles, then the steady-state RMS.
"""

import numpy as np

from aquapos import ImuSample, TiltTracker
from aquapos.attitude import GRAVITY


def gravity_accel(roll, pitch):
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    return GRAVITY * np.array([sp, -cp * sr, -cp * cr])


def body_rates(roll, pitch, roll_rate, pitch_rate):
    sr, cr = np.sin(roll), np.cos(roll)
    return np.array([roll_rate, pitch_rate * cr, -pitch_rate * sr])


def main():
    rng = np.random.default_rng(1)
    amp, freq, dt = np.radians(10.0), 0.3, 0.01
    w = 2 * np.pi * freq
    tracker = TiltTracker()

    errors = []
    for k in range(3000):
        t = k * dt
        roll = amp * np.sin(w * t)
        pitch = 0.8 * amp * np.sin(w * t + 0.7)
        gyro = body_rates(roll, pitch, amp * w * np.cos(w * t),
                          0.8 * amp * w * np.cos(w * t + 0.7))
        gyro = gyro + rng.normal(0.0, 0.005, size=3)
        accel = gravity_accel(roll, pitch) + rng.normal(0.0, 0.05, size=3)
        state = tracker.feed(ImuSample(t, gyro, accel))
        err = np.degrees([state.roll - roll, state.pitch - pitch])
        errors.append(err)
        if k % 500 == 0:
            print(f"t={t:5.1f}s  roll err {err[0]:+7.3f} deg  "
                  f"pitch err {err[1]:+7.3f} deg")

    steady = np.array(errors[500:])
    rms = np.sqrt(np.mean(steady ** 2, axis=0))
    print(f"steady-state RMS: roll {rms[0]:.3f} deg, pitch {rms[1]:.3f} deg")


if __name__ == "__main__":
    main()
