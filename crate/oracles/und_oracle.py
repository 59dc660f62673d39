"""Closed-form log|det P_t| for the Morse torus gradient field (separable 1-D flows)."""
import numpy as np

LAM = 4 * np.pi ** 2


def coord(a, t):
    return np.arctan(np.tan(np.pi * a) * np.exp(-LAM * t)) / np.pi


def speed(a, b):
    return 2 * np.pi * np.hypot(np.sin(2 * np.pi * a), np.sin(2 * np.pi * b))


def logdet(p, t):
    a, b = p
    at, bt = coord(a, t), coord(b, t)
    ldx = np.log(abs(np.sin(2 * np.pi * at) / np.sin(2 * np.pi * a))) + np.log(abs(np.sin(2 * np.pi * bt) / np.sin(2 * np.pi * b)))
    return ldx + np.log(speed(a, b)) - np.log(speed(at, bt))


x, y = (0.2, 0.49), (0.3, 0.2)
dt = 1.0 / 64
for k in range(1, 33):
    t = k * dt
    d = abs(logdet(x, t) - logdet(y, t))
    print(k, t, repr(d), speed(coord(x[0], t), coord(x[1], t)), speed(coord(y[0], t), coord(y[1], t)))
    if d > 1:
        print("first k with Delta > 1:", k, "t =", t)
        break
