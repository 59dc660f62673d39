"""Fraction of normally offset pairs that stay eps-close on the Morse torus field (scipy)."""
import numpy as np
from scipy.integrate import solve_ivp

TAU = 2 * np.pi


def morse(t, z):
    return [-TAU * np.sin(TAU * z[0]), -TAU * np.sin(TAU * z[1])]


def wrapd(a, b):
    d = (a - b + 0.5) % 1.0 - 0.5
    return np.hypot(d[0], d[1])


def max_dist(x, y, T):
    ts = np.linspace(0, T, 4001)
    worst = 0.0
    for sgn in (1, -1):
        sx = solve_ivp(morse, (0, sgn * T), x, t_eval=sgn * ts, rtol=1e-10, atol=1e-12)
        sy = solve_ivp(morse, (0, sgn * T), y, t_eval=sgn * ts, rtol=1e-10, atol=1e-12)
        for a, b in zip(sx.y.T, sy.y.T):
            worst = max(worst, wrapd(a, b))
    return worst


rng = np.random.default_rng(7)
eps, T = 0.1, 50.0
hits = 0
for k in range(100):
    x = rng.random(2)
    v = np.array(morse(0, x))
    nrm = np.array([-v[1], v[0]]) / np.linalg.norm(v)
    y = x + rng.choice([-1, 1]) * rng.uniform(eps / 4, eps / 2) * nrm
    if max_dist(x, y, T) < eps:
        hits += 1
print("non-separating pairs among 100:", hits)
