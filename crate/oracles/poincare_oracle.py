"""Independent reference values (scipy DOP853) for the Poincare-level tests."""
import numpy as np
from scipy.integrate import solve_ivp


def shear(t, z):
    x, y = z[:2]
    out = [1.0, y]
    if len(z) > 2:
        phi = z[2:].reshape(2, 2)
        a = np.array([[0.0, 0.0], [0.0, 1.0]])
        out += list((a @ phi).ravel())
    return out


def lpf_logdet(field, p, t, normal):
    z0 = np.concatenate([p, np.eye(2).ravel()])
    sol = solve_ivp(field, (0, t), z0, method="DOP853", rtol=1e-13, atol=1e-13)
    q = sol.y[:2, -1]
    phi = sol.y[2:, -1].reshape(2, 2)
    ns, nt = normal(p), normal(q)
    m = nt @ phi @ ns
    return np.log(abs(m))


def shear_normal(p):
    u = np.array([1.0, p[1]]) / np.hypot(1.0, p[1])
    return np.array([-u[1], u[0]])


print("shear logdet p=(0,0) t=1:", lpf_logdet(shear, np.array([0.0, 0.0]), 1.0, shear_normal))
xs = [lpf_logdet(shear, np.array([0.0, 0.0]), n, shear_normal) for n in range(1, 6)]
ys = [lpf_logdet(shear, np.array([0.0, 0.1]), n, shear_normal) for n in range(1, 6)]
print("shear distortion series x=(0,0) y=(0,0.1):", [repr(abs(a - b)) for a, b in zip(xs, ys)])
closed = [abs(0.5 * np.log(1 + 0.01 * np.exp(2 * n)) - 0.5 * np.log(1.01)) for n in range(1, 6)]
print("closed form:", [repr(c) for c in closed])


def unit_speed(t, z):
    r = np.hypot(z[0], z[1])
    return [-z[1] / r, z[0] / r]


# hitting time of the ray through X_1(p), p=(1,0): the angle of that ray is 1 rad
for r in (0.9, 1.0, 1.2):
    ev = lambda t, z: np.sin(1.0) * z[0] - np.cos(1.0) * z[1]
    ev.terminal, ev.direction = True, -1
    sol = solve_ivp(unit_speed, (0, 10), [r, 0.0], method="DOP853", rtol=1e-13, atol=1e-13, events=ev)
    print("unit-speed tau r=%g:" % r, repr(sol.t_events[0][0]), "closed", r * 1.0)
