"""Inner-loop kernels for the physics step.

Each kernel exists twice: an explicit scalar loop compiled by numba and a
vectorised numpy version. ``USE_NUMBA`` (see ``_backend``) picks which one the
simulator calls; both are importable for tests and benchmarks.

Rigid-body state layout (12): position[0:3], velocity[3:6] (world, z up),
Euler roll/pitch/yaw[6:9] (Z-Y-X), body rates p, q, r[9:12].
Command (4): total thrust, body torques. Wrench (6): world force, body torque.
Params (7): mass, Ixx, Iyy, Izz, linear drag, rotational drag, gravity.
"""
import math

import numpy as np

from ._backend import USE_NUMBA, njit


@njit
def rb_deriv_loop(s, cmd, wrench, prm):
    out = np.empty(12)
    m, ixx, iyy, izz, cd, cr, g = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6]
    phi, th, psi = s[6], s[7], s[8]
    p, q, r = s[9], s[10], s[11]
    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(th), math.sin(th)
    cps, sps = math.cos(psi), math.sin(psi)
    thrust = cmd[0]
    # third column of R = Rz(psi) Ry(th) Rx(phi)
    bx = cps * sth * cph + sps * sph
    by = sps * sth * cph - cps * sph
    bz = cth * cph
    out[0] = s[3]
    out[1] = s[4]
    out[2] = s[5]
    out[3] = (thrust * bx - cd * s[3] + wrench[0]) / m
    out[4] = (thrust * by - cd * s[4] + wrench[1]) / m
    out[5] = (thrust * bz - m * g - cd * s[5] + wrench[2]) / m
    tth = sth / cth
    out[6] = p + (q * sph + r * cph) * tth
    out[7] = q * cph - r * sph
    out[8] = (q * sph + r * cph) / cth
    out[9] = (cmd[1] + wrench[3] - (q * izz * r - r * iyy * q) - cr * p) / ixx
    out[10] = (cmd[2] + wrench[4] - (r * ixx * p - p * izz * r) - cr * q) / iyy
    out[11] = (cmd[3] + wrench[5] - (p * iyy * q - q * ixx * p) - cr * r) / izz
    return out


@njit
def rb_rk4_loop(s, cmd, wrench, prm, dt):
    k1 = rb_deriv_loop(s, cmd, wrench, prm)
    k2 = rb_deriv_loop(s + 0.5 * dt * k1, cmd, wrench, prm)
    k3 = rb_deriv_loop(s + 0.5 * dt * k2, cmd, wrench, prm)
    k4 = rb_deriv_loop(s + dt * k3, cmd, wrench, prm)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rotation_matrix(phi, theta, psi):
    cph, sph = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(theta), np.sin(theta)
    cps, sps = np.cos(psi), np.sin(psi)
    rz = np.array([[cps, -sps, 0.0], [sps, cps, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cth, 0.0, sth], [0.0, 1.0, 0.0], [-sth, 0.0, cth]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cph, -sph], [0.0, sph, cph]])
    return rz @ ry @ rx


def euler_rate_matrix(phi, theta):
    """Maps body rates (p, q, r) to Euler angle rates."""
    cph, sph, cth, tth = np.cos(phi), np.sin(phi), np.cos(theta), np.tan(theta)
    return np.array(
        [[1.0, sph * tth, cph * tth], [0.0, cph, -sph], [0.0, sph / cth, cph / cth]]
    )


def rb_deriv_numpy(s, cmd, wrench, prm):
    m, inertia, cd, cr, g = prm[0], prm[1:4], prm[4], prm[5], prm[6]
    vel, att, omega = s[3:6], s[6:9], s[9:12]
    rot = rotation_matrix(*att)
    acc = (cmd[0] * rot[:, 2] - cd * vel + wrench[:3]) / m
    acc[2] -= g
    att_dot = euler_rate_matrix(att[0], att[1]) @ omega
    omega_dot = (cmd[1:4] + wrench[3:6] - np.cross(omega, inertia * omega) - cr * omega) / inertia
    return np.concatenate((vel, acc, att_dot, omega_dot))


def rb_rk4_numpy(s, cmd, wrench, prm, dt):
    k1 = rb_deriv_numpy(s, cmd, wrench, prm)
    k2 = rb_deriv_numpy(s + 0.5 * dt * k1, cmd, wrench, prm)
    k3 = rb_deriv_numpy(s + 0.5 * dt * k2, cmd, wrench, prm)
    k4 = rb_deriv_numpy(s + dt * k3, cmd, wrench, prm)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Slung bottle: two planar pendulums (x-z and y-z world planes) plus a 2-D
# slosh oscillator. State (8): alpha, beta, alpha_dot, beta_dot, sx, sy,
# sx_dot, sy_dot. Params (8): length, gravity, pendulum damping ratio,
# slosh natural frequency, slosh damping ratio, coupling gain, total mass,
# water mass.


@njit
def slung_deriv_loop(z, acc, force_noise, prm):
    out = np.empty(8)
    ell, g, zp, ws, zs, cpl = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5]
    wp = math.sqrt(g / ell)
    geff = g + acc[2]
    a, b, ad, bd = z[0], z[1], z[2], z[3]
    add = -(geff * math.sin(a) + acc[0] * math.cos(a)) / ell - 2.0 * zp * wp * ad
    bdd = -(geff * math.sin(b) + acc[1] * math.cos(b)) / ell - 2.0 * zp * wp * bd
    out[0] = ad
    out[1] = bd
    out[2] = add
    out[3] = bdd
    # slosh is driven by the bottle's horizontal acceleration
    bob_ax = acc[0] + ell * add
    bob_ay = acc[1] + ell * bdd
    out[4] = z[6]
    out[5] = z[7]
    out[6] = -2.0 * zs * ws * z[6] - ws * ws * z[4] - cpl * bob_ax + force_noise[0]
    out[7] = -2.0 * zs * ws * z[7] - ws * ws * z[5] - cpl * bob_ay + force_noise[1]
    return out


@njit
def slung_force_loop(z, acc, prm):
    """String tension plus slosh reaction, world frame, acting on the vehicle."""
    ell, g, ws, zs, mb, mw = prm[0], prm[1], prm[3], prm[4], prm[6], prm[7]
    a, b = z[0], z[1]
    sa, ca, sb, cb = math.sin(a), math.cos(a), math.sin(b), math.cos(b)
    dx, dy, dz = sa, sb, -ca * cb
    nrm = math.sqrt(dx * dx + dy * dy + dz * dz)
    dx /= nrm
    dy /= nrm
    dz /= nrm
    ddx = ca * z[2]
    ddy = cb * z[3]
    ddz = sa * cb * z[2] + ca * sb * z[3]
    speed2 = (ddx * ddx + ddy * ddy + ddz * ddz) / (nrm * nrm)
    tension = mb * ((-acc[0]) * dx + (-acc[1]) * dy + (-g - acc[2]) * dz + ell * speed2)
    if tension < 0.0:
        tension = 0.0
    f = np.empty(3)
    # the sloshing water pushes back on the bottle through its spring/damper
    f[0] = tension * dx + mw * (ws * ws * z[4] + 2.0 * zs * ws * z[6])
    f[1] = tension * dy + mw * (ws * ws * z[5] + 2.0 * zs * ws * z[7])
    f[2] = tension * dz
    return f


@njit
def slung_step_loop(z, acc, force_noise, prm, dt):
    k1 = slung_deriv_loop(z, acc, force_noise, prm)
    k2 = slung_deriv_loop(z + 0.5 * dt * k1, acc, force_noise, prm)
    k3 = slung_deriv_loop(z + 0.5 * dt * k2, acc, force_noise, prm)
    k4 = slung_deriv_loop(z + dt * k3, acc, force_noise, prm)
    znew = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return znew, slung_force_loop(znew, acc, prm)


def slung_deriv_numpy(z, acc, force_noise, prm):
    ell, g, zp, ws, zs, cpl = prm[:6]
    wp = np.sqrt(g / ell)
    ang, rate = z[0:2], z[2:4]
    slosh, slosh_rate = z[4:6], z[6:8]
    ang_acc = -((g + acc[2]) * np.sin(ang) + acc[:2] * np.cos(ang)) / ell - 2.0 * zp * wp * rate
    bob_acc = acc[:2] + ell * ang_acc
    slosh_acc = -2.0 * zs * ws * slosh_rate - ws * ws * slosh - cpl * bob_acc + force_noise
    return np.concatenate((rate, ang_acc, slosh_rate, slosh_acc))


def slung_force_numpy(z, acc, prm):
    ell, g, ws, zs, mb, mw = prm[0], prm[1], prm[3], prm[4], prm[6], prm[7]
    (a, b), (ad, bd) = z[0:2], z[2:4]
    d = np.array([np.sin(a), np.sin(b), -np.cos(a) * np.cos(b)])
    nrm = np.linalg.norm(d)
    d_dot = np.array([np.cos(a) * ad, np.cos(b) * bd, np.sin(a) * np.cos(b) * ad + np.cos(a) * np.sin(b) * bd])
    d /= nrm
    gvec = np.array([0.0, 0.0, -g])
    tension = max(mb * ((gvec - acc) @ d + ell * (d_dot @ d_dot) / nrm**2), 0.0)
    f = tension * d
    f[:2] += mw * (ws * ws * z[4:6] + 2.0 * zs * ws * z[6:8])
    return f


def slung_step_numpy(z, acc, force_noise, prm, dt):
    k1 = slung_deriv_numpy(z, acc, force_noise, prm)
    k2 = slung_deriv_numpy(z + 0.5 * dt * k1, acc, force_noise, prm)
    k3 = slung_deriv_numpy(z + 0.5 * dt * k2, acc, force_noise, prm)
    k4 = slung_deriv_numpy(z + dt * k3, acc, force_noise, prm)
    znew = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return znew, slung_force_numpy(znew, acc, prm)


if USE_NUMBA:
    rb_deriv, rb_rk4, slung_step = rb_deriv_loop, rb_rk4_loop, slung_step_loop
else:
    rb_deriv, rb_rk4, slung_step = rb_deriv_numpy, rb_rk4_numpy, slung_step_numpy
