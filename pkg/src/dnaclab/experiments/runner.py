"""Closed-loop scenario runner.

Each control step runs trajectory reference -> cascade -> attitude PID ->
added torque -> saturation, then the plant is integrated over the physics
substeps with the disturbance wrenches recomputed at every substep.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ..baselines import DmracController, MracController, PidState, pid_step
from ..dnac import ControllerFault, DnacController, TrainingFault
from ..plant import CascadeController, CrashFault, augment_and_apply, euler_rates, rk4_step
from ..trajectories import position_ref
from .config import ScenarioConfig
from .metrics import MetricsReport, compute_metrics

log = logging.getLogger(__name__)

COLUMNS = (
    "t",
    "x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "p", "q", "r",
    "x_ref", "y_ref", "z_ref", "vx_ref", "vy_ref", "vz_ref",
    "roll_ref", "pitch_ref", "roll_ref_rate", "pitch_ref_rate",
    "e_roll", "e_pitch",
    "tau_pid_roll", "tau_pid_pitch", "tau_add_roll", "tau_add_pitch",
    "tau_roll", "tau_pitch", "tau_yaw", "thrust",
    "fhat_roll", "fhat_pitch", "w_norm",
    "buffer_trained", "severed",
    "dist_fx", "dist_fy", "dist_fz", "dist_tx", "dist_ty", "dist_tz",
)
_IDX = {name: i for i, name in enumerate(COLUMNS)}

ATTITUDE_NOISE = np.deg2rad(0.2)
RATE_NOISE = np.deg2rad(0.5)


@dataclass
class Trace:
    """One row per control step; columns follow :data:`COLUMNS`."""

    data: np.ndarray
    columns: tuple = COLUMNS
    events: list = field(default_factory=list)

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def to_csv(self, dest=None) -> str | None:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        np.savetxt(buf, self.data, fmt="%.17g", delimiter=",")
        text = buf.getvalue()
        if dest is None:
            return text
        with open(dest, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, src) -> "Trace":
        text = src if "\n" in str(src) else open(src).read()
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        rows = [[float(v) for v in row] for row in reader if row]
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
        return cls(data, header)


def make_augmentation(cfg: ScenarioConfig, seed: int):
    kind = cfg.controller
    if kind == "pid+dnac":
        return DnacController(cfg.dnac, seed)
    if kind == "pid+mrac":
        return MracController(cfg.mrac, seed)
    if kind == "pid+dmrac":
        return DmracController(cfg.dmrac, seed)
    return None


def child_seed(seed: int, stream: int) -> int:
    """Independent seed for one component's random stream."""
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1)[0])


def _counters(aug) -> dict:
    if aug is None:
        return {"train_passes": 0, "adam_steps": 0, "training_faults": 0}
    st = aug.state
    if hasattr(st, "stats"):
        return {"train_passes": st.stats.passes, "adam_steps": st.stats.adam_steps,
                "training_faults": st.stats.faults, "touch_violations": st.stats.touch_violations}
    return {"train_passes": getattr(st, "train_count", 0), "adam_steps": getattr(st, "adam_steps", 0),
            "training_faults": getattr(st, "faults", 0)}


def run_scenario(cfg: ScenarioConfig, *, progress=None):
    """Simulate ``cfg`` and return ``(trace, report)``.

    A crash stops the run and marks the report failed. A controller fault
    (non-finite output, weight bound) severs the augmentation for the rest of
    the run; a training fault only skips that batch pass.
    """
    params = cfg.plant
    prm = params.as_array()
    dt_c, dt_p, n_sub = cfg.control_dt, cfg.physics_dt, cfg.substeps
    n_steps = cfg.control_steps

    cascade = CascadeController(cfg.cascade)
    g = cfg.pid
    pid = PidState(g.kp, g.ki, g.kd, g.integrator_limit, g.output_limit)
    yaw_pid = PidState(g.yaw_kp, g.yaw_ki, g.yaw_kd, g.integrator_limit, g.output_limit)
    aug = make_augmentation(cfg, child_seed(cfg.seed, 0))
    dists = [d for d in cfg.disturbances if d.enabled]
    for i, d in enumerate(cfg.disturbances):
        if hasattr(d, "rng"):
            d.reset(child_seed(cfg.seed, 10 + i))
    sensor_rng = np.random.default_rng(child_seed(cfg.seed, 1))

    # start in flight on the reference, already moving with it
    start, start_vel = position_ref(cfg.trajectory, 0.0)
    s = np.zeros(12)
    s[0:3] = start
    s[3:6] = start_vel
    accel = np.zeros(3)
    wrench = np.zeros(6)
    limit = params.max_torque

    rows = np.empty((n_steps, len(COLUMNS)))
    events = []
    severed = False
    failure = None
    w_max = 0.0
    f_peak = tq_peak = 0.0
    filled = 0

    for k in range(n_steps):
        t = k * dt_c
        meas = s
        if cfg.sensor_noise:
            meas = s.copy()
            meas[6:9] += ATTITUDE_NOISE * sensor_rng.standard_normal(3)
            meas[9:12] += RATE_NOISE * sensor_rng.standard_normal(3)

        pos_ref, vel_ref = position_ref(cfg.trajectory, t)
        att_ref, att_rate, thrust = cascade.step(meas, pos_ref, vel_ref, dt_c)
        x = meas[6:8].copy()
        rates = euler_rates(meas)
        e = x - att_ref
        base = pid_step(pid, -e, att_rate - rates[:2], dt_c)
        yaw_tq = pid_step(yaw_pid, np.array([-meas[8]]), np.array([-rates[2]]), dt_c)[0]

        added = np.zeros(2)
        trained = 0.0
        if aug is not None and not severed:
            try:
                added = aug.added_torque(x, att_ref, att_rate, dt_c)
                if not np.all(np.isfinite(added)):
                    raise ControllerFault("non-finite added torque")
            except ControllerFault as exc:
                severed = True
                added = np.zeros(2)
                events.append({"t": t, "event": "severed", "reason": str(exc)})
                log.warning("t=%.3f augmentation severed: %s", t, exc)

        cmd, total = augment_and_apply(base, added, yaw_tq, limit, thrust, params.max_thrust)
        if aug is not None and not severed:
            try:
                if aug.observe(meas[9:11].copy(), x, total):
                    trained = 1.0
            except TrainingFault as exc:
                events.append({"t": t, "event": "training_fault", "reason": str(exc)})
                log.warning("t=%.3f %s", t, exc)
            w_max = max(w_max, aug.weight_norm)

        f_hat = aug.last_f_hat if aug is not None else np.zeros(2)
        w_norm = aug.weight_norm if aug is not None else 0.0
        rows[k] = (
            t, *s, *pos_ref, *vel_ref, *att_ref, *att_rate, *e, *base, *added, *cmd.torque, cmd.thrust,
            *f_hat, w_norm, trained, float(severed), *wrench,
        )
        filled = k + 1
        if progress is not None:
            progress(k, n_steps)

        c = cmd.as_array()
        try:
            for j in range(n_sub):
                tp = t + j * dt_p
                force, torque = np.zeros(3), np.zeros(3)
                for d in dists:
                    f, tq = d.wrench(s, tp, dt_p, accel)
                    force += f
                    torque += tq
                f_peak = max(f_peak, float(np.sqrt(force @ force)))
                tq_peak = max(tq_peak, float(np.sqrt(torque @ torque)))
                wrench = np.concatenate([force, torque])
                s_new = rk4_step(s, c, wrench, params, dt_p, _prm=prm)
                accel = (s_new[3:6] - s[3:6]) / dt_p
                s = s_new
        except CrashFault as exc:
            failure = t + dt_c
            events.append({"t": failure, "event": "crash", "reason": str(exc)})
            log.error("crash at t=%.3f: %s", failure, exc)
            break

    trace = Trace(rows[:filled], COLUMNS, events)
    counters = _counters(aug)
    counters["severed"] = severed
    counters["w_norm_max"] = w_max
    counters["disturbance_force_peak"] = f_peak
    counters["disturbance_torque_peak"] = tq_peak
    lap = cfg.trajectory.lap_period
    if failure is not None and filled * dt_c <= cfg.warmup:
        report = MetricsReport.failed_report(cfg, failure, counters)
    else:
        report = compute_metrics(trace, cfg.warmup, cfg.rms_window, lap_period=lap)
        report.annotate(cfg, counters, failure)
    return trace, report
