"""Tracking-error summaries and controller comparison tables."""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..nn_core import ConfigurationError

METRICS = ("attitude_l2_deg", "position_l2_cm", "velocity_l2_cm_s", "std_roll_deg", "std_pitch_deg")


@dataclass
class MetricsReport:
    attitude_l2_deg: float = 0.0
    position_l2_cm: float = 0.0
    velocity_l2_cm_s: float = 0.0
    std_roll_deg: float = 0.0
    std_pitch_deg: float = 0.0
    moving_rms_deg: list = field(default_factory=list)
    moving_rms_window_s: float = 2.0
    per_lap_rmse_deg: list = field(default_factory=list)
    warmup_s: float = 0.0
    samples: int = 0
    failed: bool = False
    failure_time: float | None = None
    name: str = ""
    controller: str = ""
    seed: int | None = None
    counters: dict = field(default_factory=dict)

    def annotate(self, cfg, counters: dict, failure=None):
        self.name, self.controller, self.seed = cfg.name, cfg.controller, cfg.seed
        self.counters = dict(counters)
        if failure is not None:
            self.failed, self.failure_time = True, float(failure)
        return self

    @classmethod
    def failed_report(cls, cfg, failure, counters):
        rep = cls(attitude_l2_deg=np.inf, position_l2_cm=np.inf, velocity_l2_cm_s=np.inf,
                  std_roll_deg=np.inf, std_pitch_deg=np.inf, warmup_s=cfg.warmup,
                  moving_rms_window_s=cfg.rms_window)
        return rep.annotate(cfg, counters, failure)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        # inf is legal in Python's json dialect; failed runs use it
        return json.dumps(self.to_dict(), indent=2, default=float)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))


def moving_rms(values, window: int) -> np.ndarray:
    """RMS over each full window; length ``len(values) - window + 1``."""
    v = np.asarray(values, dtype=float)
    if not 1 <= window <= v.size:
        raise ConfigurationError(f"window {window} must lie in [1, {v.size}]")
    c = np.concatenate([[0.0], np.cumsum(v * v)])
    mean_sq = (c[window:] - c[:-window]) / window
    return np.sqrt(np.maximum(mean_sq, 0.0))


def moving_std(values, window: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    win = np.lib.stride_tricks.sliding_window_view(v, window)
    return win.std(axis=1)


def lap_rmse(t, err_norm, period: float, t_end: float, warmup: float = 0.0) -> list:
    """RMS of ``err_norm`` within each complete lap ``[k P, (k+1) P)``.

    Laps are counted from t = 0; samples before ``warmup`` are left out, and a
    lap with no remaining samples is skipped.
    """
    t = np.asarray(t, dtype=float)
    out = []
    n_laps = int(np.floor(t_end / period + 1e-9))
    for k in range(n_laps):
        sel = (t >= k * period) & (t < (k + 1) * period) & (t >= warmup)
        if np.any(sel):
            out.append(float(np.sqrt(np.mean(err_norm[sel] ** 2))))
    return out


def compute_metrics(trace, warmup: float, window: float = 2.0, lap_period=None) -> MetricsReport:
    """Summarise the post-warmup part of a trace.

    Angles are converted to degrees and distances to centimetres here; the
    trace itself stays in SI units.
    """
    t = trace["t"]
    sel = t >= warmup - 1e-12
    if not np.any(sel):
        raise ConfigurationError("no trace samples after warmup")
    e_att = np.rad2deg(np.column_stack([trace["e_roll"][sel], trace["e_pitch"][sel]]))
    pos = np.column_stack([trace[c][sel] for c in ("x", "y", "z")])
    pos_ref = np.column_stack([trace[c][sel] for c in ("x_ref", "y_ref", "z_ref")])
    vel = np.column_stack([trace[c][sel] for c in ("vx", "vy", "vz")])
    vel_ref = np.column_stack([trace[c][sel] for c in ("vx_ref", "vy_ref", "vz_ref")])

    att_norm = np.linalg.norm(e_att, axis=1)
    ts = t[sel]
    dt = float(np.median(np.diff(t))) if t.size > 1 else 1.0
    w = int(round(window / dt))
    w = min(max(w, 1), att_norm.size)

    per_lap = []
    if lap_period:
        t_end = t[-1] + dt
        per_lap = lap_rmse(ts, att_norm, lap_period, t_end, warmup)

    return MetricsReport(
        attitude_l2_deg=float(np.mean(att_norm)),
        position_l2_cm=float(np.mean(np.linalg.norm(pos - pos_ref, axis=1)) * 100.0),
        velocity_l2_cm_s=float(np.mean(np.linalg.norm(vel - vel_ref, axis=1)) * 100.0),
        std_roll_deg=float(np.std(e_att[:, 0])),
        std_pitch_deg=float(np.std(e_att[:, 1])),
        moving_rms_deg=moving_rms(att_norm, w).tolist(),
        moving_rms_window_s=float(window),
        per_lap_rmse_deg=per_lap,
        warmup_s=float(warmup),
        samples=int(att_norm.size),
    )


def plot_data(trace, report: MetricsReport) -> str:
    """CSV of time, moving RMS and a one-sigma band of the attitude error norm."""
    t = trace["t"]
    sel = t >= report.warmup_s - 1e-12
    norm = np.rad2deg(np.hypot(trace["e_roll"][sel], trace["e_pitch"][sel]))
    rms = np.asarray(report.moving_rms_deg)
    w = norm.size - rms.size + 1
    sd = moving_std(norm, w)
    t_end = t[sel][w - 1:]
    buf = io.StringIO()
    buf.write("t,moving_rms_deg,band_low_deg,band_high_deg\n")
    np.savetxt(buf, np.column_stack([t_end, rms, np.maximum(rms - sd, 0.0), rms + sd]),
               fmt="%.10g", delimiter=",")
    return buf.getvalue()


def percent_decrease(reference: float, value: float) -> float:
    """How much lower ``value`` is than ``reference``, in percent."""
    if reference == value:
        return 0.0
    if reference == 0 or not np.isfinite(reference):
        return float("nan")
    return 100.0 * (reference - value) / reference


@dataclass
class Comparison:
    labels: list
    values: dict  # metric -> list aligned with labels
    decreases: dict  # (metric, ref_label, label) -> percent

    def table(self) -> str:
        width = max(12, *(len(lab) + 2 for lab in self.labels))
        lines = ["metric".ljust(20) + "".join(lab.rjust(width) for lab in self.labels)]
        for m in METRICS:
            lines.append(m.ljust(20) + "".join(f"{v:{width}.3f}" for v in self.values[m]))
        lines.append("")
        lines.append("percent decrease of column vs row (attitude_l2_deg)")
        lines.append("".ljust(20) + "".join(lab.rjust(width) for lab in self.labels))
        for ref in self.labels:
            cells = []
            for lab in self.labels:
                cells.append("-".rjust(width) if lab == ref else
                             f"{self.decreases[('attitude_l2_deg', ref, lab)]:{width - 1}.1f}%")
            lines.append(ref.ljust(20) + "".join(cells))
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["metric", "reference", "label", "reference_value", "value", "percent_decrease"])
        idx = {lab: i for i, lab in enumerate(self.labels)}
        for (m, ref, lab), pct in self.decreases.items():
            wr.writerow([m, ref, lab, repr(self.values[m][idx[ref]]), repr(self.values[m][idx[lab]]), repr(pct)])
        return buf.getvalue()


def compare(reports, labels=None) -> Comparison:
    """Metric values side by side plus pairwise percent decreases."""
    reports = list(reports)
    if len(reports) < 2:
        raise ConfigurationError("compare needs at least two reports")
    if labels is None:
        labels = [r.controller or r.name or f"run{i}" for i, r in enumerate(reports)]
        if len(set(labels)) < len(labels):
            labels = [f"{lab}#{i}" for i, lab in enumerate(labels)]
    values = {m: [float(getattr(r, m)) for r in reports] for m in METRICS}
    decreases = {}
    for m in METRICS:
        for i, j in itertools.permutations(range(len(reports)), 2):
            decreases[(m, labels[i], labels[j])] = percent_decrease(values[m][i], values[m][j])
    return Comparison(list(labels), values, decreases)


def mean_report(reports, label="") -> MetricsReport:
    """Average of the scalar metrics over several runs (e.g. seeds)."""
    reports = list(reports)
    out = MetricsReport(name=label, controller=reports[0].controller)
    for m in METRICS:
        setattr(out, m, float(np.mean([getattr(r, m) for r in reports])))
    out.failed = any(r.failed for r in reports)
    out.samples = int(sum(r.samples for r in reports))
    return out
