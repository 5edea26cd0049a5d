import logging
import os

import numpy as np
import pandas as pd

from dynamics import EnvelopeState

FLOAT_FORMAT = "%.8e"
PLOT_ROWS = 2000


def _complex_columns(prefix_pairs):
    columns = {}
    for name, values in prefix_pairs:
        values = np.asarray(values, dtype=complex)
        columns[f"re_{name}"] = values.real
        columns[f"im_{name}"] = values.imag
    return columns


def trajectory_frame(trajectory):
    """t_s, real/imaginary pairs of every envelope component, then the normalised powers."""
    columns = {"t_s": trajectory.times}
    columns.update(_complex_columns((name, trajectory.component(name)) for name in EnvelopeState.field_names()))
    columns["p_out_left_probe_norm"] = trajectory.left_output_power
    columns["phonon_norm"] = trajectory.phonon_signal
    columns["p_out_right_s_norm"] = trajectory.right_stokes_power
    columns["p_out_right_as_norm"] = trajectory.right_antistokes_power
    return pd.DataFrame(columns)


def sweep_frame(rows):
    records = []
    for row in rows:
        record = {"delta_rad_s": row.delta}
        if row.error is None:
            r = row.response
            for name, value in (("qplus", r.Qplus), ("d", r.d), ("a1p", r.a1plus), ("a1m", r.a1minus),
                                ("a2p", r.a2plus), ("a2m", r.a2minus)):
                record[f"re_{name}"] = value.real
                record[f"im_{name}"] = value.imag
            left, antistokes, stokes = row.outputs.normalized_powers(r.probe_amplitude)
            record.update(p_out_left_probe_norm=left, p_out_right_as_norm=antistokes, p_out_right_s_norm=stokes)
        record["error"] = row.error or ""
        records.append(record)
    columns = [
        "delta_rad_s", "re_qplus", "im_qplus", "re_d", "im_d", "re_a1p", "im_a1p", "re_a1m", "im_a1m",
        "re_a2p", "im_a2p", "re_a2m", "im_a2m", "p_out_left_probe_norm", "p_out_right_as_norm",
        "p_out_right_s_norm", "error",
    ]
    return pd.DataFrame.from_records(records, columns=columns)


def stability_frame(report, eigenvalues, eigen_stable):
    """One row: Routh-Hurwitz verdict and margin, the six eigenvalues, the Routh first column."""
    eigenvalues = np.sort_complex(np.asarray(eigenvalues))
    record = {
        "verdict": report.verdict,
        "margin": report.margin,
        "eigen_stable": bool(eigen_stable),
        "max_re_lambda": float(np.max(eigenvalues.real)),
    }
    for index, value in enumerate(eigenvalues, start=1):
        record[f"re_lambda{index}"] = value.real
        record[f"im_lambda{index}"] = value.imag
    for index, value in enumerate(report.first_column):
        record[f"routh{index}"] = value
    return pd.DataFrame([record])


def memory_summary_frame(result, config_hash):
    return pd.DataFrame(
        [
            {
                "config_hash": config_hash,
                "retrieval_efficiency": result.retrieval_efficiency,
                "storage_peak": result.storage_peak,
                "t_wr_s": result.t_wr,
                "t_rd_s": result.t_rd,
                "read_window_start_s": result.read_window[0],
                "read_window_end_s": result.read_window[1],
            }
        ]
    )


def transduction_summary_frame(result, config_hash):
    return pd.DataFrame(
        [
            {
                "config_hash": config_hash,
                "detuning_case": result.detuning_case,
                "antistokes_peak": result.antistokes_peak,
                "stokes_peak": result.stokes_peak,
                "phonon_read_peak": result.phonon_read_peak,
                "omega_antistokes_rad_s": result.omega_antistokes,
                "omega_stokes_rad_s": result.omega_stokes,
            }
        ]
    )


def scan_frame(rows, scan_key):
    metric_names = []
    for row in rows:
        for name in row.metrics:
            if name not in metric_names:
                metric_names.append(name)
    records = []
    for row in rows:
        record = {"index": row.index, scan_key: row.value}
        record.update({name: row.metrics.get(name, np.nan) for name in metric_names})
        record["error"] = row.error or ""
        records.append(record)
    return pd.DataFrame.from_records(records, columns=["index", scan_key, *metric_names, "error"])


def verify_frame(checks):
    return pd.DataFrame.from_records(
        [
            {"check": c.name, "passed": c.passed, "value": c.value, "tolerance": c.tolerance, "detail": c.detail}
            for c in checks
        ],
        columns=["check", "passed", "value", "tolerance", "detail"],
    )


def plot_frame(frame, max_rows=PLOT_ROWS):
    stride = max(1, -(-len(frame) // max_rows))
    return frame.iloc[::stride].reset_index(drop=True)


def write_csv(frame, out_dir, filename):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logging.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_resolved_config(config, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "resolved_config.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(config.resolved_config_text())
    return path
