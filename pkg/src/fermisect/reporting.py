"""Report emission: CSV (the contract), JSON, and a rendered figure.

CSV bytes are a pure function of the report: fixed header, shortest-repr
floats, newline-terminated rows, empty field for null ratios.
"""

from __future__ import annotations

import json
import math

from .harness import CSV_HEADER, CSV_VERSION, ScalingReport


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x)) if isinstance(x, float) else str(x)


def report_csv(report: ScalingReport) -> str:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(",".join([
            str(CSV_VERSION), report.experiment, str(r.j), _fmt(report.M),
            _fmt(r.ell), _fmt(r.Lambda), _fmt(r.value), _fmt(r.bound),
            _fmt(r.ratio),
        ]))
    return "\n".join(lines) + "\n"


def write_csv(report: ScalingReport, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(report_csv(report))


def write_json(report: ScalingReport, path):
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_csv(path) -> ScalingReport:
    from .harness import ScanRow

    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("unrecognized report header")
    rows = []
    experiment, M = "", 0.0
    for ln in lines[1:]:
        parts = ln.split(",")
        experiment = parts[1]
        M = float(parts[3]) if parts[3] else 0.0
        ratio = None if parts[8] == "" else float(parts[8])
        rows.append(ScanRow(j=int(parts[2]), ell=float(parts[4]),
                            Lambda=float(parts[5]), value=float(parts[6]),
                            bound=float(parts[7]), ratio=ratio))
    report = ScalingReport(experiment=experiment, M=M, rows=rows)
    try:
        from .harness import fit_exponent
        report.fitted_slope, report.slope_stderr = fit_exponent(rows)
    except Exception:
        pass
    return report


def render_figure(report: ScalingReport, path, dpi=150):
    """Log-log plot of value and bound against 1/ell, with the fitted
    exponent annotated, written next to the delimited output."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [1.0 / r.ell for r in report.rows if r.value > 0]
    ys = [r.value for r in report.rows if r.value > 0]
    bs = [r.bound for r in report.rows if r.value > 0]
    fig, (ax, ax2) = plt.subplots(
        1, 2, figsize=(9, 3.6), constrained_layout=True)
    if xs:
        ax.loglog(xs, ys, "o-", label="value")
        ax.loglog(xs, bs, "s--", label="bound (const = 1)", alpha=0.7)
    ax.set_xlabel(r"$1/\ell$")
    ax.set_ylabel("count / norm")
    title = report.experiment
    if report.fitted_slope is not None:
        title += f"   slope = {report.fitted_slope:.3f}"
        if report.slope_stderr is not None:
            title += f" $\\pm$ {report.slope_stderr:.3f}"
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)

    rx = [r.j for r in report.rows if r.ratio]
    ry = [r.ratio for r in report.rows if r.ratio]
    if rx:
        ax2.plot(rx, ry, "o-")
        ax2.set_yscale("log")
    ax2.set_xlabel("scale j")
    ax2.set_ylabel("value / bound")
    ax2.set_title("ratio per scale", fontsize=10)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
