"""Regularization sweeps: one reference run, one run per gamma, error tables."""
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .exceptions import ClosureError
from .transport import GridState, error_metrics, observed_order, run_simulation, write_checkpoint

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("gamma", "H_gamma", "nu_H", "L2", "nu_L2", "Linf", "nu_Linf")

_DECADE = re.compile(r"^\s*(\d*\.?\d+)?[eE]([+-]?\d+(?:\.\d+)?)\s*$")


def parse_gamma(text):
    """Parse a gamma value; ``1e-9.25`` means ``10**-9.25``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(text)
    except ValueError:
        pass
    m = _DECADE.match(str(text))
    if not m:
        raise ValueError(f"cannot parse gamma value {text!r}")
    mant = float(m.group(1)) if m.group(1) else 1.0
    return mant * 10.0 ** float(m.group(2))


def parse_gamma_list(text):
    if isinstance(text, (list, tuple)):
        return [parse_gamma(t) for t in text]
    return [parse_gamma(t) for t in str(text).replace(";", ",").split(",") if t.strip()]


@dataclass
class SweepRecord:
    gamma: float
    H_gamma: float = None
    nu_H: float = None
    L2: float = None
    nu_L2: float = None
    Linf: float = None
    nu_Linf: float = None
    failed: bool = False
    error: str = None
    stats: dict = field(default_factory=dict)


def _run_gamma(cfg, gamma, ref_coefficients, ref_time, checkpoint):
    ctx = cfg.context()
    ref = GridState(cfg.n_cells, cfg.dg_degree, ref_coefficients, ref_time)
    try:
        state = run_simulation(ctx, cfg.with_gamma(gamma))
        m = error_metrics(ctx, state, ref, gamma)
    except ClosureError as err:
        logger.error("gamma=%g failed: %s", gamma, err)
        return SweepRecord(gamma, failed=True, error=str(err))
    if checkpoint:
        write_checkpoint(state, checkpoint, {"gamma": repr(gamma)})
    return SweepRecord(gamma, m.H_gamma, None, m.L2, None, m.Linf, None, stats=state.stats)


def _checkpoint_name(directory, gamma):
    if directory is None:
        return None
    tag = "ref" if gamma == 0 else f"gamma_{gamma:.6e}"
    return os.path.join(directory, f"checkpoint_{tag}.csv")


def fill_orders(records):
    """Set the ``nu_*`` fields from consecutive records (in place)."""
    for metric, nu in (("H_gamma", "nu_H"), ("L2", "nu_L2"), ("Linf", "nu_Linf")):
        pairs = [(r.gamma, getattr(r, metric) if getattr(r, metric) is not None else float("nan"))
                 for r in records]
        for rec, order in zip(records[1:], observed_order(pairs)):
            setattr(rec, nu, order)
        if records:
            setattr(records[0], nu, None)
    return records


def run_sweep(cfg, gamma_list, workers=1, out_dir=None):
    """Reference run plus one regularized run per gamma.

    Records come back sorted by decreasing gamma whatever the completion
    order. A failed gamma run gives a record with ``failed=True``; a failed
    reference run raises. With ``out_dir`` every run's final state is written
    there as a CSV checkpoint.
    """
    gammas = [float(g) for g in gamma_list]
    if any(g <= 0 for g in gammas):
        raise ValueError("gamma values must be positive")
    if any(a <= b for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma_list must be strictly decreasing")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    ctx = cfg.context()
    ref = run_simulation(ctx, cfg.with_gamma(0.0))
    if out_dir is not None:
        write_checkpoint(ref, _checkpoint_name(out_dir, 0.0), {"gamma": "0.0"})

    jobs = [(cfg, g, ref.coefficients, ref.time, _checkpoint_name(out_dir, g)) for g in gammas]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_gamma, *job) for job in jobs]
            records = [f.result() for f in futures]
    else:
        records = [_run_gamma(*job) for job in jobs]
    records.sort(key=lambda r: -r.gamma)
    fill_orders(records)
    return records, ref


def format_gamma(gamma, shorthand=True):
    """``1e-06`` for whole decades; ``1e-9.25`` shorthand for fractional ones."""
    e = math.log10(gamma)
    if abs(e - round(e)) < 1e-9:
        return f"{gamma:g}"
    if shorthand and abs(e * 100 - round(e * 100)) < 1e-6:
        return f"1e{e:.2f}".rstrip("0").rstrip(".")
    return repr(gamma)


def _num(x):
    return "" if x is None else f"{x:.3e}"


def _nu(x):
    return "" if x is None else f"{x:.2f}"


def emit_table(records, format="csv"):
    """Render records as CSV (fixed columns) or a markdown table."""
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in records:
            lines.append(",".join([
                format_gamma(r.gamma, shorthand=False),
                _num(r.H_gamma), _nu(r.nu_H), _num(r.L2), _nu(r.nu_L2), _num(r.Linf), _nu(r.nu_Linf),
            ]))
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [
            "| gamma | H_gamma | nu | L2 | nu | Linf | nu |",
            "|:--|--:|--:|--:|--:|--:|--:|",
        ]
        for r in records:
            if r.failed:
                lines.append(f"| {format_gamma(r.gamma)} | failed | | | | | |")
                continue
            cells = [format_gamma(r.gamma), _num(r.H_gamma), _nu(r.nu_H) or "--", _num(r.L2),
                     _nu(r.nu_L2) or "--", _num(r.Linf), _nu(r.nu_Linf) or "--"]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {format!r}")


def results_json(cfg, records):
    """Machine-readable sweep results; deterministic for a given configuration."""
    cfg_dict = asdict(cfg)
    return json.dumps(
        {"config": cfg_dict, "records": [asdict(r) for r in records]},
        indent=2, sort_keys=True,
    )
