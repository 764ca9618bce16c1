"""Figure rendering and report assembly for a fracns run directory."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

# CSV families the pipeline always writes; their absence is warned about.
PIPELINE_FILES = ("decay.csv", "picard.csv", "energy.csv", "overlap.csv",
                  "certificates.csv", "norms.csv")
# Optional families (verifier/ensemble runs); skipped silently when absent.
OPTIONAL_FILES = ("mc_tail.csv", "verify.csv")

FIG_DPI = 120


def read_csv(path: Path):
    """(header list, list of row lists as strings); raises on malformed."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise ValueError(f"{path.name}: missing header row")
    width = len(rows[0])
    for r in rows[1:]:
        if len(r) != width:
            raise ValueError(f"{path.name}: ragged row {r}")
    return rows[0], rows[1:]


def columns(header, rows, *names):
    idx = [header.index(n) for n in names]
    out = [np.array([float(r[i]) for r in rows]) for i in idx]
    return out if len(out) > 1 else out[0]


def load_params(run_dir: Path, warnings: list) -> dict:
    path = run_dir / "params.json"
    if not path.exists():
        warnings.append("params.json missing: theoretical lines omitted")
        return {}
    try:
        return json.loads(path.read_text())
    except ValueError as exc:
        warnings.append(f"params.json malformed: {exc}")
        return {}


def load_certificates(run_dir: Path) -> dict:
    header, rows = read_csv(run_dir / "certificates.csv")
    out = {}
    for r in rows:
        try:
            out[r[0]] = float(r[1])
        except ValueError:
            out[r[0]] = math.nan
    return out


def _new_fig():
    return plt.subplots(figsize=(6.4, 4.2))


def fig_decay(run_dir: Path, out_dir: Path, certs: dict) -> dict:
    header, rows = read_csv(run_dir / "decay.csv")
    t, u, h, w = columns(header, rows, "time", "u_l2", "h_l2", "w_l2")
    fig, ax = _new_fig()
    pos = u > 0
    ax.semilogy(t[pos], u[pos], label="||u||_L2", lw=1.6)
    if np.any(h > 0):
        ax.semilogy(t[h > 0], h[h > 0], label="||h||_L2", lw=1.0, ls="--")
    if np.any(w > 0):
        ax.semilogy(t[w > 0], w[w > 0], label="||w||_L2", lw=1.0, ls=":")
    fitted = certs.get("decay_rate_fitted", math.nan)
    theory = certs.get("decay_rate_theory", math.nan)
    annotation = ""
    if math.isfinite(fitted):
        annotation = f"fitted rate = {fitted:.6g}"
        ax.text(0.03, 0.06, annotation, transform=ax.transAxes, fontsize=9)
    if math.isfinite(theory) and np.any(pos):
        t0, u0 = t[pos][0], u[pos][0]
        ax.semilogy(t, u0 * np.exp(-theory * (t - t0)), c="k", lw=0.8, alpha=0.6,
                    label=f"exp(-{theory:.4g} t)")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 norm")
    ax.legend(fontsize=8)
    ax.set_title("decay")
    path = out_dir / "decay.png"
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return {"file": path.name, "fitted_rate": fitted, "theory_rate": theory,
            "annotation": annotation}


def fig_picard(run_dir: Path, out_dir: Path) -> dict:
    header, rows = read_csv(run_dir / "picard.csv")
    its, res = columns(header, rows, "iteration", "residual")
    fig, ax = _new_fig()
    pos = res > 0
    if np.any(pos):
        ax.semilogy(its[pos], res[pos], marker="o")
    else:
        ax.plot(its, res, marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("Y-norm update")
    ax.set_title("Picard contraction history")
    path = out_dir / "picard.png"
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return {"file": path.name, "iterations": int(its[-1]) if len(its) else 0}


def fig_energy(run_dir: Path, out_dir: Path) -> dict:
    header, rows = read_csv(run_dir / "energy.csv")
    t, e_w, rhs, margin = columns(header, rows, "time", "e_w", "gronwall_rhs", "margin")
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 5.4), sharex=True)
    ax1.plot(t, e_w, label="E_w", lw=1.4)
    ax1.plot(t, rhs, label="fitted Gronwall envelope", lw=1.0, ls="--")
    ax1.set_ylabel("energy")
    ax1.legend(fontsize=8)
    ax1.set_title("energy vs Gronwall envelope")
    ax2.plot(t, margin, lw=1.0, color="tab:green")
    ax2.axhline(0.0, color="k", lw=0.6)
    ax2.set_xlabel("t")
    ax2.set_ylabel("margin")
    path = out_dir / "energy.png"
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return {"file": path.name, "min_margin": float(np.min(margin)) if len(margin) else math.nan}


def fig_overlap(run_dir: Path, out_dir: Path) -> dict:
    header, rows = read_csv(run_dir / "overlap.csv")
    t, mism = columns(header, rows, "time", "mismatch")
    fig, ax = _new_fig()
    pos = mism > 0
    if np.any(pos):
        ax.semilogy(t[pos], mism[pos], marker=".")
    else:
        ax.plot(t, mism, marker=".")
    ax.set_xlabel("t")
    ax.set_ylabel("||w1 - w2||_L2")
    ax.set_title("mild/energy overlap mismatch")
    path = out_dir / "overlap.png"
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return {"file": path.name,
            "max_mismatch": float(np.max(mism)) if len(mism) else math.nan}


def fig_mc_tail(run_dir: Path, out_dir: Path, params: dict) -> dict:
    header, rows = read_csv(run_dir / "mc_tail.csv")
    lam, exc = columns(header, rows, "lambda", "exceedance")
    fig, ax = _new_fig()
    pos = exc > 0
    ax.loglog(lam[pos], exc[pos], marker="o", ls="", label="empirical exceedance")
    r_s = params.get("r_s")
    if r_s and np.any(pos):
        # Chebyshev envelope anchored at the first dyadic point above the median
        anchor_l, anchor_e = lam[pos][0], exc[pos][0]
        ax.loglog(lam, anchor_e * (anchor_l / lam) ** r_s, c="k", lw=0.8,
                  label=f"c / lambda^{r_s:g}")
    for x in lam:
        ax.axvline(x, color="0.85", lw=0.5, zorder=0)  # dyadic lambda_k = 2^k grid
    ax.set_xlabel("lambda (dyadic)")
    ax.set_ylabel("P(norm >= lambda)")
    ax.legend(fontsize=8)
    ax.set_title("tail exceedance vs Chebyshev envelope")
    path = out_dir / "mc_tail.png"
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
    return {"file": path.name}


def html_table(header, rows) -> str:
    head = "".join(f"<th>{h}</th>" for h in header)
    body = "\n".join(
        "<tr>" + "".join(f"<td>{c}</td>" for c in r) + "</tr>" for r in rows
    )
    return f"<table>\n<tr>{head}</tr>\n{body}\n</table>"


def md_table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines)


def render_report(run_dir, out_dir=None, fmt: str = "html"):
    """Render every recognized CSV family into figures plus an index page.

    Returns (index_path, warnings).  Missing or malformed files produce a
    per-file warning and a placeholder section; the report is always
    produced.  The run directory itself is never written to.
    """
    run_dir = Path(run_dir)
    if fmt not in ("html", "md"):
        raise ValueError(f"format must be html or md, got {fmt!r}")
    out_dir = Path(out_dir) if out_dir is not None else run_dir.parent / (
        run_dir.name + "_report")
    out_dir.mkdir(parents=True, exist_ok=True)

    warnings: list[str] = []
    sections: list[tuple[str, str, dict | None]] = []  # (title, body kind, info)
    params = load_params(run_dir, warnings)

    certs = {}
    if (run_dir / "certificates.csv").exists():
        try:
            certs = load_certificates(run_dir)
        except ValueError as exc:
            warnings.append(str(exc))

    renderers = [
        ("decay", "decay.csv", lambda: fig_decay(run_dir, out_dir, certs)),
        ("picard", "picard.csv", lambda: fig_picard(run_dir, out_dir)),
        ("energy", "energy.csv", lambda: fig_energy(run_dir, out_dir)),
        ("overlap", "overlap.csv", lambda: fig_overlap(run_dir, out_dir)),
    ]
    bundle = {"out_dir": out_dir, "figures": {}}
    for title, fname, fn in renderers:
        if not (run_dir / fname).exists():
            warnings.append(f"{fname} missing")
            sections.append((title, "placeholder", None))
            continue
        try:
            info = fn()
            bundle["figures"][title] = info
            sections.append((title, "figure", info))
        except (ValueError, KeyError) as exc:
            warnings.append(f"{fname} malformed: {exc}")
            sections.append((title, "placeholder", None))

    if (run_dir / "mc_tail.csv").exists():
        try:
            info = fig_mc_tail(run_dir, out_dir, params)
            bundle["figures"]["mc_tail"] = info
            sections.append(("mc tail", "figure", info))
        except (ValueError, KeyError) as exc:
            warnings.append(f"mc_tail.csv malformed: {exc}")
            sections.append(("mc tail", "placeholder", None))

    tables = []
    for fname in ("certificates.csv", "norms.csv", "verify.csv"):
        path = run_dir / fname
        if not path.exists():
            if fname != "verify.csv":  # verify.csv is optional
                warnings.append(f"{fname} missing")
                tables.append((fname, None, None))
            continue
        try:
            header, rows = read_csv(path)
            tables.append((fname, header, rows))
        except ValueError as exc:
            warnings.append(f"{fname} malformed: {exc}")
            tables.append((fname, None, None))

    index_name = "index.html" if fmt == "html" else "report.md"
    index_path = out_dir / index_name
    if fmt == "html":
        parts = ["<html><head><title>fracns run report</title>",
                 "<style>body{font-family:sans-serif;max-width:60em;margin:2em}"
                 "table{border-collapse:collapse}td,th{border:1px solid #999;"
                 "padding:2px 8px;font-size:10pt}</style></head><body>",
                 f"<h1>Run report: {run_dir.name}</h1>"]
        if params:
            parts.append("<h2>parameters</h2>")
            parts.append(html_table(list(params), [[f"{v:.6g}" if isinstance(v, float)
                                                    else v for v in params.values()]]))
        for title, kind, info in sections:
            parts.append(f"<h2>{title}</h2>")
            if kind == "figure":
                parts.append(f'<img src="{info["file"]}" width="640"/>')
                if title == "decay" and info.get("annotation"):
                    parts.append(f"<p>{info['annotation']}</p>")
            else:
                parts.append("<p><em>no data</em></p>")
        for fname, header, rows in tables:
            parts.append(f"<h2>{fname}</h2>")
            parts.append(html_table(header, rows) if header else "<p><em>no data</em></p>")
        if warnings:
            parts.append("<h2>warnings</h2><ul>")
            parts += [f"<li>{w}</li>" for w in warnings]
            parts.append("</ul>")
        parts.append("</body></html>")
        index_path.write_text("\n".join(parts))
    else:
        parts = [f"# Run report: {run_dir.name}", ""]
        if params:
            parts += ["## parameters", "",
                      md_table(list(params),
                               [[f"{v:.6g}" if isinstance(v, float) else v
                                 for v in params.values()]]), ""]
        for title, kind, info in sections:
            parts += [f"## {title}", ""]
            if kind == "figure":
                parts += [f"![{title}]({info['file']})", ""]
                if title == "decay" and info.get("annotation"):
                    parts += [info["annotation"], ""]
            else:
                parts += ["*no data*", ""]
        for fname, header, rows in tables:
            parts += [f"## {fname}", ""]
            parts += [md_table(header, rows) if header else "*no data*", ""]
        if warnings:
            parts += ["## warnings", ""] + [f"- {w}" for w in warnings] + [""]
        index_path.write_text("\n".join(parts))

    bundle["index"] = index_path
    bundle["warnings"] = warnings
    return index_path, warnings
