"""Command line front end: ``mcissa decompose | verify | synth``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
check failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    eigenvector_weights,
    frequency_contributions,
    participation,
    series_subcomponent_contributions,
    subcomponent_contributions,
)
from .decomposition import RESIDUAL, Decomposition, GroupingSpec, uniqueness_check
from .errors import MCissaError, NumericalError, ParameterError
from .moments import check_window, circulant_toeplitz_distance
from .panel import TimeSeriesPanel, demean, format_float, format_panel, load_panel, rebase_index
from .spectral import RealEigenbasis, eigen_residuals, orthonormality_error, phase_segments
from .synth import generate, load_recipe, population_autocov_ar1

__all__ = ["RunConfig", "cmd_decompose", "cmd_verify", "cmd_synth", "main"]


EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3
EMIT_CHOICES = ("components", "elementary", "tables", "phase", "uniqueness")
DEFAULT_EMIT = ("components", "tables", "phase")
DEFAULT_GROUPS = "trend:k=1"
DECAY_WINDOWS = (64, 128, 256, 512)


@dataclass
class RunConfig:
    input: str
    window_length: int
    groups: str = DEFAULT_GROUPS
    demean: bool = True
    trend_level: bool = True
    rebase: str | None = None
    out_dir: str = "mcissa-out"
    emit: tuple = DEFAULT_EMIT
    inject_fault: str | None = None


@dataclass
class _Outputs:
    files: dict = field(default_factory=dict)

    def add(self, name: str, text: str):
        self.files[name] = text

    def add_rows(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
        self.add(name, buf.getvalue())

    def write(self, out_dir: Path):
        for name, text in self.files.items():
            path = out_dir / name
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _parse_rebase(text: str, panel: TimeSeriesPanel):
    """``start:stop`` positions, or a time-label prefix such as ``2016``."""
    if ":" in text:
        a, b = text.split(":", 1)
        try:
            return int(a), int(b)
        except ValueError:
            raise ParameterError(f"bad rebase range {text!r}; expected START:STOP") from None
    if panel.time_labels is None:
        raise ParameterError("label-prefix rebase needs a 'date' column")
    hits = [t for t, lab in enumerate(panel.time_labels) if lab.startswith(text)]
    if not hits:
        raise ParameterError(f"no time label starts with {text!r}")
    if hits != list(range(hits[0], hits[-1] + 1)):
        raise ParameterError(f"time labels starting with {text!r} are not contiguous")
    return hits[0], hits[-1] + 1


def _prepare(config: RunConfig):
    """Load and pre-transform the input; returns (as-loaded-or-rebased panel, analysed panel)."""
    panel = load_panel(config.input)
    L = check_window(config.window_length, panel.T)
    if config.rebase:
        panel = rebase_index(panel, _parse_rebase(config.rebase, panel))
    work = demean(panel) if config.demean else panel
    return panel, work, L


def _inject(fit: Decomposition, fault: str):
    if fault != "basis-sign":
        raise ParameterError(f"unknown fault {fault!r}")
    V = fit.basis.vectors.copy()
    r = int(np.argmax(np.abs(V[:, 0])))
    V[r, 0] = -V[r, 0]
    fit.basis = RealEigenbasis(V, fit.basis.eigenvalues, fit.basis.L, fit.basis.M)
    fit.scores = V.T @ fit.trajectory.data
    fit._sub_cache.clear()


def cmd_decompose(config: RunConfig) -> int:
    """Decompose a panel and write components, tables, phase data and a manifest."""
    emit = set(config.emit)
    unknown = emit - set(EMIT_CHOICES)
    if unknown:
        raise ParameterError(f"unknown --emit item(s): {', '.join(sorted(unknown))}")
    _, work, L = _prepare(config)
    grouping = GroupingSpec.parse(config.groups).resolve(L, work.M)

    fit = Decomposition(work, L)
    out = _Outputs()
    names = list(work.series_names)
    K = fit.n_frequencies
    period = fit.period

    if "components" in emit:
        arrays = fit.group_components(grouping)
        level_group = None
        if config.demean and config.trend_level:
            level_group = next(n for n, pairs in grouping.items() if (1, 1) in pairs)
        for name, arr in arrays.items():
            if name == level_group:
                arr = arr + work.means[:, None]
            out.add(f"components/{name}.csv", format_panel(work, arr))

    if "elementary" in emit:
        for k in range(1, K + 1):
            subs = fit.subcomponents(k)
            for m in range(1, fit.M + 1):
                out.add(f"elementary/k{k:03d}_m{m:02d}.csv", format_panel(work, subs[m - 1]))

    if "tables" in emit:
        table = frequency_contributions(fit.spectrum)
        out.add_rows("contributions.csv", ["k", "period", "share"], table.rows())
        sub_header = ["k", "period"] + [f"m{m}" for m in range(1, fit.M + 1)]
        rows, wrows, srows, prows = [], [], [], []
        pi = participation(fit.basis, fit.spectrum)
        for k in range(1, K + 1):
            if fit.spectrum.eigenvalues[k - 1].sum() > 0:
                rows.append([k, period(k)] + list(subcomponent_contributions(fit.spectrum, k)))
            else:
                rows.append([k, period(k)] + ["nan"] * fit.M)
            shares = series_subcomponent_contributions(fit, None, k)
            for m in range(1, fit.M + 1):
                lam = fit.spectrum.eigenvalues[k - 1, m - 1]
                wrows.append([k, period(k), m, lam] + list(eigenvector_weights(fit.spectrum, k, m)))
                srows.append([k, period(k), m] + list(shares[:, m - 1]))
                prows.append([k, m] + list(pi[k - 1, m - 1]))
        out.add_rows("subcomponents.csv", sub_header, rows)
        out.add_rows("eigenvector_weights.csv", ["k", "period", "m", "eigenvalue"] + names, wrows)
        out.add_rows("series_subcomponents.csv", ["k", "period", "m"] + names, srows)
        out.add_rows("participation.csv", ["k", "m"] + names, prows)

    if "phase" in emit:
        ks = sorted({k for n, pairs in grouping.items() if n != RESIDUAL for k, _ in pairs}) or list(range(1, K + 1))
        prow, srow = [], []
        for k in ks:
            for m in range(1, fit.M + 1):
                seg = phase_segments(fit.basis, fit.spectrum, k, m)
                e = fit.spectrum.eigenvectors[k - 1][:, m - 1]
                for i, name in enumerate(names):
                    prow.append([k, m, name, float(abs(e[i])), float(seg.phases[i])])
                for lag in range(L):
                    srow.append([k, m, lag + 1] + [float(v) for v in seg.segments[:, lag]])
        out.add_rows("phase.csv", ["k", "m", "series", "modulus", "phase"], prow)
        out.add_rows("segments.csv", ["k", "m", "lag"] + names, srow)

    if "uniqueness" in emit:
        rep = uniqueness_check(work, L, fit=fit)
        urows = [[names[i], k, float(rep.discrepancy[i, k - 1]), float(rep.tolerance[i])]
                 for i in range(fit.M) for k in range(1, K + 1)]
        out.add_rows("uniqueness.csv", ["series", "k", "discrepancy", "tolerance"], urows)

    with open(config.input, "rb") as fh:
        input_hash = _sha256(fh.read())
    manifest = {
        "tool": "mcissa",
        "version": __version__,
        "numpy": np.__version__,
        "input": {"path": config.input, "sha256": input_hash, "M": work.M, "T": work.T,
                  "series": names},
        "window_length": L,
        "demean": config.demean,
        "trend_level": config.trend_level,
        "rebase": config.rebase,
        "groups": config.groups,
        "resolved_groups": grouping.to_json(),
        "emit": sorted(emit),
        "files": {n: _sha256(t.encode("utf-8")) for n, t in sorted(out.files.items())},
    }
    out.add("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    out.write(Path(config.out_dir))
    return EXIT_OK


def _verify_rows(work: TimeSeriesPanel, L: int, fault: str | None):
    fit = Decomposition(work, L)
    if fault:
        _inject(fit, fault)
    x = work.values
    scale = max(float(np.abs(x).max()), np.finfo(float).tiny)
    rows = []

    rows.append(("orthonormality max|V'V-I|", orthonormality_error(fit.basis.vectors), 1e-10))

    if L * fit.M <= 2048:
        res = eigen_residuals(fit.circulant, fit.basis)
        rows.append(("eigen relation |S_C v - lambda v|/(1+lambda)", float(res.max()), 1e-8))

    total = fit.reconstruct_columns(range(L * fit.M))
    rows.append(("completeness max rel error", float(np.abs(total - x).max()) / scale, 1e-8))

    # Pairing is enforced by construction, so check it on independently computed raw blocks.
    raw = np.fft.fft(fit.circulant.omegas, axis=0)
    raw = 0.5 * (raw + np.conj(np.swapaxes(raw, 1, 2)))
    lam = np.linalg.eigvalsh(raw)[:, ::-1]
    pair_err = 0.0
    for k in range(2, (L + 1) // 2 + 1):
        d = np.abs(lam[k - 1] - lam[L + 1 - k]) / (1 + np.abs(lam[k - 1]))
        pair_err = max(pair_err, float(d.max()))
    rows.append(("eigenvalue pairing", pair_err, 1e-8))

    target = L * np.trace(fit.autocov.gammas[0])
    trace_err = abs(fit.spectrum.eigenvalues.sum() - target) / max(abs(target), np.finfo(float).tiny)
    rows.append(("eigenvalue sum vs L trace(Gamma_0), rel", float(trace_err), 1e-8))

    rep = uniqueness_check(work, L, fit=fit)
    ratio = float((rep.discrepancy / rep.tolerance[:, None]).max())
    rows.append(("uniqueness max discrepancy", rep.worst, float(rep.tolerance.min()), ratio <= 1.0))

    dists = [circulant_toeplitz_distance(population_autocov_ar1(0.9, 1.0, 1, w)) for w in DECAY_WINDOWS]
    decreasing = all(b < a for a, b in zip(dists, dists[1:])) and dists[-1] < 0.5 * dists[0]
    label = "circulant-Toeplitz decay, AR(1) 0.9, L=" + "/".join(map(str, DECAY_WINDOWS)) + " (last/first)"
    rows.append((label, dists[-1] / dists[0], 0.5, decreasing))
    return rows


def cmd_verify(config: RunConfig, stream=None) -> int:
    """Run the invariant checks on an input panel and print a pass/fail table."""
    stream = stream or sys.stdout
    _, work, L = _prepare(config)
    rows = _verify_rows(work, L, config.inject_fault)
    width = max(len(r[0]) for r in rows)
    ok_all = True
    print(f"{'check':<{width}}  {'measured':>12}  {'tolerance':>10}  status", file=stream)
    for row in rows:
        name, value, tol = row[:3]
        ok = row[3] if len(row) > 3 else value <= tol
        ok_all &= bool(ok)
        shown = "0" if value == 0 else f"{value:.3e}"
        print(f"{name:<{width}}  {shown:>12}  {tol:>10.1e}  {'PASS' if ok else 'FAIL'}", file=stream)
    print("all checks passed" if ok_all else "some checks FAILED", file=stream)
    return EXIT_OK if ok_all else EXIT_NUMERICAL


def cmd_synth(recipe_path, M: int, T: int, out_dir, seed: int | None = None) -> int:
    """Write the mixed panel and one ground-truth CSV per recipe component."""
    recipe = load_recipe(recipe_path)
    if seed is not None:
        recipe = replace(recipe, seed=seed)
    panel, truths = generate(recipe, M, T)
    out = _Outputs()
    out.add("panel.csv", format_panel(panel))
    for name, truth in truths.items():
        out.add(f"truth/{name}.csv", format_panel(truth))
    with open(recipe_path, "rb") as fh:
        recipe_hash = _sha256(fh.read())
    manifest = {
        "tool": "mcissa",
        "version": __version__,
        "recipe": {"path": str(recipe_path), "sha256": recipe_hash},
        "seed": recipe.seed,
        "M": M,
        "T": T,
        "generator": "numpy PCG64, seed + series index",
        "files": {n: _sha256(t.encode("utf-8")) for n, t in sorted(out.files.items())},
    }
    out.add("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    out.write(Path(out_dir))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcissa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", "-i", required=True, help="panel CSV (rows = time points)")
        p.add_argument("--window-length", "-L", type=int, required=True)
        p.add_argument("--no-demean", dest="demean", action="store_false")
        p.add_argument("--rebase", help="START:STOP positions or a time-label prefix; rescales to mean 100")

    p = sub.add_parser("decompose", help="decompose a panel into grouped components")
    common(p)
    p.add_argument("--groups", default=DEFAULT_GROUPS,
                   help="e.g. 'trend:k=1; cycle:period=96 | period=48; seasonal:period=12'")
    p.add_argument("--out-dir", "-o", default="mcissa-out")
    p.add_argument("--emit", default=",".join(DEFAULT_EMIT),
                   help=f"comma list from {', '.join(EMIT_CHOICES)}")
    p.add_argument("--no-trend-level", dest="trend_level", action="store_false",
                   help="do not add series means back to the trend group")

    p = sub.add_parser("verify", help="check the decomposition invariants on a panel")
    common(p)
    p.add_argument("--inject-fault", help=argparse.SUPPRESS)

    p = sub.add_parser("synth", help="generate a synthetic panel from a recipe")
    p.add_argument("--recipe", "-r", required=True)
    p.add_argument("--series", "-M", type=int, required=True)
    p.add_argument("--length", "-T", type=int, required=True)
    p.add_argument("--out-dir", "-o", required=True)
    p.add_argument("--seed", type=int, help="override the recipe seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args.recipe, args.series, args.length, args.out_dir, args.seed)
        config = RunConfig(
            input=args.input,
            window_length=args.window_length,
            demean=args.demean,
            rebase=args.rebase,
        )
        if args.command == "decompose":
            config.groups = args.groups
            config.out_dir = args.out_dir
            config.trend_level = args.trend_level
            config.emit = tuple(e.strip() for e in args.emit.split(",") if e.strip())
            return cmd_decompose(config)
        config.inject_fault = args.inject_fault
        return cmd_verify(config)
    except NumericalError as exc:
        print(f"mcissa: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MCissaError as exc:
        print(f"mcissa: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"mcissa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
