"""Command-line surface: run experiment configs, list bundled recipes.

Configs are TOML files with three sections: [experiment] metadata,
[recipe] (what datum to synthesize, plus an optional [grid]), and a list
of [[analysis]] tables naming the checks to run.  Every run writes its
artifacts (CSV/JSON per analysis) plus a manifest.json into the output
directory; identical config and seed give byte-identical CSV files.

Exit codes: 0 all analyses passed, 1 at least one certification failed,
2 configuration or execution error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .certify import equivalence_report, fit_rate, inverse_wiegner_check
from .dyadic import (DEFAULT_WINDOW, besov_seminorm, dyadic_blocks,
                     script_A_membership, spectrum_to_csv_rows)
from .errors import ConfigInvalid, SpecDecayError
from .fields import Grid, GridField, RadialSpectralProfile, norms
from .heat import decay_profile, fourier_splitting_check
from .io import save_grid_field, write_csv
from .nse import (SimConfig, energy_audit, evolve_nse, gradient_decay_check,
                  liminf_check, wiegner_difference_check)
from .synthesis import build_recipe_with_report

ENV_THREADS = "SPECDECAY_THREADS"

_ANALYSIS_KINDS = ("blocks", "besov", "membership", "heat", "splitting",
                   "nse", "certify", "equivalence")

_TOP_KEYS = {"experiment", "recipe", "grid", "analysis"}
_EXPERIMENT_KEYS = {"name", "seed", "claim"}
_RECIPE_KEYS = {"kind", "dim", "params", "window", "alpha", "epsilon", "j0", "source"}
_GRID_KEYS = {"dim", "box_length", "resolution"}
_ANALYSIS_KEYS = {
    "blocks": {"kind", "j_min", "j_max", "mode", "alpha"},
    "besov": {"kind", "alpha", "j_min", "j_max", "expect_divergent"},
    "membership": {"kind", "alpha", "M", "j_min", "j_max",
                   "expect_in_script_A", "expect_in_V_alpha", "expect_in_besov"},
    "heat": {"kind", "t_min", "t_max", "per_decade", "checks", "alpha", "ell"},
    "splitting": {"kind", "sigma", "t_min", "t_max", "samples"},
    "nse": {"kind", "t_end", "dt0", "dt_growth", "record_per_decade", "record_t_min",
            "amplitude", "integrator", "wiegner_alpha", "margin_tol", "save_field"},
    "certify": {"kind", "t_min", "t_max", "per_decade", "window_t_min", "window_t_max",
                "claimed_sigma", "expect_verdict", "expect_sigma", "sigma_tol"},
    "equivalence": {"kind", "sigma_grid", "rho_min", "rho_max", "rho_count",
                    "t_min", "t_max", "expect_agree", "expect_positive_sigma", "sigma_tol"},
}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigInvalid(f"unknown key(s) {unknown} in {where}")


def _load_config(path: Path) -> dict:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from exc
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigInvalid(f"config is not valid TOML: {exc}") from exc
    _reject_unknown(cfg, _TOP_KEYS, "config root")
    if "recipe" not in cfg:
        raise ConfigInvalid("config needs a [recipe] table")
    _reject_unknown(cfg.get("experiment", {}), _EXPERIMENT_KEYS, "[experiment]")
    _reject_unknown(cfg["recipe"], _RECIPE_KEYS, "[recipe]")
    if "grid" in cfg:
        _reject_unknown(cfg["grid"], _GRID_KEYS, "[grid]")
        g = cfg["grid"]
        for key in ("dim", "box_length", "resolution"):
            if key not in g:
                raise ConfigInvalid(f"[grid] needs '{key}'")
        if int(g["resolution"]) < 16 or int(g["resolution"]) % 2:
            raise ConfigInvalid("[grid] resolution must be even and >= 16")
        if float(g["box_length"]) <= 0:
            raise ConfigInvalid("[grid] box_length must be positive")
    analyses = cfg.get("analysis", [])
    if not isinstance(analyses, list) or not analyses:
        raise ConfigInvalid("config needs at least one [[analysis]] table")
    for i, a in enumerate(analyses):
        kind = a.get("kind")
        if kind not in _ANALYSIS_KINDS:
            raise ConfigInvalid(
                f"analysis #{i}: kind must be one of {_ANALYSIS_KINDS}, got {kind!r}")
        _reject_unknown(a, _ANALYSIS_KEYS[kind], f"analysis #{i} ({kind})")
    return cfg


def _build_datum(cfg: dict, seed: int):
    recipe = dict(cfg["recipe"])
    recipe.setdefault("params", {})
    # allow flat recipe keys for convenience of hand-written configs
    for key in ("alpha", "epsilon", "j0", "source", "window"):
        if key in recipe:
            recipe["params"][key] = recipe.pop(key)
    recipe["params"].setdefault("seed", seed)
    grid = None
    if "grid" in cfg:
        g = cfg["grid"]
        grid = Grid(int(g["dim"]), float(g["box_length"]), int(g["resolution"]))
    try:
        return build_recipe_with_report(recipe, grid), grid
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigInvalid(f"recipe invalid: {exc}") from exc


def _times(a: dict, t_min=10.0, t_max=1e6, per_decade=20) -> np.ndarray:
    t1 = float(a.get("t_min", t_min))
    t2 = float(a.get("t_max", t_max))
    if not 0 < t1 < t2:
        raise ConfigInvalid("need 0 < t_min < t_max")
    n = max(5, int(round(float(a.get("per_decade", per_decade)) * math.log10(t2 / t1))) + 1)
    return np.geomspace(t1, t2, n)


class _Analysis:
    """One analysis step: runs, writes artifacts, reports pass/fail."""

    def __init__(self, index: int, table: dict, datum, report, grid, out: Path):
        self.index = index
        self.table = table
        self.kind = table["kind"]
        self.datum = datum
        self.perturbation_report = report
        self.grid = grid
        self.out = out
        self.artifacts: list[str] = []
        self.status = "pass"
        self.detail: dict = {}

    def _write_json(self, name: str, payload: dict) -> None:
        path = self.out / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.artifacts.append(name)

    def _write_csv(self, name: str, rows, columns=None) -> None:
        write_csv(self.out / name, rows, columns)
        self.artifacts.append(name)

    def _write_text(self, name: str, pairs: list) -> None:
        width = max(len(k) for k, _ in pairs)
        lines = [f"{k:<{width}}  {v}" for k, v in pairs]
        (self.out / name).write_text("\n".join(lines) + "\n")
        self.artifacts.append(name)

    def run(self) -> None:
        getattr(self, f"_run_{self.kind}")()

    # -- analysis kinds -----------------------------------------------------

    def _spectrum(self, a):
        j_min = int(a.get("j_min", DEFAULT_WINDOW[0]))
        j_max = int(a.get("j_max", DEFAULT_WINDOW[1]))
        return dyadic_blocks(self.datum, j_min, j_max, a.get("mode", "sharp"))

    def _run_blocks(self):
        a = self.table
        s = self._spectrum(a)
        alpha = a.get("alpha")
        rows = spectrum_to_csv_rows(s, float(alpha) if alpha is not None else None)
        self._write_csv(f"blocks_{self.index}.csv", rows)
        self.detail = {"truncated_mass": s.truncated_mass, "total_mass": s.total_mass}

    def _run_besov(self):
        a = self.table
        rep = besov_seminorm(self._spectrum(a), float(a["alpha"]))
        payload = {"alpha": rep.alpha, "seminorm": rep.seminorm,
                   "arg_sup": rep.arg_sup, "window_divergent": rep.window_divergent}
        if "expect_divergent" in a and bool(a["expect_divergent"]) != rep.window_divergent:
            self.status = "fail"
            payload["expected_divergent"] = bool(a["expect_divergent"])
        self._write_json(f"besov_{self.index}.json", payload)

    def _run_membership(self):
        a = self.table
        verdict = script_A_membership(self._spectrum(a), float(a["alpha"]),
                                      int(a.get("M", 3)))
        payload = {
            "sigma": verdict.sigma, "in_besov": verdict.in_besov,
            "besov_constant": verdict.besov_constant,
            "in_script_A": verdict.in_script_A, "script_A_c": verdict.script_A_c,
            "in_V_alpha": verdict.in_V_alpha, "v_alpha_delta": verdict.v_alpha_delta,
            "v_alpha_j0": verdict.v_alpha_j0, "notes": list(verdict.notes),
        }
        for key, attr in (("expect_in_script_A", "in_script_A"),
                          ("expect_in_V_alpha", "in_V_alpha"),
                          ("expect_in_besov", "in_besov")):
            if key in a and bool(a[key]) != bool(payload[attr]):
                self.status = "fail"
                payload[f"expected_{attr}"] = bool(a[key])
        if self.perturbation_report is not None:
            rep = self.perturbation_report
            payload["perturbation"] = {
                "c_n": rep.c_n, "epsilon": rep.epsilon, "j0": rep.j0,
                "lower_bound_ok": rep.lower_bound_ok,
                "distance_derived_ok": rep.distance_derived_ok,
                "distance_paper_ok": rep.distance_paper_ok,
                "upper_blocks_unchanged": rep.upper_blocks_unchanged,
            }
            if not (rep.lower_bound_ok and rep.distance_derived_ok
                    and rep.upper_blocks_unchanged):
                self.status = "fail"
        self._write_json(f"membership_{self.index}.json", payload)

    def _profile(self, a, t_min=1.0, t_max=None):
        from .heat import grid_horizon

        if isinstance(self.datum, GridField):
            cap = grid_horizon(self.datum.grid)
            t2 = min(float(a.get("t_max", cap)), cap)
        else:
            t2 = float(a.get("t_max", t_max or 1e6))
        times = _times({**a, "t_max": t2}, t_min=t_min)
        return decay_profile(self.datum, None, times)

    def _run_heat(self):
        a = self.table
        prof = self._profile(a)
        self._write_csv(f"decay_{self.index}.csv", prof.csv_rows())
        payload = {}
        for check in a.get("checks", []):
            alpha = float(a.get("alpha", 0.5))
            if check == "gradient":
                payload["gradient"] = gradient_decay_check(prof, alpha)
                if not payload["gradient"]["passed"]:
                    self.status = "fail"
            elif check == "liminf":
                payload["liminf"] = liminf_check(prof, alpha, int(a.get("ell", 0)))
                if not payload["liminf"]["certified"]:
                    self.status = "fail"
            else:
                raise ConfigInvalid(f"unknown heat check {check!r}")
        if payload:
            self._write_json(f"heat_checks_{self.index}.json", payload)

    def _run_splitting(self):
        a = self.table
        ts = np.geomspace(float(a.get("t_min", 10.0)), float(a.get("t_max", 1e6)),
                          int(a.get("samples", 25)))
        rep = fourier_splitting_check(self.datum, float(a["sigma"]), ts)
        rows = [{"t": r.t, "lhs": r.lhs, "rhs": r.rhs, "margin_rel": r.margin_rel,
                 "compensated_rhs": r.compensated_rhs} for r in rep.rows]
        self._write_csv(f"splitting_{self.index}.csv", rows)
        if not rep.inequality_holds:
            self.status = "fail"
        self.detail = {"min_margin_rel": rep.min_margin_rel,
                       "compensated_ratio": rep.compensated_ratio}

    def _run_nse(self):
        a = self.table
        if not isinstance(self.datum, GridField):
            raise ConfigInvalid("nse analysis needs a grid recipe (e.g. random_envelope)")
        datum = self.datum
        amp = a.get("amplitude")
        if amp is not None:
            datum = datum.scaled(float(amp) / norms(datum).l2)
        t_end = float(a.get("t_end", 100.0))
        rec = SimConfig.log_schedule(float(a.get("record_t_min", t_end / 1e4)), t_end,
                                     int(a.get("record_per_decade", 20)))
        cfg = SimConfig(datum.grid, dt0=float(a.get("dt0", 0.05)), t_end=t_end,
                        record_times=rec, dt_growth=float(a.get("dt_growth", 0.02)),
                        integrator=a.get("integrator", "if_rk4"))
        trace = evolve_nse(datum, cfg)
        self._write_csv(f"trace_{self.index}.csv", trace.csv_rows())
        audit = energy_audit(trace)
        tol = float(a.get("margin_tol", 1e-6))
        payload = {"min_margin_rel": audit.min_margin_rel,
                   "max_equality_residual": audit.max_equality_residual,
                   "n_pairs": audit.n_pairs, "n_steps": trace.n_steps,
                   "max_skew_residual": float(np.max(np.abs(trace.skew_residuals)))}
        ok = audit.inequality_holds(tol) and audit.equality_holds(tol)
        if "wiegner_alpha" in a:
            rep = inverse_wiegner_check(trace)
            wd = wiegner_difference_check(trace, float(a["wiegner_alpha"]))
            payload["wiegner"] = {
                "sigma_u": rep.sigma_u, "sigma_v": rep.sigma_v,
                "exponent_gap": rep.exponent_gap, "transfer_pass": rep.passed,
                "theta_slope": wd.slope, "theta_target": wd.target,
                "theta_table_pass": wd.passed,
                "theta_note": "table rate is unobservable within the box validity "
                              "horizon (difference spectrum sits on undissipated "
                              "grave modes); not gating",
            }
            ok = ok and rep.passed
        if a.get("save_field", False):
            name = f"field_{self.index}.sdgf"
            save_grid_field(self.out / name, trace.final_field)
            self.artifacts.append(name)
        if not ok:
            self.status = "fail"
        self._write_json(f"nse_{self.index}.json", payload)

    def _run_certify(self):
        a = self.table
        prof = self._profile(a)
        window = (float(a.get("window_t_min", prof.times[0])),
                  float(a.get("window_t_max", prof.times[-1])))
        claimed = a.get("claimed_sigma")
        cert = fit_rate(prof, window,
                        claimed_sigma=float(claimed) if claimed is not None else None)
        payload = {
            "sigma_hat": cert.sigma_hat, "c_lower": cert.c_lower,
            "C_upper": cert.C_upper, "ratio": cert.ratio, "residual": cert.residual,
            "verdict": cert.verdict, "window": list(cert.window),
            "convention": cert.convention.as_dict(), "notes": list(cert.notes),
        }
        if "expect_verdict" in a and a["expect_verdict"] != cert.verdict:
            self.status = "fail"
            payload["expected_verdict"] = a["expect_verdict"]
        if "expect_sigma" in a:
            tol = float(a.get("sigma_tol", 0.05))
            if abs(cert.sigma_hat - float(a["expect_sigma"])) > tol:
                self.status = "fail"
                payload["expected_sigma"] = float(a["expect_sigma"])
        self._write_json(f"certificate_{self.index}.json", payload)
        self._write_text(f"certificate_{self.index}.txt", [
            ("verdict", cert.verdict),
            ("sigma_hat", f"{cert.sigma_hat:.6f}"),
            ("c_lower", f"{cert.c_lower:.6e}"),
            ("C_upper", f"{cert.C_upper:.6e}"),
            ("C/c", f"{cert.ratio:.4f}"),
            ("residual", f"{cert.residual:.4f}"),
            ("window", f"[{cert.window[0]:g}, {cert.window[1]:g}]"),
            ("alpha_31", f"{cert.convention.alpha_31:.6f}"),
            ("alpha_32", f"{cert.convention.alpha_32:.6f}"),
            ("mass_exponent", f"{cert.convention.mass_exponent:.6f}"),
        ])

    def _run_equivalence(self):
        a = self.table
        if not isinstance(self.datum, RadialSpectralProfile):
            raise ConfigInvalid("equivalence analysis needs a radial recipe")
        rhos = np.geomspace(float(a.get("rho_min", 1e-8)), float(a.get("rho_max", 1e-1)),
                            int(a.get("rho_count", 29)))
        rep = equivalence_report(
            self.datum, sigma_grid=[float(s) for s in a.get("sigma_grid", [])],
            rho_ladder=rhos,
            window=(float(a.get("t_min", 10.0)), float(a.get("t_max", 1e6))))
        payload = {
            "sigma_hat": rep.sigma_hat, "fit_verdict": rep.fit_verdict,
            "agree": rep.agree, "positive_sigmas": rep.positive_sigmas(),
            "rows": [{"sigma": r.sigma, "cond_decay": r.cond_decay,
                      "cond_mass": r.cond_mass, "cond_dyadic": r.cond_dyadic,
                      "agree": r.agree} for r in rep.rows],
        }
        if bool(a.get("expect_agree", True)) != rep.agree:
            self.status = "fail"
        if "expect_positive_sigma" in a:
            tol = float(a.get("sigma_tol", 0.05))
            want = float(a["expect_positive_sigma"])
            pos = rep.positive_sigmas()
            if len(pos) != 1 or abs(pos[0] - want) > tol:
                self.status = "fail"
                payload["expected_positive_sigma"] = want
        self._write_json(f"equivalence_{self.index}.json", payload)
        pairs = [("sigma_hat", f"{rep.sigma_hat:.6f}"),
                 ("fit_verdict", rep.fit_verdict), ("agree", str(rep.agree))]
        for r in rep.rows:
            pairs.append((f"sigma={r.sigma:g}",
                          f"decay={r.cond_decay} mass={r.cond_mass} dyadic={r.cond_dyadic}"))
        self._write_text(f"equivalence_{self.index}.txt", pairs)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def run_config(config_path: Path, output_dir: Path, threads: int = 1) -> int:
    """Execute one experiment config; returns the process exit code."""
    started = time.perf_counter()
    manifest = {
        "config": str(config_path),
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "analyses": [],
        "overall": "error",
    }
    output_dir.mkdir(parents=True, exist_ok=True)

    def finish(code: int) -> int:
        manifest["runtime_s"] = time.perf_counter() - started
        with open(output_dir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        return code

    try:
        raw = config_path.read_bytes()
        manifest["config_sha256"] = hashlib.sha256(raw).hexdigest()
        cfg = _load_config(config_path)
        manifest["experiment"] = cfg.get("experiment", {})
        seed = int(cfg.get("experiment", {}).get("seed", 0))
        (datum, report), grid = _build_datum(cfg, seed)
    except OSError as exc:
        manifest["error"] = f"ConfigInvalid: cannot read config: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        return finish(2)
    except ConfigInvalid as exc:
        manifest["error"] = f"ConfigInvalid: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        return finish(2)
    except SpecDecayError as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        return finish(2)

    analyses = [_Analysis(i, a, datum, report, grid, output_dir)
                for i, a in enumerate(cfg["analysis"])]

    def run_one(an: _Analysis):
        t0 = time.perf_counter()
        try:
            an.run()
        except ConfigInvalid as exc:
            an.status = "error"
            an.detail = {"error": f"ConfigInvalid: {exc}"}
        except SpecDecayError as exc:
            an.status = "error"
            an.detail = {"error": f"{type(exc).__name__}: {exc}"}
        an.detail["runtime_s"] = time.perf_counter() - t0
        return an

    if threads > 1 and len(analyses) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_one, analyses))
    else:
        for an in analyses:
            run_one(an)

    any_fail = any(a.status == "fail" for a in analyses)
    any_error = any(a.status == "error" for a in analyses)
    for an in analyses:
        manifest["analyses"].append({
            "index": an.index, "kind": an.kind, "status": an.status,
            "artifacts": an.artifacts, "detail": an.detail,
        })
        print(f"[{an.status.upper():5s}] analysis {an.index} ({an.kind})"
              + (f" -> {', '.join(an.artifacts)}" if an.artifacts else ""))
    manifest["overall"] = "error" if any_error else ("fail" if any_fail else "pass")
    return finish(2 if any_error else (1 if any_fail else 0))


# ---------------------------------------------------------------------------
# recipe listing
# ---------------------------------------------------------------------------


def _recipe_dir(override: str | None) -> Path:
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "recipes"


def list_recipes(recipe_dir: Path, as_json: bool) -> int:
    if not recipe_dir.is_dir():
        print(f"error: recipe directory {recipe_dir} does not exist", file=sys.stderr)
        return 2
    entries = []
    for path in sorted(recipe_dir.glob("*.toml")):
        try:
            cfg = tomllib.loads(path.read_text())
            exp = cfg.get("experiment", {})
            entries.append({"name": exp.get("name", path.stem),
                            "file": path.name,
                            "claim": exp.get("claim", "")})
        except tomllib.TOMLDecodeError as exc:
            entries.append({"name": path.stem, "file": path.name,
                            "claim": f"(unreadable: {exc})"})
    if as_json:
        print(json.dumps(entries, indent=2, sort_keys=True))
        return 0
    if not entries:
        print("no recipes found")
        return 0
    width = max(len(e["file"]) for e in entries)
    for e in entries:
        print(f"{e['file']:<{width}}  {e['claim']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="specdecay",
        description="Classify divergence-free data by algebraic energy-decay rate "
                    "and certify the decay-transfer estimates at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--output-dir", type=Path, default=None,
                       help="artifact directory (default: <config stem>_out)")
    p_run.add_argument("--threads", type=int,
                       default=int(os.environ.get(ENV_THREADS, "1") or "1"),
                       help=f"parallel analyses (default ${ENV_THREADS} or 1)")

    p_list = sub.add_parser("list-recipes", help="list bundled experiment recipes")
    p_list.add_argument("--json", action="store_true", help="machine-readable output")
    p_list.add_argument("--recipe-dir", default=None)

    args = parser.parse_args(argv)
    if args.command == "list-recipes":
        return list_recipes(_recipe_dir(args.recipe_dir), args.json)
    out = args.output_dir or args.config.with_suffix("").parent / (args.config.stem + "_out")
    return run_config(args.config, out, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
