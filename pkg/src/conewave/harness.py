"""Config-driven experiment runs: parsing, validation, persistence.

A single sectioned key-value file describes one run: which manifold,
which discretization, which band sweeps, and which pass/fail contracts
to hold the results against.  ``run`` executes the file and leaves a
run-level JSON plus one CSV per functional sweep; ``compare`` diffs two
such JSONs; ``validate`` checks a file without running anything.

Exit codes: 0 clean, 1 a declared contract failed, 2 configuration
error, 3 numerical failure (partial results are flushed first).
"""

import configparser
import dataclasses
import hashlib
import inspect
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .distances import IsotropicGaussian, check_ang_lower_bound, \
    flat_bilaplacian_pairing
from .errors import NumericalError
from .flatspace import counterexample_scaling
from .functionals import angular_morawetz, half_angular, local_smoothing, \
    no_derivative_smoothing, strichartz_ratio
from .geodesics import classify_trapping
from .geometry import cone_spec, flat_spec, neck_spec, perturbed_spec
from .spectral import HamiltonianFamily, band_packet, trajectory

SCHEMA_VERSION = "1"

PRESETS = {
    "flat": flat_spec,
    "cone": cone_spec,
    "perturbed": perturbed_spec,
    "neck": neck_spec,
}

RUNNERS = {
    "local_smoothing":
        lambda fields, times, cfg, k: local_smoothing(
            fields, times, cfg.epsilon),
    "no_derivative_smoothing":
        lambda fields, times, cfg, k: no_derivative_smoothing(
            fields, times, cfg.epsilon),
    "angular_morawetz":
        lambda fields, times, cfg, k: angular_morawetz(
            fields, times, r0=cfg.r0),
    "half_angular":
        lambda fields, times, cfg, k: half_angular(fields, times),
    "strichartz":
        lambda fields, times, cfg, k: strichartz_ratio(fields, times, k),
}

DIAGNOSTICS = ("bilaplacian", "exponents")

CONTRACTS = ("strichartz_variation_max", "local_smoothing_growth_min",
             "mass_near_wall_max", "bilaplacian_max_rel_error")


class ConfigError(ValueError):
    """Configuration problem; the message lists section.key paths."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One parsed and validated run description."""

    label: str
    preset: str
    preset_params: dict
    scheme: str
    n_r: int
    r_max: float
    ell_max: int
    time_nodes: int
    k_min: int
    k_max: int
    functionals: tuple
    epsilon: float
    r0: float
    symbol_family: str
    packet_ell: int
    packet_center: float
    packet_width: float
    geometry_samples: int
    seed_text: str
    diagnostics: tuple
    exponent_k_min: int
    exponent_k_max: int
    exponent_trials: int
    contracts: tuple  # (name, limit) pairs in file order
    out_dir: str
    json_name: str
    compare_tolerance: float
    config_hash: str

    def spec(self):
        return PRESETS[self.preset](**self.preset_params)

    @property
    def seed(self):
        return int(self.seed_text)

    @property
    def bands(self):
        return range(self.k_min, self.k_max + 1)


def _get(parser, section, key, cast, default, problems):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        problems.append(f"{section}.{key}: cannot read {raw!r} as "
                        f"{cast.__name__}")
        return default


def _names(raw):
    return tuple(part.strip() for part in raw.split(",") if part.strip())


def band_ceiling(scheme, n_r, r_max):
    """Largest dyadic shell the kinetic spectrum can hold, scheme-wise.

    The mode operators only gain range from their potentials, so this
    kinetic-only figure is a safe lower bound for sweep validation.
    """
    h = r_max / (n_r + 1)
    if scheme == "fd2":
        return 2.0 / h**2
    return 0.5 * (n_r * math.pi / r_max) ** 2


def parse_config(path):
    """Read a config file into an ExperimentConfig, collecting problems.

    Returns (config or None, list of problem strings); the config is
    None whenever the file cannot even be shaped into one.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    digest = hashlib.sha256(raw).hexdigest()

    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(raw.decode("utf-8"))
    except (UnicodeDecodeError, configparser.Error) as exc:
        return None, [f"cannot parse config: {exc}"]

    problems = []
    spec_sections = [s for s in parser.sections() if s.startswith("spec:")]
    known = set(spec_sections) | {"solver", "sweep", "output", "contracts"}
    for section in parser.sections():
        if section not in known:
            problems.append(f"{section}: unexpected section")
    if len(spec_sections) != 1:
        problems.append("spec: expected exactly one [spec:NAME] section, "
                        f"found {len(spec_sections)}")
        return None, problems

    spec_section = spec_sections[0]
    label = spec_section.split(":", 1)[1]
    preset = parser.get(spec_section, "preset", fallback=None)
    preset_params = {}
    if preset is None:
        problems.append(f"{spec_section}.preset: missing")
        preset = "flat"
    elif preset not in PRESETS:
        problems.append(f"{spec_section}.preset: unknown preset {preset!r}; "
                        f"choose from {', '.join(sorted(PRESETS))}")
        preset = "flat"
    else:
        signature = inspect.signature(PRESETS[preset])
        for key in parser.options(spec_section):
            if key == "preset":
                continue
            if key not in signature.parameters:
                problems.append(f"{spec_section}.{key}: preset {preset!r} "
                                "takes no such parameter")
                continue
            preset_params[key] = _get(parser, spec_section, key, float,
                                      0.0, problems)

    for section, keys in (("solver", ("scheme", "n_r", "r_max", "ell_max",
                                      "time_nodes")),
                          ("sweep", ("k_min", "k_max", "functionals",
                                     "epsilon", "r0", "symbol_family",
                                     "packet_ell", "packet_center",
                                     "packet_width", "geometry_samples",
                                     "seed", "diagnostics", "exponent_k_min",
                                     "exponent_k_max", "exponent_trials")),
                          ("output", ("directory", "json",
                                      "compare_tolerance"))):
        if parser.has_section(section):
            for key in parser.options(section):
                if key not in keys:
                    problems.append(f"{section}.{key}: unknown key")

    contracts = []
    if parser.has_section("contracts"):
        for key in parser.options("contracts"):
            if key not in CONTRACTS:
                problems.append(f"contracts.{key}: unknown contract; "
                                f"choose from {', '.join(CONTRACTS)}")
                continue
            contracts.append((key, _get(parser, "contracts", key, float,
                                        math.inf, problems)))

    # relative output directories land under the caller's working
    # directory, never inside the package that ships the config
    out_dir = os.path.abspath(
        _get(parser, "output", "directory", str, f"{label}_run", problems))

    cfg = ExperimentConfig(
        label=label,
        preset=preset,
        preset_params=preset_params,
        scheme=_get(parser, "solver", "scheme", str, "sine", problems),
        n_r=_get(parser, "solver", "n_r", int, 1024, problems),
        r_max=_get(parser, "solver", "r_max", float, 200.0, problems),
        ell_max=_get(parser, "solver", "ell_max", int, 8, problems),
        time_nodes=_get(parser, "solver", "time_nodes", int, 65, problems),
        k_min=_get(parser, "sweep", "k_min", int, 1, problems),
        k_max=_get(parser, "sweep", "k_max", int, 3, problems),
        functionals=_names(_get(parser, "sweep", "functionals", str, "",
                                problems)),
        epsilon=_get(parser, "sweep", "epsilon", float, 1.0, problems),
        r0=_get(parser, "sweep", "r0", float, None, problems),
        symbol_family=_get(parser, "sweep", "symbol_family", str, "default",
                           problems),
        packet_ell=_get(parser, "sweep", "packet_ell", int, 1, problems),
        packet_center=_get(parser, "sweep", "packet_center", float, 30.0,
                           problems),
        packet_width=_get(parser, "sweep", "packet_width", float, 4.0,
                          problems),
        geometry_samples=_get(parser, "sweep", "geometry_samples", int, 0,
                              problems),
        seed_text=_get(parser, "sweep", "seed", str, "0", problems).strip(),
        diagnostics=_names(_get(parser, "sweep", "diagnostics", str, "",
                                problems)),
        exponent_k_min=_get(parser, "sweep", "exponent_k_min", int, 3,
                            problems),
        exponent_k_max=_get(parser, "sweep", "exponent_k_max", int, 4,
                            problems),
        exponent_trials=_get(parser, "sweep", "exponent_trials", int, 4,
                             problems),
        contracts=tuple(contracts),
        out_dir=out_dir,
        json_name=_get(parser, "output", "json", str, "run.json", problems),
        compare_tolerance=_get(parser, "output", "compare_tolerance", float,
                               0.1, problems),
        config_hash=digest,
    )
    return cfg, problems


def validate_config(cfg):
    """Cross-field checks on a parsed config; returns problem strings."""
    problems = []
    if cfg.scheme not in ("sine", "fd2"):
        problems.append(f"solver.scheme: unknown scheme {cfg.scheme!r}")
    if cfg.n_r < 16:
        problems.append(f"solver.n_r: need at least 16 points, got {cfg.n_r}")
    if cfg.r_max <= 0.0:
        problems.append("solver.r_max: must be positive")
    if cfg.ell_max < 0:
        problems.append("solver.ell_max: must be nonnegative")
    for name in cfg.functionals:
        if name not in RUNNERS:
            problems.append(f"sweep.functionals: unknown name {name!r}; "
                            f"choose from {', '.join(sorted(RUNNERS))}")
    for name in cfg.diagnostics:
        if name not in DIAGNOSTICS:
            problems.append(f"sweep.diagnostics: unknown name {name!r}; "
                            f"choose from {', '.join(DIAGNOSTICS)}")
    if cfg.k_min < 0 or cfg.k_min > cfg.k_max:
        problems.append(f"sweep.k_min: need 0 <= k_min <= k_max, got "
                        f"{cfg.k_min}:{cfg.k_max}")
    if cfg.functionals:
        if cfg.time_nodes < 64:
            problems.append("solver.time_nodes: sweeps need at least 64 "
                            f"time nodes, got {cfg.time_nodes}")
        if cfg.scheme in ("sine", "fd2"):
            resolvable = band_ceiling(cfg.scheme, cfg.n_r, cfg.r_max) / 2.0
            top = 4.0 ** (cfg.k_max + 1)
            if top > resolvable:
                problems.append(
                    f"sweep.k_max: band {cfg.k_max} needs frequencies up to "
                    f"{top:g} but the {cfg.scheme} grid resolves only "
                    f"{resolvable:.1f}; refine n_r or lower k_max")
        if cfg.epsilon <= 0.0 and ("local_smoothing" in cfg.functionals
                                   or "no_derivative_smoothing"
                                   in cfg.functionals):
            problems.append("sweep.epsilon: must be positive")
        if not (0 <= cfg.packet_ell <= cfg.ell_max):
            problems.append(f"sweep.packet_ell: need 0 <= ell <= ell_max "
                            f"({cfg.ell_max}), got {cfg.packet_ell}")
        if cfg.packet_width <= 0.0 or cfg.packet_center <= 0.0:
            problems.append("sweep.packet_center/packet_width: must be "
                            "positive")
    if cfg.r0 is not None and cfg.r0 <= 0.0:
        problems.append("sweep.r0: must be positive when given")
    if cfg.symbol_family != "default":
        problems.append(f"sweep.symbol_family: only 'default' is bundled, "
                        f"got {cfg.symbol_family!r}")
    if cfg.geometry_samples < 0:
        problems.append("sweep.geometry_samples: must be nonnegative")
    try:
        int(cfg.seed_text)
    except ValueError:
        problems.append(f"sweep.seed: cannot read {cfg.seed_text!r} as an "
                        "integer")
    if "exponents" in cfg.diagnostics:
        if not (3 <= cfg.exponent_k_min <= cfg.exponent_k_max <= 6):
            problems.append("sweep.exponent_k_min: exponent fits run over "
                            "k values within 3..6")
        if cfg.exponent_trials < 4:
            problems.append("sweep.exponent_trials: at least 4 sign draws "
                            "are required per k")
    for name, limit in cfg.contracts:
        if not math.isfinite(limit) or limit <= 0.0:
            problems.append(f"contracts.{name}: limit must be a positive "
                            "number")
    contract_names = {name for name, _ in cfg.contracts}
    for name, needs in (("strichartz_variation_max", "strichartz"),
                        ("local_smoothing_growth_min", "local_smoothing")):
        if name in contract_names and needs not in cfg.functionals:
            problems.append(f"contracts.{name}: requires the {needs!r} "
                            "functional in the sweep")
    if ("bilaplacian_max_rel_error" in contract_names
            and "bilaplacian" not in cfg.diagnostics):
        problems.append("contracts.bilaplacian_max_rel_error: requires the "
                        "'bilaplacian' diagnostic")
    if cfg.compare_tolerance <= 0.0:
        problems.append("output.compare_tolerance: must be positive")
    return problems


def load_config(path):
    cfg, problems = parse_config(path)
    if cfg is not None:
        problems.extend(validate_config(cfg))
    if problems:
        raise ConfigError("\n".join(problems))
    return cfg


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _estimate_row(report, cfg):
    row = _jsonable(dataclasses.asdict(report))
    row["tolerance"] = cfg.compare_tolerance
    return row


def _fmt(value):
    return format(float(value), ".17g")


def _write_csvs(cfg, estimates):
    by_functional = {}
    for rep in estimates:
        by_functional.setdefault(rep.functional, []).append(rep)
    for name, reps in by_functional.items():
        lines = ["config_hash,schema_version,experiment,spec,functional,"
                 "band,lhs,rhs,ratio,mass_near_wall"]
        for rep in sorted(reps, key=lambda r: (r.band is None, r.band)):
            band = "" if rep.band is None else str(rep.band)
            lines.append(",".join([
                cfg.config_hash, SCHEMA_VERSION, rep.experiment,
                rep.spec_name, rep.functional, band, _fmt(rep.lhs),
                _fmt(rep.rhs), _fmt(rep.ratio), _fmt(rep.mass_near_wall)]))
        with open(os.path.join(cfg.out_dir, f"sweep_{name}.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _band_ratios(estimates, functional):
    # reports name the functional, not the sweep key that requested it
    reps = sorted((r for r in estimates
                   if r.functional == functional and not r.zero_input),
                  key=lambda r: r.band)
    return [r.ratio for r in reps]


def _evaluate_contracts(cfg, estimates, diagnostics):
    results = []
    for name, limit in cfg.contracts:
        if name == "strichartz_variation_max":
            ratios = _band_ratios(estimates, "strichartz_ratio")
            value = max(ratios) / min(ratios) if ratios else None
            passed = value is not None and value <= limit
        elif name == "local_smoothing_growth_min":
            ratios = _band_ratios(estimates, "local_smoothing")
            value = ratios[-1] / ratios[0] if ratios else None
            passed = value is not None and value >= limit
        elif name == "mass_near_wall_max":
            value = max((r.mass_near_wall for r in estimates), default=0.0)
            passed = value <= limit
        else:  # bilaplacian_max_rel_error
            block = diagnostics["bilaplacian"]
            value = abs(block["value"] / block["reference"] - 1.0)
            passed = value <= limit
        results.append({"name": name, "limit": limit, "value": value,
                        "passed": bool(passed)})
    return results


def _payload_skeleton(cfg):
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.config_hash,
        "label": cfg.label,
        "compare_tolerance": cfg.compare_tolerance,
        "spec": {"preset": cfg.preset, **cfg.preset_params},
        "solver": {"scheme": cfg.scheme, "n_r": cfg.n_r, "r_max": cfg.r_max,
                   "ell_max": cfg.ell_max, "time_nodes": cfg.time_nodes},
        "sweep": {"k_min": cfg.k_min, "k_max": cfg.k_max,
                  "functionals": list(cfg.functionals),
                  "epsilon": cfg.epsilon,
                  "packet_ell": cfg.packet_ell,
                  "packet_center": cfg.packet_center,
                  "packet_width": cfg.packet_width,
                  "geometry_samples": cfg.geometry_samples,
                  "seed": cfg.seed_text},
        "packets": {},
        "estimates": [],
        "geometry": {},
        "exponents": {},
        "diagnostics": {},
        "contracts": [],
    }


def _flush(cfg, payload):
    path = os.path.join(cfg.out_dir, cfg.json_name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def run(path):
    """Execute one config file; returns the process exit code."""
    cfg = load_config(path)
    os.makedirs(cfg.out_dir, exist_ok=True)
    payload = _payload_skeleton(cfg)
    spec = cfg.spec()
    estimates = []

    try:
        if cfg.functionals:
            family = HamiltonianFamily(spec, r_max=cfg.r_max, n_r=cfg.n_r,
                                       scheme=cfg.scheme)
            times = np.linspace(0.0, 1.0, cfg.time_nodes)
            # tasks are independent per band; this loop is the degenerate
            # one-worker pool and the only writer of the result lists
            for k in cfg.bands:
                field, kept = band_packet(family, k, cfg.packet_ell,
                                          cfg.packet_center,
                                          cfg.packet_width, 2.0**k)
                payload["packets"][str(k)] = float(kept)
                fields = trajectory(field, times)
                for name in cfg.functionals:
                    rep = RUNNERS[name](fields, times, cfg, k)
                    estimates.append(rep)
                    payload["estimates"].append(_estimate_row(rep, cfg))

        if cfg.geometry_samples > 0:
            payload["geometry"]["trapping"] = _jsonable(
                classify_trapping(spec))
            payload["geometry"]["angular_bound"] = _jsonable(
                check_ang_lower_bound(spec, n_samples=cfg.geometry_samples,
                                      seed=cfg.seed))

        if "bilaplacian" in cfg.diagnostics:
            pairing = flat_bilaplacian_pairing(IsotropicGaussian(),
                                               IsotropicGaussian())
            payload["diagnostics"]["bilaplacian"] = _jsonable(pairing)

        if "exponents" in cfg.diagnostics:
            ks = tuple(range(cfg.exponent_k_min, cfg.exponent_k_max + 1))
            report = counterexample_scaling(ks=ks,
                                            trials=cfg.exponent_trials,
                                            seed=cfg.seed)
            payload["exponents"] = {
                "ks": list(report.ks),
                "lhs_exponent": report.lhs_exponent,
                "rhs_exponent": report.rhs_exponent,
                "lhs_means": _jsonable(report.lhs_means),
                "rhs_means": _jsonable(report.rhs_means),
                "control_value": report.control_value,
                "control_scale": report.control_scale,
            }
    except NumericalError as exc:
        payload["error"] = {"type": type(exc).__name__, "message": str(exc)}
        _write_csvs(cfg, estimates)
        where = _flush(cfg, payload)
        print(f"numerical failure: {exc}")
        print(f"partial results flushed to {where}")
        return 3

    payload["contracts"] = _evaluate_contracts(cfg, estimates,
                                               payload["diagnostics"])
    _write_csvs(cfg, estimates)
    where = _flush(cfg, payload)

    print(f"wrote {where}")
    failed = 0
    for entry in payload["contracts"]:
        status = "ok" if entry["passed"] else "FAIL"
        failed += 0 if entry["passed"] else 1
        shown = "n/a" if entry["value"] is None else f"{entry['value']:.6g}"
        print(f"contract {entry['name']}: value {shown} vs "
              f"limit {entry['limit']:.6g} [{status}]")
    return 1 if failed else 0


def _load_run(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run report {path}: {exc}")


def compare(path_a, path_b):
    """Diff two run reports; returns the process exit code."""
    a, b = _load_run(path_a), _load_run(path_b)
    if a.get("schema_version") != b.get("schema_version"):
        raise ConfigError(
            f"schema version mismatch: {a.get('schema_version')!r} vs "
            f"{b.get('schema_version')!r}")

    rows_a = {row["experiment"]: row for row in a.get("estimates", [])}
    rows_b = {row["experiment"]: row for row in b.get("estimates", [])}
    flagged = 0
    lines = []
    for name in sorted(set(rows_a) | set(rows_b)):
        if name not in rows_a or name not in rows_b:
            side = "A" if name in rows_a else "B"
            lines.append(f"only in {side}: {name}")
            continue
        ra, rb = rows_a[name]["ratio"], rows_b[name]["ratio"]
        scale = max(abs(ra), abs(rb))
        delta = abs(ra - rb) / scale if scale > 0.0 else 0.0
        tol = max(rows_a[name].get("tolerance", 0.1),
                  rows_b[name].get("tolerance", 0.1))
        if delta > tol:
            flagged += 1
            lines.append(f"FLAG {name}: ratio {ra:.6g} vs {rb:.6g} "
                         f"(delta {delta:.3g} > {tol:g})")
        else:
            lines.append(f"     {name}: ratio {ra:.6g} vs {rb:.6g}")

    exp_a, exp_b = a.get("exponents") or {}, b.get("exponents") or {}
    tol = max(a.get("compare_tolerance", 0.1), b.get("compare_tolerance", 0.1))
    for key in ("lhs_exponent", "rhs_exponent"):
        if key in exp_a and key in exp_b:
            delta = abs(exp_a[key] - exp_b[key])
            if delta > tol:
                flagged += 1
                lines.append(f"FLAG {key}: {exp_a[key]:.4f} vs "
                             f"{exp_b[key]:.4f} (delta {delta:.3g} > {tol:g})")
            else:
                lines.append(f"     {key}: {exp_a[key]:.4f} vs "
                             f"{exp_b[key]:.4f}")

    for line in lines:
        print(line)
    print(f"{flagged} flagged difference(s)" if flagged
          else "no flagged differences")
    return 1 if flagged else 0


def validate(path):
    """Check a config file; returns the process exit code."""
    cfg = load_config(path)
    print(f"ok: {cfg.label} ({cfg.preset}) hash {cfg.config_hash[:12]}")
    return 0


def bundled_config(name):
    """Filesystem path of a config shipped inside the package."""
    from importlib.resources import files
    return str(files("conewave").joinpath("configs", name))
