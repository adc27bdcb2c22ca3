"""Command-line front end: ``qrange {model,simulate,jsa,covertness}``.

Each subcommand reads one TOML file, writes CSV/PGM/JSON files into
``--out`` and prints the paths it wrote (unless ``--quiet``).  Failures
exit nonzero with a one-line JSON object on stderr, e.g.
``{"error": "config", "message": "...", "path": "...", "line": 7}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, grid_from, load_config, system_params
from .covertness import (
    SpectralDensity,
    error_prob_bounds,
    g2_from_schmidt,
    photon_number_table,
    poisson_vs_thermal_distance,
    spectral_overlap,
)
from .crystal import (
    GridSpec,
    PumpSpectrum,
    build_chirped_poling,
    compute_jsa,
    load_dispersion,
    marginal_spectra,
    schmidt,
    schmidt_number,
)
from .errors import ConfigError, InvalidParameterError, QRangeError
from .experiment import model_snr, run_waveforms, summarize
from .io import write_csv, write_json, write_pgm
from .montecarlo import DetectorConfig, ScenarioConfig, jitter_from_fwhm
from .snr import optimal_channels, snr_sweep
from .waveform import COMBINE_MODES, DEFAULT_GUARD_BINS, Waveform, detect_peak

SWEEP_HEADER = ("axis", "value", "snr", "S", "N_c", "N_p", "N_i")
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3, 4


class _Output:
    def __init__(self, out_dir: Path, seed: int, cfg: RunConfig):
        self.dir, self.seed, self.sha = out_dir, seed, cfg.sha256
        self.files: list[str] = []

    def csv(self, name, header, rows):
        self.files.append(name)
        write_csv(self.dir / name, header, rows, self.seed, self.sha)

    def pgm(self, name, image):
        self.files.append(name)
        write_pgm(self.dir / name, image)

    def summary(self, command: str, data: dict):
        self.files.append("summary.json")
        body = {"command": command, "seed": self.seed, "config_sha256": self.sha, "version": __version__}
        body.update(data)
        body["files"] = sorted(self.files)
        write_json(self.dir / "summary.json", body)


def _label(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


# -- model ----------------------------------------------------------------


def run_model(cfg: RunConfig, out: _Output) -> dict:
    cfg.check_sections({"system", "sweep"})
    params = system_params(cfg.section("system"))
    sw = cfg.section("sweep")
    axis = sw.string("axis", choices=("gain", "background", "channels"))
    grid = grid_from(sw)
    curves = sw.array("channels", [params.channels]) if axis != "channels" else [None]
    sw.finish()
    info = {"axis": axis, "points": len(grid), "curves": []}
    for n in curves:
        if n is not None and n != "opt" and (isinstance(n, bool) or not isinstance(n, (int, float)) or n < 1):
            raise cfg.error(f"channel entries must be numbers >= 1 or \"opt\", got {n!r}", "sweep", "channels")
        try:
            rows = snr_sweep(params, axis, grid, channels=n)
        except QRangeError as exc:
            raise ConfigError(str(exc), cfg.path, cfg.line_of("sweep")) from None
        tag = "" if n is None else f"_n{n if n == 'opt' else _label(n)}"
        name = f"snr_{axis}{tag}.csv"
        out.csv(name, SWEEP_HEADER, [(r.axis, r.value, r.snr, r.S, r.N_c, r.N_p, r.N_i) for r in rows])
        info["curves"].append({"channels": n, "file": name})
    try:
        info["n_opt"] = optimal_channels(params)
    except QRangeError:
        info["n_opt"] = None
    return info


# -- simulate -------------------------------------------------------------

STATS_HEADER = (
    "axis", "value", "mode", "waveforms", "peak_bin", "distance_m",
    "peak_mean", "peak_mean_err", "peak_sigma", "peak_sigma_err",
    "floor_mean", "floor_mean_err", "floor_sigma", "floor_sigma_err",
    "snr", "snr_err", "model_snr", "fallback",
)  # fmt: skip
WAVEFORM_HEADER = ("bin_index", "delay_ps", "counts")


def run_simulate(cfg: RunConfig, out: _Output) -> dict:
    cfg.check_sections({"system", "scenario", "detector", "acquisition", "sweep"})
    params = system_params(cfg.section("system"))
    sc = cfg.section("scenario")
    distance = sc.number("target_distance_m", minimum=0)
    resolution = sc.number("time_resolution_ps", 50.0, positive=True)
    bg_signal = sc.number("background_signal_rate_hz", 0.0, minimum=0)
    cmap = sc.array("channel_map", None)
    sc.finish()
    de = cfg.section("detector", required=False)
    if "jitter_fwhm_ps" in de and "jitter_sigma_ps" in de:
        raise de.fail("jitter_fwhm_ps", "give either jitter_fwhm_ps or jitter_sigma_ps")
    if "jitter_fwhm_ps" in de:
        sigma = jitter_from_fwhm(de.number("jitter_fwhm_ps", minimum=0))
    else:
        sigma = de.number("jitter_sigma_ps", 0.0, minimum=0)
    detectors = DetectorConfig(sigma, de.number("dead_time_ps", 0.0, minimum=0))
    de.finish()
    ac = cfg.section("acquisition")
    m = ac.integer("waveforms", minimum=1)
    bin_width = ac.number("bin_width_ps", params.bin_width * 1e12, positive=True)
    window = ac.number("window_ps", positive=True)
    guard = ac.integer("guard_bins", DEFAULT_GUARD_BINS, minimum=0)
    combined = ac.boolean("combined_sigma", False)
    ac.finish()
    params = params.replace(bin_width=bin_width * 1e-12)
    if cfg.has("sweep"):
        sw = cfg.section("sweep")
        axis = sw.string("axis", choices=("gain", "background"))
        grid = grid_from(sw)
        sw.finish()
    else:
        axis, grid = "background", [params.background_density]
    try:
        base = ScenarioConfig(
            params,
            distance,
            channel_map=tuple(cmap) if cmap is not None else None,
            time_resolution_ps=resolution,
            rng_seed=out.seed,
            background_signal_rate=bg_signal,
        )
    except QRangeError as exc:
        raise ConfigError(str(exc), cfg.path, cfg.line_of("scenario")) from None

    children = np.random.SeedSequence(out.seed).spawn(len(grid))
    rows, points = [], []
    for k, (value, child) in enumerate(zip(grid, children)):
        field = "gain" if axis == "gain" else "background_density"
        try:
            scenario = base.replace(params=params.replace(**{field: value}), channel_map=base.channel_map)
        except QRangeError as exc:
            raise ConfigError(str(exc), cfg.path, cfg.line_of("sweep")) from None
        result = run_waveforms(scenario, detectors, m, bin_width, window, seed=child)
        point = {"axis": axis, "value": value}
        for mode in COMBINE_MODES:
            total = result.combined(mode).sum(axis=0)
            wf = Waveform(bin_width, window, total, params.integration_time * m)
            name = f"waveform_{mode}_p{k}.csv"
            out.csv(name, WAVEFORM_HEADER, [(i, i * bin_width, int(c)) for i, c in enumerate(total)])
            try:
                rng = detect_peak(wf)
                peak_bin, dist = rng.peak_bin, rng.distance_m
            except QRangeError:
                peak_bin, dist = None, None
            if m < 2:
                # a single waveform has no distribution to fit
                pred = model_snr(scenario, bin_width, mode)
                rows.append((axis, value, mode, m, peak_bin, dist) + (None,) * 10 + (pred, None))
                point[mode] = {"model_snr": pred, "distance_m": dist}
                continue
            s = summarize(result, mode, guard_bins=guard, combined_sigma=combined)
            pf, ff = s.stats.peak_fit, s.stats.floor_fit
            rows.append(
                (axis, value, mode, m, s.stats.peak_bin, dist,
                 pf.mean, pf.mean_err, pf.sigma, pf.sigma_err,
                 ff.mean, ff.mean_err, ff.sigma, ff.sigma_err,
                 s.snr.value, s.snr.error, s.model_snr, s.snr.fallback)
            )  # fmt: skip
            point[mode] = {"snr": s.snr.value, "snr_err": s.snr.error, "model_snr": s.model_snr, "distance_m": dist}
        points.append(point)
    out.csv("snr.csv", STATS_HEADER, rows)
    return {"waveforms": m, "channels": params.channels, "bin_width_ps": bin_width, "points": points}


# -- jsa --------------------------------------------------------------------


def run_jsa(cfg: RunConfig, out: _Output) -> dict:
    cfg.check_sections({"pump", "crystal", "grid", "schmidt", "background"})
    pu = cfg.section("pump")
    try:
        pump = PumpSpectrum(
            center=pu.number("center_nm", positive=True),
            bandwidth=pu.number("bandwidth_nm", 0.0, minimum=0),
            cw=pu.boolean("cw", True),
            cw_width=pu.number("cw_width_nm", None),
        )
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), cfg.path, cfg.line_of("pump")) from None
    pu.finish()
    cr = cfg.section("crystal")
    dispersion = load_dispersion(cr.string("dispersion"), cr.number("temperature_c", None))
    length = cr.number("length_mm", positive=True)
    if "period_um" in cr:
        period = cr.number("period_um", positive=True)
        start, end = period, period
    else:
        start = cr.number("period_start_um", positive=True)
        end = cr.number("period_end_um", positive=True)
    cr.finish()
    poling = build_chirped_poling(start, end, length)
    gr = cfg.section("grid")
    grid = GridSpec(
        tuple(gr.numbers("signal_nm", length=2)),
        tuple(gr.numbers("idler_nm", length=2)),
        tuple(int(x) for x in gr.numbers("points", [512, 512], length=2)),
    )
    gr.finish()
    sch = cfg.section("schmidt", required=False)
    floor = sch.number("weight_floor", 0.0, minimum=0.0, maximum=1.0)
    sch.finish()

    jsa = compute_jsa(pump, poling, dispersion, grid)
    inten = jsa.intensity
    out.csv(
        "jsi.csv",
        ("signal_nm", "idler_nm", "intensity"),
        [(s, i, float(v)) for s, row in zip(jsa.signal.tolist(), inten.tolist()) for i, v in zip(jsa.idler.tolist(), row)],
    )
    # rows run from the longest idler wavelength (top) down; columns are signal
    out.pgm("jsi.pgm", inten.T[::-1])
    dec = schmidt(jsa, floor)
    out.csv("schmidt.csv", ("k", "r_k"), [(k + 1, float(r)) for k, r in enumerate(dec.coefficients)])
    sig, idl = marginal_spectra(jsa)
    out.csv("marginal_signal.csv", ("wavelength_nm", "density"), zip(sig.wavelength.tolist(), sig.density.tolist()))
    out.csv("marginal_idler.csv", ("wavelength_nm", "density"), zip(idl.wavelength.tolist(), idl.density.tolist()))
    K = schmidt_number(dec)
    info = {
        "schmidt_number": K,
        "g2": g2_from_schmidt(dec.coefficients),
        "domains": poling.n_domains,
        "crystal_length_um": poling.length,
        "signal_support_nm": _support(sig),
        "idler_support_nm": _support(idl),
        "signal_mean_nm": sig.mean_wavelength(),
        "idler_mean_nm": idl.mean_wavelength(),
        "dispersion": dispersion.name,
    }
    if cfg.has("background"):
        bg = cfg.section("background")
        arm = bg.string("marginal", "idler", choices=("signal", "idler"))
        if "flat_nm" in bg:
            lo, hi = bg.numbers("flat_nm", length=2)
            ref = SpectralDensity.flat(lo, hi)
        else:
            c, w = bg.number("center_nm", positive=True), bg.number("sigma_nm", positive=True)
            ref = SpectralDensity.gaussian(c, w, np.linspace(c - 8 * w, c + 8 * w, 2001))
        photons = [int(x) for x in bg.numbers("photons", [0, 1, 10, 100, 1000, 10000])]
        bg.finish()
        o = spectral_overlap(idl if arm == "idler" else sig, ref)
        b = error_prob_bounds(o, np.array(photons))
        out.csv("bounds_vs_background.csv", ("N", "lower", "upper"), zip(photons, np.atleast_1d(b.lower).tolist(), np.atleast_1d(b.upper).tolist()))
        info["background_overlap"] = o
    return info


def _support(sd: SpectralDensity, mass: float = 0.01) -> list[float]:
    """Wavelengths enclosing all but ``mass`` of the density (split evenly)."""
    c = np.cumsum(sd.density * np.gradient(sd.wavelength))
    c /= c[-1]
    return [float(np.interp(mass / 2, c, sd.wavelength)), float(np.interp(1 - mass / 2, c, sd.wavelength))]


# -- covertness ------------------------------------------------------------


def run_covertness(cfg: RunConfig, out: _Output) -> dict:
    cfg.check_sections({"bounds", "photons"})
    info = {}
    if cfg.has("bounds"):
        bo = cfg.section("bounds")
        overlaps = bo.numbers("overlaps")
        n_max = bo.integer("n_max", minimum=0)
        step = bo.integer("n_step", 1, minimum=1)
        bo.finish()
        n = np.arange(0, n_max + 1, step)
        info["bounds"] = []
        for o in overlaps:
            if not 0 <= o <= 1:
                raise cfg.error(f"overlap {o!r} outside [0, 1]", "bounds", "overlaps")
            b = error_prob_bounds(o, n)
            name = f"bounds_O{_label(o)}.csv"
            out.csv(name, ("N", "lower", "upper"), zip(n.tolist(), b.lower.tolist(), b.upper.tolist()))
            info["bounds"].append({"overlap": o, "file": name})
    if cfg.has("photons"):
        ph = cfg.section("photons")
        mean = ph.number("mean", minimum=0)
        n_max = ph.integer("n_max", minimum=0)
        ph.finish()
        n, pt, pp = photon_number_table(mean, n_max)
        out.csv("photon_table.csv", ("n", "p_thermal", "p_poisson"), zip(n.tolist(), pt.tolist(), pp.tolist()))
        tv = poisson_vs_thermal_distance(mean)
        info["poisson_thermal_tv"] = {"value": tv.value, "tail_bound": tv.tail_bound, "mean": mean}
    if not info:
        raise ConfigError("nothing to do: give a [bounds] and/or [photons] section", cfg.path)
    return info


COMMANDS = {"model": run_model, "simulate": run_simulate, "jsa": run_jsa, "covertness": run_covertness}


class _JSONArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        _report("usage", message)
        sys.exit(EXIT_USAGE)


def _report(category: str, message: str, **extra) -> None:
    body = {"error": category, "message": message}
    body.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(body, sort_keys=True), file=sys.stderr)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _JSONArgumentParser(prog="qrange", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qrange {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JSONArgumentParser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", required=True, metavar="DIR")
        p.add_argument("--seed", type=_seed, default=None, metavar="U64")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed
        if seed is None:
            seed = cfg.data.get("seed", 0)
            if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
                raise cfg.error("seed must be an unsigned 64-bit integer", "", "seed")
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            _report("io", f"cannot create output directory: {exc.strerror}", path=str(out_dir))
            return EXIT_IO
        if not os.access(out_dir, os.W_OK):
            _report("io", "output directory is not writable", path=str(out_dir))
            return EXIT_IO
        out = _Output(out_dir, seed, cfg)
        info = COMMANDS[args.command](cfg, out)
        out.summary(args.command, info)
    except ConfigError as exc:
        _report(exc.category, exc.message, path=exc.path, line=exc.line)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        _report(exc.category, str(exc))
        return EXIT_INVALID
    except QRangeError as exc:
        _report(exc.category, str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _report("io", str(exc))
        return EXIT_IO
    if not args.quiet:
        for f in out.files:
            print(out_dir / f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
