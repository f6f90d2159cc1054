"""Command-line driver: ``wzlab <moments|regions|codec|asymptotic>``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.  The seed comes from ``--seed``, else ``WZLAB_SEED``, else the
config file.
"""

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, NumericalError, Infeasible
from .config import ExperimentConfig
from .output import CODEC_HEADER, REGION_HEADER, base_meta, write_json, write_records

log = logging.getLogger("wzlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "WZLAB_SEED"


def _resolve_seed(flag):
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    try:
        v = int(env)
    except ValueError:
        raise ConfigError(SEED_ENV, f"not an integer: {env!r}") from None
    if not 0 <= v < 2**64:
        raise ConfigError(SEED_ENV, "must be an unsigned 64-bit integer")
    return v


def _ext(fmt):
    return "json" if fmt == "json" else "csv"


# --------------------------------------------------------------------------


def cmd_moments(cfg, out, threads=1, fmt="csv", plots=True):
    from .moments import MomentCache, compute_moments

    mo = cfg.raw["moments"]
    s = compute_moments(
        cfg.model, cfg.channel, int(mo["n"]), int(mo["n_trials"]), cfg.seed,
        cfg.trial_settings(), threads, cache=MomentCache(out / "cache"),
        analytic_means=mo["analytic_means"],
    )
    d = s.to_dict()
    d.update(base_meta(cfg, "moments"))
    d["corr_dist_gen"] = float(s.corr[2, 3])
    write_json(out / "moments.json", d)
    return s


def _providers(cfg, mode, out, threads):
    from .moments import MomentCache, compute_moments
    from .source_model import channel_params

    rg = cfg.raw["region"]
    cache = MomentCache(out / "cache")
    settings = cfg.trial_settings(mode)

    def make(n):
        def provider(dc):
            return compute_moments(cfg.model, channel_params(cfg.model.sigma2, dc), n, int(rg["n_trials"]),
                                   cfg.seed, settings, threads, cache=cache,
                                   analytic_means=rg["analytic_means"])
        return provider

    return make


def cmd_regions(cfg, out, threads=1, fmt="csv", plots=True):
    from .region import best_g_floor, best_rate, channel_grid, r_d_g, r_wz

    rg = cfg.raw["region"]
    sigma2 = cfg.model.sigma2
    solver = cfg.solver()
    d0 = float(rg["D"])
    grid = channel_grid([d0] + list(rg["d_grid"]), sigma2, tuple(rg["channel_gaps"]))
    written = []
    for mode in rg["modes"]:
        make = _providers(cfg, mode, out, threads)
        rate_rows, dg_rows = [], []
        for n in rg["n_grid"]:
            prov = make(int(n))
            for eps in rg["epsilon_grid"]:
                for g in rg["g_grid"]:
                    try:
                        rate = best_rate(prov, grid, int(n), eps, d0, g, solver).rate_bits
                    except Infeasible:
                        rate = math.inf
                    rate_rows.append((int(n), eps, d0, g, rate, "finite", g - sigma2))
                for R in rg["rate_grid"]:
                    for d in rg["d_grid"]:
                        try:
                            gmin, _ = best_g_floor(prov, grid, int(n), eps, d, R, solver)
                        except Infeasible:
                            gmin = math.inf
                        dg_rows.append((int(n), eps, d, gmin, R, "finite", gmin - sigma2))
        asym = []
        for g in rg["g_grid"]:
            rate = r_d_g(d0, g, sigma2) if g >= sigma2 else math.inf
            asym.append((g, rate))
            rate_rows.append(("", "", d0, g, rate, "asymptotic", g - sigma2))
        for R in rg["rate_grid"]:
            for d in rg["d_grid"]:
                gmin = sigma2 if R >= r_wz(d, sigma2) else math.inf
                dg_rows.append(("", "", d, gmin, R, "asymptotic", gmin - sigma2))

        meta = base_meta(cfg, "regions")
        meta["mode"] = mode
        p1 = out / f"regions_rate_g_{mode}.{_ext(fmt)}"
        p2 = out / f"regions_dg_{mode}.{_ext(fmt)}"
        write_records(p1, REGION_HEADER, rate_rows, meta, fmt)
        write_records(p2, REGION_HEADER, dg_rows, dict(meta, note="G column is the minimal G at rate_bits"), fmt)
        written += [p1, p2]
        if plots:
            from .plotting import plot_dg, plot_rate_g

            plot_rate_g(rate_rows, [a for a in asym if math.isfinite(a[1])],
                        out / f"regions_rate_g_{mode}.png", f"D={d0}, {mode}")
            plot_dg([(r[0], r[1], r[2], r[3], r[4]) for r in dg_rows if r[5] == "finite"],
                    out / f"regions_dg_{mode}.png", mode)
    return written


def cmd_codec(cfg, out, threads=1, fmt="csv", plots=True):
    from .codec_sim import run_codec

    co = cfg.raw["codec"]
    res = run_codec(cfg.model, cfg.channel, cfg.codec, float(co["D"]), float(co["G"]), cfg.seed,
                    threads, int(co["bound_samples"]))
    rows = [(o.trial_id, o.encode_ok, o.debin_ok, o.cause, o.distortion, o.gen_error) for o in res.outcomes]
    write_records(out / f"codec_trials.{_ext(fmt)}", CODEC_HEADER, rows, base_meta(cfg, "codec"), fmt)
    summary = res.summary()
    summary.update(base_meta(cfg, "codec"))
    summary.update({"D": float(co["D"]), "G": float(co["G"])})
    write_json(out / "codec_summary.json", summary)
    return res


def cmd_asymptotic(cfg, out, threads=1, fmt="csv", plots=True):
    from .region import achievable_root_loss, r_d_g, r_wz, raginsky_bounds

    a = cfg.raw["asymptotic"]
    sigma2 = cfg.model.sigma2
    rd = [(d, r_wz(d, sigma2), r_d_g(d, float(a["G"]), sigma2)) for d in a["d_grid"]]
    rag = []
    for R in a["rate_grid"]:
        b = raginsky_bounds(R, sigma2)
        rag.append((R, b.lower, b.upper, achievable_root_loss(R, sigma2)))
    meta = base_meta(cfg, "asymptotic")
    write_records(out / f"asymptotic_rd.{_ext(fmt)}", ("D", "r_wz_bits", "r_d_g_bits"), rd,
                  dict(meta, G=a["G"]), fmt)
    write_records(out / f"raginsky.{_ext(fmt)}", ("rate_bits", "lower_root", "upper_root", "achievable_root"),
                  rag, meta, fmt)
    if plots:
        from .plotting import plot_asymptotic

        plot_asymptotic(rd, rag, out / "asymptotic.png")
    return rd, rag


COMMANDS = {
    "moments": cmd_moments,
    "regions": cmd_regions,
    "codec": cmd_codec,
    "asymptotic": cmd_asymptotic,
}


def build_parser():
    p = argparse.ArgumentParser(prog="wzlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        cfg = ExperimentConfig.load(args.config)
        seed = _resolve_seed(args.seed)
        if seed is not None:
            cfg = cfg.with_seed(seed)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args.out, args.threads, args.format, not args.no_plots)
    except ConfigError as exc:
        print(f"wzlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"wzlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
