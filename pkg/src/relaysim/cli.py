"""Command line driver: simulate, detect, sweep, tolerance-study, tune, plot.

Every subcommand reads one JSON plan (``--config``), writes into ``--out``
and takes its randomness from ``--seed`` (default: the plan's seed). If a
command fails, the files it had started writing are removed.
"""

import argparse
import csv
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import harness, plotting
from .detectors import map_from_trace, omap_detect, ses_zf_detect
from .model import ChannelRealization, codebook, draw_channels, simulate_forward
from .numerics import RngStream
from .samplers import run_mcmc_abc, run_mcmc_av
from .schema import ConfigError, load_plan_json

log = logging.getLogger("relaysim")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class Outputs:
    """Tracks files written by a command so a failure can remove them."""

    def __init__(self, root):
        self.root = root
        self.created = []
        self._made_dir = False

    def path(self, name):
        if not os.path.isdir(self.root):
            os.makedirs(self.root)
            self._made_dir = True
        p = os.path.join(self.root, name)
        self.created.append(p)
        return p

    def cleanup(self):
        for p in self.created:
            if os.path.exists(p):
                os.remove(p)
        if self._made_dir and not os.listdir(self.root):
            os.rmdir(self.root)


def load_plan(args):
    data = load_plan_json(args.config) if args.config else {}
    if args.seed is not None:
        data = {**data, "seed": args.seed}
    plan = harness.ExperimentPlan.from_dict(data)
    return plan, data


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- frame files ------------------------------------------------------------

FRAME_FIELDS = ("frame", "relay", "slot", "y_re", "y_im", "s_index", "symbol",
                "h_re", "h_im", "g_re", "g_im", "w_re", "w_im")


def write_frames(path, config, frames):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(FRAME_FIELDS)
        for f, (s, ch, y, w) in enumerate(frames):
            sym = config.symbols(s)
            for l in range(config.L):
                for k in range(config.K):
                    nums = (y[l, k].real, y[l, k].imag, s, sym[k], ch.h[l].real, ch.h[l].imag,
                            ch.g[l].real, ch.g[l].imag, w[l, k].real, w[l, k].imag)
                    wr.writerow([f, l, k] + [repr(float(v)) if i != 2 else int(v) for i, v in enumerate(nums)])


def read_frames(path, config):
    """Inverse of ``write_frames``: list of (s_index, channels, y, w)."""
    by_frame = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            by_frame.setdefault(int(r["frame"]), []).append(r)
    out = []
    L, K = config.L, config.K
    for f in sorted(by_frame):
        rows = by_frame[f]
        if len(rows) != L * K:
            raise ValueError(f"frame {f} has {len(rows)} rows, expected {L * K}")
        y = np.empty((L, K), dtype=complex)
        w = np.empty((L, K), dtype=complex)
        h = np.empty(L, dtype=complex)
        g = np.empty(L, dtype=complex)
        for r in rows:
            l, k = int(r["relay"]), int(r["slot"])
            y[l, k] = complex(float(r["y_re"]), float(r["y_im"]))
            w[l, k] = complex(float(r["w_re"]), float(r["w_im"]))
            h[l] = complex(float(r["h_re"]), float(r["h_im"]))
            g[l] = complex(float(r["g_re"]), float(r["g_im"]))
        out.append((int(rows[0]["s_index"]), ChannelRealization(h, g), y, w))
    return out


# -- subcommands ------------------------------------------------------------

def cmd_simulate(args, plan, data, outputs):
    config = plan.config
    frames = []
    for f in range(args.frames):
        g = RngStream(plan.seed, (f,)).generator()
        s = int(config.prior.sample(g))
        ch = draw_channels(config.csi, g)
        y, w = simulate_forward(config, config.symbols(s), ch, g, return_noise=True)
        frames.append((s, ch, y, w))
    write_frames(outputs.path("frames.csv"), config, frames)
    log.info("wrote %d frames", len(frames))


def cmd_detect(args, plan, data, outputs):
    config = plan.config
    frames = read_frames(args.input, config)
    words = codebook(config.M, config.K)
    ctx = None
    if args.method in ("mcmc-abc", "mcmc-av"):
        sub = harness.ExperimentPlan(config, (config.L,), (0.0,), 1, (args.method,), plan.abc, plan.sampler, plan.seed)
        ctx = harness.prepare_cell(sub, config.L, None, 0, config=config)
    path = outputs.path("detections.csv")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["frame", "method", "s_index", "symbols", "score", "true_s_index"])
        for f, (s, ch, y, w) in enumerate(frames):
            if args.method == "ses-zf":
                d = ses_zf_detect(y, config)
            elif args.method == "omap":
                d = omap_detect(y, ch, w, config)
            else:
                g = RngStream(plan.seed, (f, 1)).generator()
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    if args.method == "mcmc-abc":
                        tr = run_mcmc_abc(config, y, ctx.abc_spec, ctx.abc_scales, ctx.N, ctx.burn_in, g)
                    else:
                        tr = run_mcmc_av(config, y, ctx.av_scales, ctx.N, ctx.burn_in, g)
                d = map_from_trace(tr)
            sym = " ".join(repr(float(config.constellation.array[i])) for i in words[d.s_index])
            wr.writerow([f, d.method, d.s_index, sym, repr(d.score), s])
            if not args.quiet:
                print(f"frame {f}: {d.method} -> [{sym}] (true index {s}, detected {d.s_index})")


def cmd_sweep(args, plan, data, outputs):
    def progress(L, snr, recs):
        for r in recs:
            log.info("L=%d snr=%g %s SER=%.4g failures=%d", L, snr, r.detector, r.ser, r.failures)

    records = harness.run_ser_sweep(plan, args.threads, progress)
    harness.write_ser_csv(records, outputs.path("ser.csv"))
    harness.check_ser_rows(harness.read_ser_csv(os.path.join(args.out, "ser.csv")), plan.config.K)
    walls = [{"L": r.L, "snr_db": r.snr_db, "detector": r.detector, "wall_time_s": r.wall_time} for r in records]
    _write_json(outputs.path("meta.json"),
                harness.run_meta(plan.to_dict(), plan.seed, plan.config_hash(), {"wall_times": walls}))


def cmd_tolerance(args, plan, data, outputs):
    tplan = harness.TolerancePlan.from_dict(data.get("tolerance", {}), seed=plan.seed)
    res = harness.run_tolerance_study(plan.config, tplan, args.threads)
    harness.write_acf_csv(res, outputs.path("acf.csv"))
    harness.write_edf_csv(res, outputs.path("edf.csv"))
    harness.write_edf_grid_csv(res, outputs.path("edf_grid.csv"))
    scales = {repr(e): [s.sigma_g_rw_sq, s.sigma_h_rw_sq] for e, s in res.scales.items()}
    _write_json(outputs.path("meta.json"), harness.run_meta(
        {**plan.to_dict(), "tolerance": {k: list(v) if isinstance(v, tuple) else v
                                         for k, v in tplan.__dict__.items()}},
        plan.seed, plan.config_hash(),
        {"tuned_scales": scales, "baseline_acceptance": res.baseline_acceptance,
         "stuck_chains": {f"{w}/{m}/{e!r}": n for (w, m, e), n in res.stuck.items()}}))


def cmd_tune(args, plan, data, outputs):
    rows = []
    for ci, (L, snr) in enumerate(plan.cells()):
        ctx = harness.prepare_cell(plan, L, snr, ci)
        row = {"L": L, "snr_db": snr}
        if ctx.abc_scales is not None:
            row["abc"] = [ctx.abc_scales.sigma_g_rw_sq, ctx.abc_scales.sigma_h_rw_sq]
            row["epsilon"] = ctx.abc_spec.epsilon_min
        if ctx.av_scales is not None:
            row["av"] = [ctx.av_scales.sigma_g_rw_sq, ctx.av_scales.sigma_h_rw_sq, ctx.av_scales.sigma_w_rw_sq]
        rows.append(row)
        log.info("tuned %s", row)
    _write_json(outputs.path("scales.json"), {"seed": plan.seed, "config_hash": plan.config_hash(), "cells": rows})


def cmd_plot(args, plan, data, outputs):
    src = args.input or args.out
    made = 0
    for name, fn, target in (("ser.csv", plotting.ser_chart, "ser.svg"),
                             ("acf.csv", plotting.acf_chart, "acf.svg"),
                             ("edf.csv", plotting.edf_error_chart, "edf_error.svg")):
        p = os.path.join(src, name)
        if os.path.exists(p):
            svg = fn(p)
            with open(outputs.path(target), "w") as fh:
                fh.write(svg)
            made += 1
    if not made:
        raise FileNotFoundError(f"no ser.csv, acf.csv or edf.csv in {src}")


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
    "tolerance-study": cmd_tolerance,
    "tune": cmd_tune,
    "plot": cmd_plot,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON plan file (schema-checked); defaults are used when omitted")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="master seed, overrides the plan's seed")
    common.add_argument("--threads", type=int,
                        help="worker threads; falls back to $RELAYSIM_THREADS, then 1")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    p = argparse.ArgumentParser(prog="relaysim", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="draw frames and dump y, s, channels, relay noise to frames.csv")
    s.add_argument("--frames", type=int, default=10)
    d = sub.add_parser("detect", parents=[common], help="run one detector on a frames.csv")
    d.add_argument("--input", required=True, help="frames.csv written by simulate")
    d.add_argument("--method", default="ses-zf", choices=["ses-zf", "omap", "mcmc-abc", "mcmc-av"])
    sub.add_parser("sweep", parents=[common], help="SER over the plan's L and SNR grids -> ser.csv, meta.json")
    sub.add_parser("tolerance-study", parents=[common],
                   help="tolerance and weighting/metric study -> acf.csv, edf.csv, edf_grid.csv, meta.json")
    sub.add_parser("tune", parents=[common], help="tuned proposal scales per cell -> scales.json")
    pl = sub.add_parser("plot", parents=[common], help="SVG charts from result CSVs")
    pl.add_argument("--input", help="directory holding the CSVs (default: --out)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        plan, data = load_plan(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outputs = Outputs(args.out)
    try:
        COMMANDS[args.command](args, plan, data, outputs)
    except Exception as exc:
        outputs.cleanup()
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
