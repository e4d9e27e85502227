"""Command-line entry point.

Every subcommand writes plot-ready CSV (or JSON with ``--format json``) to
stdout or ``--out``.  Physical defaults are echoed as ``#`` metadata lines
so an output file describes itself.  Exit codes: 0 success, 1 protocol
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .adversary import FORGERY_ATTACKS, forge_bench
from .channel import LinkGeometry, NoiseParams, OpticsParams, link_budget, total_excess_noise
from .harness import Scenario, ScenarioError, run
from .keyrate import (
    CvModelParams,
    DecoyParams,
    bb84_key_rate,
    consensus_rate,
    cv_error_correction_terms,
    cv_outcome_probabilities,
)
from .qds import signature_rate
from .security_bounds import (
    PROTOCOLS,
    BoundInputs,
    case1_failure,
    case2_failure,
    complexity,
    minimal_players,
    qba_failure,
    signature_length_planner,
)

EXIT_OK, EXIT_PROTOCOL, EXIT_USAGE = 0, 1, 2
DEFAULT_TARGET_EPS = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- value parsing ---------------------------------------------------------------

def parse_grid(text: str, cast=float) -> list:
    """'a,b,c' or 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [cast(start + k * step) for k in range(count)]
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use a,b,c or start:stop:step") from None


def _int_grid(text):
    return parse_grid(text, cast=lambda v: int(round(float(v))))


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


# -- output ----------------------------------------------------------------------

class Table:
    def __init__(self, command: str, header: list[str], meta: dict | None = None):
        self.command = command
        self.header = header
        self.meta = dict(meta or {})
        self.rows: list[list] = []

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("row width differs from header")
        self.rows.append(list(row))

    def render(self, form: str) -> str:
        if form == "json":
            doc = {"command": self.command, "metadata": self.meta,
                   "rows": [dict(zip(self.header, r)) for r in self.rows]}
            return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"
        buf = io.StringIO()
        buf.write(f"# circqba {__version__} {self.command}\n")
        for k in sorted(self.meta):
            buf.write(f"# {k}={fmt(self.meta[k])}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([fmt(v) for v in r])
        return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- shared argument groups ---------------------------------------------------------

def _add_channel_args(p):
    g = p.add_argument_group("channel")
    g.add_argument("--altitude", type=parse_grid, default=[300.0], help="km; a,b,c or start:stop:step")
    g.add_argument("--zenith", type=parse_grid, default=[0.0], help="rad; a,b,c or start:stop:step")
    g.add_argument("--wavelength", type=float, default=1550e-9, help="m")
    g.add_argument("--beam-waist", type=float, default=0.15, help="W0 at the transmitter, m")
    g.add_argument("--aperture", type=float, default=0.75, help="receiver aperture radius, m")
    g.add_argument("--pointing-error", type=float, default=1e-6, help="theta_p, rad")
    g.add_argument("--wander-std", type=float, default=1.0, help="sigma_TB, m")
    g.add_argument("--turbulence-origin", choices=("transmitter", "ground"), default="transmitter")
    g.add_argument("--exact-coupling", action="store_true", help="Bessel quadrature instead of the analytic law")


def _optics(a) -> OpticsParams:
    return OpticsParams(wavelength=a.wavelength, W0=a.beam_waist, aperture=a.aperture,
                        pointing_error=a.pointing_error, wander_std=a.wander_std,
                        turbulence_origin=a.turbulence_origin)


def _grid(a):
    for h in a.altitude:
        for z in a.zenith:
            yield h, z, LinkGeometry(h * 1e3, z)


def _add_decoy_args(p):
    g = p.add_argument_group("BB84 decoy")
    g.add_argument("--protocol", choices=("bb84",), default="bb84")
    g.add_argument("--block-size", type=float, default=1e10, help="pulses per finite-key block")
    g.add_argument("--rep-rate", type=float, default=1e9, help="Hz")
    g.add_argument("--detector-efficiency", type=float, default=0.70)
    g.add_argument("--dark-count", type=float, default=1e-8)
    g.add_argument("--misalignment", type=float, default=0.02)
    g.add_argument("--f-ec", type=float, default=1.1)
    g.add_argument("--q-x", type=float, default=0.9)
    g.add_argument("--players", type=int, default=7)
    g.add_argument("--message-bits", type=float, default=1e8)
    g.add_argument("--signature-bits", type=int, default=None,
                   help="n; default: smallest n with eps_QBA <= --target-eps for f = N-2")
    g.add_argument("--target-eps", type=float, default=DEFAULT_TARGET_EPS)


def _decoy(a) -> DecoyParams:
    return DecoyParams(q_x=a.q_x, n_pulses=a.block_size, f_ec=a.f_ec,
                       detector_efficiency=a.detector_efficiency, dark_count=a.dark_count,
                       misalignment=a.misalignment, rep_rate=a.rep_rate)


def _signature_bits(a) -> int:
    if a.signature_bits is not None:
        if a.signature_bits < 2:
            raise UsageError("--signature-bits must be at least 2")
        return a.signature_bits
    if a.players < 3:
        raise UsageError("--players must be at least 3")
    return signature_length_planner(a.players, a.players - 2, int(a.message_bits), a.target_eps)


def _physics_meta(a, optics: OpticsParams, decoy: DecoyParams | None = None) -> dict:
    meta = {f"optics.{k}": v for k, v in asdict(optics).items()}
    if decoy is not None:
        meta.update({f"decoy.{k}": v for k, v in asdict(decoy).items()})
        meta["decoy.rep_rate_note"] = "assumed; unpublished for BB84"
    meta["coupling"] = "exact" if a.exact_coupling else "analytic"
    return meta


# -- subcommands ----------------------------------------------------------------------

def cmd_simulate(a) -> int:
    try:
        sc = Scenario.load(a.scenario)
    except (OSError, ScenarioError) as exc:
        raise UsageError(str(exc)) from None
    if a.seed is not None:
        sc.seed = a.seed
    tr = run(sc)
    if a.out:
        tr.write(a.out)
    summary = tr.summary()
    summary["transcript_sha256"] = tr.sha256()
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if tr.ok():
        return EXIT_OK
    if tr.forgeries:
        print(f"forgery: {tr.forgeries} tampered QDS package(s) accepted", file=sys.stderr)
    if tr.aborted:
        print(f"aborted: {tr.rounds[-1].abort_reason}", file=sys.stderr)
    print(f"IC1={tr.ic1} IC2={tr.ic2}", file=sys.stderr)
    return EXIT_PROTOCOL


def cmd_bounds(a) -> int:
    t = Table("bounds", ["protocol", "N", "f", "m", "n", "eps_case1", "eps_case2", "eps_qba",
                         "complexity", "complexity_sci"],
              {"note": "eps columns apply to the circular protocol; N defaults to each protocol's minimum"})
    for f in a.f:
        for proto in a.protocol:
            Ns = a.N if a.N else [minimal_players(proto, f)]
            for N in Ns:
                c = complexity(proto, N, f)
                eps = [None, None, None]
                if proto == "circular":
                    try:
                        inp = BoundInputs(N, f, a.m, a.n)
                    except ValueError:
                        continue
                    eps = [case1_failure(inp), case2_failure(inp), qba_failure(inp)]
                t.add(proto, N, f, a.m, a.n, *eps, c, format(c, ".3e"))
    emit(t.render(a.format), a.out)
    return EXIT_OK


def _rate_rows(a):
    optics, decoy = _optics(a), _decoy(a)
    n = _signature_bits(a)
    for h, z, geom in _grid(a):
        b = link_budget(geom, optics, exact=a.exact_coupling)
        kr, kl = bb84_key_rate(b.eta_mean, decoy)
        # every star link sees the same channel in this sweep
        cr = consensus_rate([kr] * a.players, a.players, n)
        yield h, z, b, kl, kr, signature_rate(kr, n), cr
    return


def cmd_keyrate(a) -> int:
    optics, decoy = _optics(a), _decoy(a)
    n = _signature_bits(a)
    meta = _physics_meta(a, optics, decoy)
    meta.update(players=a.players, message_bits=int(a.message_bits), signature_bits=n)
    t = Table("keyrate", ["altitude", "zenith", "eta_mean", "l_key", "KR_bps", "SR", "CR"], meta)
    for h, z, b, kl, kr, sr, cr in _rate_rows(a):
        t.add(h, z, b.eta_mean, kl.l_key, kr, sr, cr)
    emit(t.render(a.format), a.out)
    return EXIT_OK


def cmd_consensus_rate(a) -> int:
    if a.sweep == "altitude" and a.altitude == [300.0]:
        a.altitude = parse_grid("200:1000:50")
    if a.sweep == "zenith" and a.zenith == [0.0]:
        a.zenith = parse_grid("0:1.2:0.05")
    optics, decoy = _optics(a), _decoy(a)
    n = _signature_bits(a)
    meta = _physics_meta(a, optics, decoy)
    meta.update(players=a.players, message_bits=int(a.message_bits), signature_bits=n, sweep=a.sweep)
    t = Table("consensus-rate", ["altitude", "zenith", "eta_mean", "KR_bps", "SR", "CR"], meta)
    for h, z, b, kl, kr, sr, cr in _rate_rows(a):
        t.add(h, z, b.eta_mean, kr, sr, cr)
    emit(t.render(a.format), a.out)
    return EXIT_OK


def cmd_channel(a) -> int:
    optics = _optics(a)
    noise = NoiseParams(a.xi_channel, a.xi_detector)
    meta = _physics_meta(a, optics)
    meta.update({"noise.channel_excess": noise.channel_excess,
                 "noise.detector_excess": noise.detector_excess, "detection": a.detection})
    t = Table("channel", ["altitude", "zenith", "eta_ext", "W_ST", "eta_mean", "xi"], meta)
    for h, z, geom in _grid(a):
        b = link_budget(geom, optics, exact=a.exact_coupling)
        xi = total_excess_noise(noise, b.eta_mean, a.detection) if b.eta_mean > 0 else math.inf
        t.add(h, z, b.eta_ext, b.waist, b.eta_mean, xi)
    emit(t.render(a.format), a.out)
    return EXIT_OK


def cmd_cvmodel(a) -> int:
    cv = CvModelParams(alpha=a.alpha, delta_c=a.delta_c, delta_a=a.delta_a, delta_p=a.delta_p,
                       eta=a.eta, xi=a.xi, beta=a.beta)
    meta = {f"cv.{k}": v for k, v in asdict(cv).items()}
    meta["note"] = "error-model quantities only; no CV key rate is emitted"
    t = Table("cvmodel", ["mode", "quadrature", "x", "outcome", "value"], meta)
    modes = ("heterodyne", "homodyne") if a.mode == "both" else (a.mode,)
    for mode in modes:
        tables = [cv_outcome_probabilities(mode, cv, x) for x in range(4)]
        terms = cv_error_correction_terms(mode, cv, tables)
        if mode == "heterodyne":
            for x, tab in enumerate(tables):
                for o, v in tab.items():
                    t.add(mode, "", x, o, v)
            per_quad = {"": terms}
        else:
            for x, tab in enumerate(tables):
                for q in ("q", "p"):
                    for o, v in tab[q].items():
                        t.add(mode, q, x, o, v)
            per_quad = terms
        for q, e in per_quad.items():
            for name in ("p_pass", "delta_ec", "h_z", "h_z_given_x"):
                t.add(mode, q, "all", name, getattr(e, name))
    emit(t.render(a.format), a.out)
    return EXIT_OK


def cmd_forge_bench(a) -> int:
    if a.n < 2 or a.msg_bits < 1 or a.trials < 1:
        raise UsageError("need --n >= 2, --msg-bits >= 1, --trials >= 1")
    seed = 0 if a.seed is None else a.seed
    try:
        r = forge_bench(a.n, a.msg_bits, a.trials, a.strategy, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t = Table("forge-bench", ["strategy", "n", "msg_bits", "trials", "successes", "frequency",
                              "bound", "sigma", "within_3sigma"], {"seed": seed})
    t.add(r.strategy, r.n, r.msg_bits, r.trials, r.successes, r.frequency, r.bound, r.sigma,
          r.within_bound())
    emit(t.render(a.format), a.out)
    return EXIT_OK if r.within_bound() else EXIT_PROTOCOL


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output file (simulate: transcript directory)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    # the common flags live on each subcommand: argparse lets subparser
    # defaults overwrite values parsed at the top level
    p = _Parser(prog="circqba", description="Circular quantum Byzantine agreement toolkit")
    p.add_argument("--version", action="version", version=f"circqba {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="run a scenario file")
    s.add_argument("scenario")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("bounds", parents=[common], help="failure bounds and complexity table")
    s.add_argument("--N", type=_int_grid, default=None, help="players; default each protocol's minimum")
    s.add_argument("--f", type=_int_grid, default=[10])
    s.add_argument("--m", type=int, default=1000)
    s.add_argument("--n", type=int, default=128)
    s.add_argument("--protocol", type=lambda v: v.split(","), default=list(PROTOCOLS))
    s.set_defaults(fn=cmd_bounds)

    s = sub.add_parser("consensus-rate", parents=[common], help="CR versus altitude or zenith")
    s.add_argument("--sweep", choices=("altitude", "zenith"), default="altitude")
    _add_channel_args(s)
    _add_decoy_args(s)
    s.set_defaults(fn=cmd_consensus_rate)

    s = sub.add_parser("keyrate", parents=[common], help="BB84 finite-key rates on a channel grid")
    _add_channel_args(s)
    _add_decoy_args(s)
    s.set_defaults(fn=cmd_keyrate)

    s = sub.add_parser("channel", parents=[common], help="downlink transmittance and noise")
    _add_channel_args(s)
    s.add_argument("--xi-channel", type=float, default=0.01)
    s.add_argument("--xi-detector", type=float, default=0.01)
    s.add_argument("--detection", choices=("homodyne", "heterodyne"), default="homodyne")
    s.set_defaults(fn=cmd_channel)

    s = sub.add_parser("cvmodel", parents=[common], help="DM-CV outcome tables and EC terms")
    s.add_argument("--mode", choices=("heterodyne", "homodyne", "both"), default="both")
    s.add_argument("--alpha", type=float, default=0.72)
    s.add_argument("--delta-c", type=float, default=0.42)
    s.add_argument("--delta-a", type=float, default=0.52)
    s.add_argument("--delta-p", type=float, default=0.0)
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--xi", type=float, default=0.02)
    s.add_argument("--beta", type=float, default=0.95)
    s.set_defaults(fn=cmd_cvmodel)

    s = sub.add_parser("forge-bench", parents=[common], help="empirical forgery frequency")
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--msg-bits", type=int, default=64)
    s.add_argument("--trials", type=int, default=100000)
    s.add_argument("--strategy", choices=sorted(FORGERY_ATTACKS), default="random")
    s.set_defaults(fn=cmd_forge_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"circqba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # parameter validation inside the models
        print(f"circqba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
