"""Command-line front end: ``pimsim --scheme pim --p 5 --np 4 --mod qam4 --snr 0:20:2``.

Results are written as CSV. The first line is a ``#`` comment that echoes
the run options in canonical form, so a file records how to regenerate it.
The default worker count comes from the ``PIMSIM_WORKERS`` environment
variable (1 if unset).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import os
import shlex
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .detect import DEFAULT_BUDGET, HypothesisBudgetError
from .harness import DETECTORS, BerCurve, InsufficientRangeError, StopRule, gap_at_ber, run_sweep
from .modem import Scheme, SchemeConfig, spectral_efficiency

WORKERS_ENV = "PIMSIM_WORKERS"
EXIT_OK, EXIT_USAGE, EXIT_REFUSED = 0, 2, 3

CSV_HEADER = ["scheme", "p", "nt", "nr", "np", "mod", "bpcu", "snr_db", "trials", "bits",
              "bit_errors", "ber", "ci95", "elapsed_s"]

MODULATIONS = ("bpsk", "qam4", "qam8", "qam16")
DEFAULT_SNR = (0.0, 20.0, 2.0)

# preset -> [(scheme config kwargs, default SNR range)]
PRESETS = {
    "fig5": [
        (dict(scheme="prpp-sm", p=5, n_t=4, alphabet="bpsk"), (0.0, 20.0, 2.0)),
        (dict(scheme="sm", p=1, n_t=4, alphabet="bpsk"), (0.0, 30.0, 2.0)),
        (dict(scheme="prpp", p=5, alphabet="qam8"), (0.0, 24.0, 2.0)),
    ],
    "fig6": [
        (dict(scheme="pim", p=5, n_p=4, alphabet="qam4"), (0.0, 24.0, 2.0)),
        (dict(scheme="prpp", p=5, alphabet="qam16"), (0.0, 28.0, 2.0)),
        (dict(scheme="sm", p=1, n_t=4, alphabet="qam4"), (0.0, 40.0, 2.0)),
    ],
    "fig7": [
        (dict(scheme="pim-sm", p=5, n_t=4, n_p=2, alphabet="bpsk"), (0.0, 20.0, 2.0)),
        (dict(scheme="pim", p=5, n_p=4, alphabet="qam4"), (0.0, 24.0, 2.0)),
        (dict(scheme="prpp-sm", p=5, n_t=4, alphabet="qam4"), (0.0, 20.0, 2.0)),
    ],
}


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    """Everything that determines the numbers a run produces.

    ``out``, ``workers`` and ``timing`` only affect where and how results
    are written, so they are left out of comparisons and of the CSV echo.
    """

    scheme: Optional[str] = None
    preset: Optional[str] = None
    p: int = 1
    n_t: int = 1
    n_r: int = 1
    n_p: int = 1
    alphabet: str = "bpsk"
    seed: int = 0
    snr: Optional[tuple] = None
    target_errors: Optional[int] = 200
    max_trials: Optional[int] = 10 ** 6
    max_seconds: Optional[float] = None
    detector: str = "ml"
    identity_precoder: bool = False
    report_ber: Optional[float] = None
    out: Optional[str] = field(default=None, compare=False)
    workers: int = field(default=1, compare=False)
    timing: bool = field(default=False, compare=False)
    verbose: bool = field(default=False, compare=False)

    def stop_rule(self) -> StopRule:
        return StopRule(self.target_errors, self.max_trials, self.max_seconds)

    def runs(self) -> list:
        """``(SchemeConfig, snr_list)`` for every curve of the run."""
        if self.preset:
            items = [(SchemeConfig(**kw, n_r=self.n_r, seed=self.seed), rng) for kw, rng in PRESETS[self.preset]]
        else:
            cfg = SchemeConfig(self.scheme, self.p, self.n_t, self.n_r, self.n_p, self.alphabet,
                               self.seed, self.identity_precoder)
            items = [(cfg, DEFAULT_SNR)]
        return [(cfg, snr_range(*(self.snr or default))) for cfg, default in items]

    def echo_args(self) -> list:
        """Canonical argument list that re-parses to an equal spec."""
        args = []
        if self.preset:
            args += ["--preset", self.preset]
            if self.n_r != 1:
                args += ["--nr", str(self.n_r)]
        else:
            args += ["--scheme", self.scheme, "--p", str(self.p), "--nt", str(self.n_t),
                     "--nr", str(self.n_r)]
            if Scheme(self.scheme).uses_precoder_index:
                args += ["--np", str(self.n_p)]
            args += ["--mod", self.alphabet]
            if self.identity_precoder:
                args.append("--identity-precoder")
        args += ["--seed", str(self.seed)]
        if self.snr is not None:
            args += ["--snr", ":".join(repr(float(v)) for v in self.snr)]
        args += ["--target-errors", _opt(self.target_errors), "--max-trials", _opt(self.max_trials)]
        if self.max_seconds is not None:
            args += ["--max-seconds", repr(float(self.max_seconds))]
        args += ["--detector", self.detector]
        if self.report_ber is not None:
            args += ["--report-ber", repr(float(self.report_ber))]
        return args


def _opt(v) -> str:
    return "none" if v is None else str(v)


def snr_range(start: float, stop: float, step: float) -> list:
    """Inclusive SNR grid ``start, start+step, ... <= stop``."""
    if step <= 0:
        raise UsageError("SNR step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(round(start + i * step, 10)) for i in range(max(n, 0))]


def _parse_snr(text: str) -> tuple:
    parts = text.split(":")
    try:
        values = tuple(float(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR range {text!r}") from None
    if len(values) == 1:
        values = (values[0], values[0], 1.0)
    if len(values) != 3 or values[2] <= 0:
        raise argparse.ArgumentTypeError("SNR range must be start:stop:step with step > 0")
    return values


def _optional_int(text: str) -> Optional[int]:
    if text.lower() == "none":
        return None
    return int(float(text))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pimsim",
        description="BER simulation of PRPP, SM, PRPP-SM, PIM and PIM-SM over Rayleigh fading.",
    )
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="run all curves of one comparison figure")
    parser.add_argument("--p", type=int, help="block length in channel uses")
    parser.add_argument("--nt", type=int, help="transmit antennas")
    parser.add_argument("--nr", type=int, default=1, help="receive antennas")
    parser.add_argument("--np", type=int, dest="n_p", help="precoder columns per block (PIM, PIM-SM)")
    parser.add_argument("--mod", choices=MODULATIONS)
    parser.add_argument("--identity-precoder", action="store_true",
                        help="PRPP only: replace the phase precoder by the identity")
    parser.add_argument("--snr", type=_parse_snr, help="start:stop:step in dB (inclusive; default 0:20:2 or the preset's ranges)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target-errors", type=_optional_int, default=200)
    parser.add_argument("--max-trials", type=_optional_int, default=10 ** 6)
    parser.add_argument("--max-seconds", type=float, default=None,
                        help="wall-clock cap per SNR point (makes results timing dependent)")
    parser.add_argument("--detector", choices=DETECTORS, default="ml")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (default ${WORKERS_ENV} or 1)")
    parser.add_argument("--out", help="CSV file (default: stdout)")
    parser.add_argument("--timing", action="store_true",
                        help="record wall time in the elapsed_s column (otherwise 0, keeping "
                             "the file byte-reproducible)")
    parser.add_argument("--report-ber", type=float, default=None,
                        help="print pairwise SNR gaps at this BER after the run")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _spec_from_namespace(ns: argparse.Namespace) -> RunSpec:
    if ns.preset and ns.scheme:
        raise UsageError("--preset and --scheme are mutually exclusive")
    if not ns.preset and not ns.scheme:
        raise UsageError("one of --scheme or --preset is required")
    workers = ns.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    common = dict(seed=ns.seed, snr=ns.snr, target_errors=ns.target_errors, max_trials=ns.max_trials,
                  max_seconds=ns.max_seconds, detector=ns.detector, report_ber=ns.report_ber,
                  out=ns.out, workers=workers, timing=ns.timing, verbose=ns.verbose, n_r=ns.nr)
    if ns.preset:
        given = [f for f in ("p", "nt", "n_p", "mod") if getattr(ns, f) is not None]
        if given or ns.identity_precoder:
            raise UsageError("presets fix the scheme parameters; drop --p/--nt/--np/--mod")
        spec = RunSpec(preset=ns.preset, **common)
    else:
        scheme = Scheme(ns.scheme)
        if ns.n_p is not None and not scheme.uses_precoder_index:
            raise UsageError(f"--np does not apply to --scheme {scheme.value}")
        if ns.nt is not None and not scheme.uses_antenna_index and ns.nt != 1:
            raise UsageError(f"--scheme {scheme.value} uses a single transmit antenna")
        spec = RunSpec(scheme=scheme.value, p=ns.p if ns.p is not None else 1,
                       n_t=ns.nt if ns.nt is not None else 1, n_p=ns.n_p if ns.n_p is not None else 1,
                       alphabet=ns.mod or "bpsk", identity_precoder=ns.identity_precoder, **common)
    try:
        spec.runs()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def parse_args(argv: Sequence[str] | None = None) -> RunSpec:
    """Parse and validate command-line arguments.

    Usage problems exit with status 2 after printing the usage message.
    """
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return _spec_from_namespace(ns)
    except UsageError as exc:
        parser.error(str(exc))


def spec_from_csv(path) -> RunSpec:
    """Re-parse the run options echoed in the first line of a result file."""
    with open(path) as fh:
        first = fh.readline()
    prefix = "# pimsim "
    if not first.startswith(prefix):
        raise ValueError(f"{path} has no pimsim echo line")
    return parse_args(shlex.split(first[len(prefix):]))


def _fmt(v) -> str:
    return repr(float(v))


def csv_text(curves: Sequence[BerCurve], spec: RunSpec | None = None, timing: bool = False) -> str:
    buf = io.StringIO()
    if spec is not None:
        buf.write("# pimsim " + shlex.join(spec.echo_args()) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for curve in curves:
        c = curve.config
        for pt in curve.points:
            writer.writerow([
                c.scheme.value, c.p, c.n_t, c.n_r, c.n_p, c.alphabet, spectral_efficiency(c),
                _fmt(pt.snr_db), pt.trials, pt.bits, pt.bit_errors, _fmt(pt.ber),
                _fmt(pt.ci95_halfwidth), _fmt(pt.elapsed_seconds if timing else 0.0),
            ])
    return buf.getvalue()


def emit_csv(curves: Sequence[BerCurve], path, spec: RunSpec | None = None, timing: bool = False) -> None:
    """Write ``curves`` to ``path`` (``None`` or ``-`` for stdout)."""
    text = csv_text(curves, spec, timing)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def report_gaps(curves: Sequence[BerCurve], ber_level: float) -> str:
    """Pairwise SNR gaps at ``ber_level``; positive means the first curve is better."""
    lines = [f"SNR gaps at BER {ber_level:g}:"]
    for a, b in itertools.combinations(curves, 2):
        name = f"  {a.config.label()} vs {b.config.label()}: "
        try:
            lines.append(name + f"{gap_at_ber(a, b, ber_level):+.2f} dB")
        except InsufficientRangeError:
            lines.append(name + "not bracketed by the simulated range")
    return "\n".join(lines)


def run(spec: RunSpec) -> list:
    curves = []
    for cfg, snrs in spec.runs():
        curves.append(run_sweep(cfg, snrs, spec.stop_rule(), spec.seed, spec.detector,
                                DEFAULT_BUDGET, workers=spec.workers))
    return curves


def main(argv: Sequence[str] | None = None) -> int:
    spec = parse_args(argv)
    if spec.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        curves = run(spec)
    except HypothesisBudgetError as exc:
        print(f"pimsim: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ValueError as exc:
        print(f"pimsim: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    try:
        emit_csv(curves, spec.out, spec, spec.timing)
    except OSError as exc:
        print(f"pimsim: cannot write {spec.out}: {exc}", file=sys.stderr)
        return 1
    if spec.report_ber is not None:
        print(report_gaps(curves, spec.report_ber), file=sys.stderr if spec.out in (None, "-") else sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
