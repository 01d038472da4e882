"""Command-line front end.

Subcommands: distance, map, match, synth, noise, drift, correlate, verify.
Exit codes: 0 success, 2 usage error (argparse), 3 data error,
4 verification failure. Every subcommand is deterministic given its flags,
input bytes, and seed; --threads never changes output bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .maps import (Probe, asplund_map, correlation_map, default_threads,
                   extract_minima)
from .mapio import save_distance_map
from .model import (ClampDiagnostics, ModelConstructionError, clamp_gamut,
                    make_mixing_model, to_transmittance)
from .pairdist import ToleranceSpec, image_pair_distance, image_pair_distance_tol
from .solver import SolverError
from .synthio import (ImageFormatError, SceneSpec, add_noise, apply_drift,
                      load_image, save_image, scene_spec_from_json,
                      scene_spec_to_json, synth_scene)
from .verify import run_all

_DATA_ERRORS = (ImageFormatError, SolverError, ModelConstructionError,
                ValueError, OSError, json.JSONDecodeError)


def _add_probe_args(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--probe", metavar="PATH",
                       help="probe image file (PNG or PPM)")
    group.add_argument("--probe-rect", nargs=4, type=int,
                       metavar=("X", "Y", "W", "H"),
                       help="cut the probe out of the input image")
    sub.add_argument("--anchor", nargs=2, type=int, metavar=("DX", "DY"),
                     help="probe anchor offset (default: floor centre)")


def _resolve_probe(args, image: np.ndarray) -> Probe:
    if args.probe is not None:
        probe_img = load_image(args.probe)
    else:
        x, y, w, h = args.probe_rect
        ih, iw = image.shape[:2]
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > iw or y + h > ih:
            raise ValueError(f"probe rect {args.probe_rect} outside image "
                             f"{iw}x{ih}")
        probe_img = image[y:y + h, x:x + w]
    anchor = tuple(args.anchor) if args.anchor is not None else None
    return Probe(image=probe_img, anchor=anchor)


def _discard_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--discard-fraction", type=float, default=0.0,
                     metavar="P",
                     help="fraction of most-constraining points discarded "
                          "per side (default 0)")


def _threads_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: LIPCMATCH_THREADS or 1); "
                          "never changes output bytes")


def cmd_distance(args) -> int:
    model = make_mixing_model()
    f = load_image(args.image_f)
    g = load_image(args.image_g)
    diag = ClampDiagnostics()
    for img in (f, g):
        to_transmittance(model, clamp_gamut(model, img, diag), diag)
    p = args.discard_fraction
    tol = ToleranceSpec(discard_fraction=p)
    if p > 0:
        r = image_pair_distance_tol(model, f, g, tol=tol)
        low, high = len(r.discarded_low), len(r.discarded_high)
    else:
        r = image_pair_distance(model, f, g)
        low = high = 0
    report = {
        "kind": "distance",
        "discard_fraction": p,
        "distance": r.distance,
        "lambda": r.lam,
        "mu": r.mu,
        "discarded_low": low,
        "discarded_high": high,
        "clamp_events": {"gamut": diag.gamut_clamps,
                         "transmittance": diag.transmittance_clamps},
    }
    if args.json:
        json.dump(report, sys.stdout)
        sys.stdout.write("\n")
    else:
        print(f"distance {r.distance:.6f}")
        print(f"lambda   {r.lam:.9g} (discarded {low})")
        print(f"mu       {r.mu:.9g} (discarded {high})")
        print(f"clamp events: gamut {diag.gamut_clamps}, "
              f"transmittance {diag.transmittance_clamps}")
    return 0


def _computed_map(args, correlation: bool):
    model = make_mixing_model()
    f = load_image(args.image)
    probe = _resolve_probe(args, f)
    threads = args.threads if args.threads is not None else default_threads()
    if correlation:
        dmap = correlation_map(f, probe, threads=threads)
    else:
        tol = ToleranceSpec(discard_fraction=args.discard_fraction)
        dmap = asplund_map(model, f, probe, tol=tol, threads=threads)
    return dmap, threads


def _map_report(args, correlation: bool) -> int:
    dmap, threads = _computed_map(args, correlation)
    header = save_distance_map(dmap, args.out, preview=args.preview)
    ys, xs = dmap.valid_slice()
    region = dmap.values[ys, xs]
    report = {
        "kind": "correlation-map" if correlation else "map",
        "out_base": args.out,
        "header": header,
        "min": float(np.nanmin(region)),
        "max": float(np.nanmax(region)),
        "valid_count": int(np.isfinite(region).sum()),
        "threads": threads,
    }
    if args.json:
        json.dump(report, sys.stdout)
        sys.stdout.write("\n")
    else:
        print(f"wrote {args.out}.json / {args.out}.f64"
              + (f" / {args.out}.pgm" if args.preview else ""))
        print(f"valid {report['valid_count']} positions, "
              f"min {report['min']:.6g}, max {report['max']:.6g}")
    return 0


def cmd_map(args) -> int:
    return _map_report(args, correlation=False)


def cmd_correlate(args) -> int:
    return _map_report(args, correlation=True)


def cmd_match(args) -> int:
    dmap, _ = _computed_map(args, correlation=False)
    matches = extract_minima(dmap, radius=args.radius,
                             max_count=args.max_count,
                             threshold=args.threshold)
    report = {
        "kind": "match",
        "tolerance_p": matches.tolerance_p,
        "radius": matches.radius,
        "points": [{"x": pt.position[0], "y": pt.position[1],
                    "value": pt.value, "rank": pt.rank}
                   for pt in matches.points],
    }
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    return 0


def cmd_synth(args) -> int:
    model = make_mixing_model()
    if args.seed is not None and args.spec is not None:
        raise ValueError("give either --spec or --seed, not both")
    if args.spec is not None:
        with open(args.spec) as fh:
            spec = scene_spec_from_json(fh.read())
    else:
        spec = SceneSpec(seed=args.seed if args.seed is not None else 0)
    img, centres = synth_scene(model, spec)
    save_image(img, args.out)
    if args.ground_truth:
        with open(args.ground_truth, "w") as fh:
            json.dump({"centres": [[x, y] for x, y in centres]}, fh)
            fh.write("\n")
    report = {
        "kind": "synth",
        "out": args.out,
        "width": spec.width,
        "height": spec.height,
        "ground_truth": [[x, y] for x, y in centres],
    }
    if args.json:
        json.dump(report, sys.stdout)
        sys.stdout.write("\n")
    else:
        print(f"wrote {args.out} with {len(centres)} ground-truth centres")
    return 0


def cmd_spec_template(args) -> int:
    # convenience: emit a default SceneSpec JSON to edit
    sys.stdout.write(scene_spec_to_json(SceneSpec(seed=args.seed or 0)))
    return 0


def cmd_noise(args) -> int:
    img = load_image(args.input)
    out = add_noise(img, args.density, args.sigma2, args.seed)
    save_image(out, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_drift(args) -> int:
    model = make_mixing_model()
    img = load_image(args.input)
    out = apply_drift(model, img, args.alpha_top, args.alpha_bottom)
    save_image(out, args.output)
    print(f"wrote {args.output}")
    return 0


def cmd_verify(args) -> int:
    results = run_all(quick=args.quick, perturb_k=args.perturb_k)
    all_passed = all(r.passed for r in results)
    if args.json:
        report = {
            "kind": "verify",
            "passed": all_passed,
            "suites": [{"name": r.name, "passed": r.passed,
                        "detail": r.detail, "seconds": r.seconds}
                       for r in results],
        }
        json.dump(report, sys.stdout)
        sys.stdout.write("\n")
    else:
        for r in results:
            mark = "PASS" if r.passed else "FAIL"
            print(f"[{mark}] {r.name:<12} {r.seconds:7.2f} s  {r.detail}")
        print("verification " + ("passed" if all_passed else "FAILED"))
    return 0 if all_passed else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lipcmatch",
        description="Illumination-insensitive colour template matching "
                    "via double-sided logarithmic probing.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("distance", help="sandwich distance between two images")
    sub.add_argument("image_f")
    sub.add_argument("image_g")
    _discard_flag(sub)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(fn=cmd_distance)

    for name, fn, with_discard in (("map", cmd_map, True),
                                   ("correlate", cmd_correlate, False)):
        sub = subs.add_parser(
            name, help=("distance map of a probe over an image" if with_discard
                        else "normalized cross-correlation map (baseline)"))
        sub.add_argument("image")
        _add_probe_args(sub)
        if with_discard:
            _discard_flag(sub)
        sub.add_argument("--out", required=True,
                         help="output base path (.json/.f64/.pgm added)")
        sub.add_argument("--preview", action=argparse.BooleanOptionalAction,
                         default=True, help="emit 16-bit PGM preview")
        _threads_flag(sub)
        sub.add_argument("--json", action="store_true")
        sub.set_defaults(fn=fn)

    sub = subs.add_parser("match", help="regional minima of the distance map")
    sub.add_argument("image")
    _add_probe_args(sub)
    _discard_flag(sub)
    sub.add_argument("--radius", type=int, default=1)
    sub.add_argument("--threshold", type=float, default=float("inf"))
    sub.add_argument("--max-count", type=int, default=64)
    _threads_flag(sub)
    sub.set_defaults(fn=cmd_match)

    sub = subs.add_parser("synth", help="generate a synthetic scene")
    sub.add_argument("--spec", help="SceneSpec JSON file")
    sub.add_argument("--seed", type=int, default=None,
                     help="default scene with this seed (instead of --spec)")
    sub.add_argument("--out", required=True)
    sub.add_argument("--ground-truth", help="write centres JSON here")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(fn=cmd_synth)

    sub = subs.add_parser("spec-template",
                          help="print a default SceneSpec JSON")
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(fn=cmd_spec_template)

    sub = subs.add_parser("noise", help="add impulse-placed Gaussian noise")
    sub.add_argument("input")
    sub.add_argument("output")
    sub.add_argument("--density", type=float, required=True)
    sub.add_argument("--sigma2", type=float, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(fn=cmd_noise)

    sub = subs.add_parser("drift", help="apply vertical lighting drift")
    sub.add_argument("input")
    sub.add_argument("output")
    sub.add_argument("--alpha-top", type=float, required=True)
    sub.add_argument("--alpha-bottom", type=float, required=True)
    sub.set_defaults(fn=cmd_drift)

    sub = subs.add_parser("verify", help="run the self-verification suites")
    sub.add_argument("--quick", action="store_true")
    sub.add_argument("--perturb-k", action="store_true",
                     help="negative control: corrupt K and expect failure")
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(fn=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
