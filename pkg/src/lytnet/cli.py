"""``lytnet`` command line: infer, eval, replay, inspect.

Exit codes: 0 ok, 2 bad weights (or stub probabilities), 3 unreadable or
wrong-size image, 4 bad or empty label set, 5 bad replay stream or config.
Every failure prints one line starting with ``error:`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .dataset import load_image, load_labels, resize_bilinear
from .errors import LytNetError
from .guidance import FrameObservation, GuidanceConfig, GuidanceSession, Kind
from .metrics import Outcome, eval_report
from .model import (
    CLASSES,
    LytNet,
    build_default_spec,
    count_params_and_macs,
    load_weights,
    random_weights,
)
from .tensor import softmax

EXIT_WEIGHTS, EXIT_IMAGE, EXIT_LABELS, EXIT_STREAM = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_net(path) -> LytNet:
    try:
        return LytNet(load_weights(path))
    except LytNetError as exc:
        raise CliError(EXIT_WEIGHTS, f"weights {path}: {exc}") from None


def _read_input(path, resize: bool) -> np.ndarray:
    try:
        img = load_image(path)
    except LytNetError as exc:
        raise CliError(EXIT_IMAGE, str(exc)) from None
    _, h, w = img.shape
    want_c, want_h, want_w = build_default_spec().input_shape
    if (h, w) != (want_h, want_w):
        if not resize:
            raise CliError(
                EXIT_IMAGE, f"{path}: image is {w}x{h}, expected {want_w}x{want_h} (use --resize)"
            )
        img = resize_bilinear(img, want_w, want_h)
    return img


def _predict_all(net, paths, resize, workers):
    """Run the network over images; output order matches ``paths``."""
    images = [_read_input(p, resize) for p in paths]
    if workers > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(net.forward, images))
    return [net.forward(img) for img in images]


def _dumps(obj) -> str:
    return json.dumps(obj)


def cmd_infer(args, out):
    net = _load_net(args.weights)
    preds = _predict_all(net, args.images, args.resize, args.workers)
    for path, pred in zip(args.images, preds):
        d = pred.to_dict()
        if args.json:
            out.write(_dumps({"image": str(path), **d}) + "\n")
        else:
            probs = " ".join(f"{p:.4f}" for p in d["probs"])
            coords = " ".join(f"{c:.4f}" for c in d["coords"])
            out.write(f"{path}\t{d['class']}\t{probs}\t{coords}\n")
    return 0


def _load_stub_probs(path):
    """Read ``path,<5 class probs>,xs,ys,xe,ye`` rows keyed by label path."""
    header = ["path", *CLASSES, "xs", "ys", "xe", "ye"]
    table = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if [h.strip() for h in next(reader, [])] != header:
                raise CliError(EXIT_WEIGHTS, f"{path}:1: expected header {','.join(header)}")
            for row in reader:
                if not row:
                    continue
                try:
                    vals = [float(v) for v in row[1:]]
                except ValueError:
                    vals = []
                if len(row) != len(header) or len(vals) != 9:
                    raise CliError(EXIT_WEIGHTS, f"{path}:{reader.line_num}: malformed row")
                probs = np.asarray(vals[:5])
                table[row[0].strip()] = Outcome(int(np.argmax(probs)), tuple(vals[5:]))
    except OSError as exc:
        raise CliError(EXIT_WEIGHTS, f"cannot read {path}: {exc.strerror}") from None
    return table


def cmd_eval(args, out):
    try:
        records = load_labels(args.labels)
    except (OSError, LytNetError) as exc:
        raise CliError(EXIT_LABELS, str(exc)) from None
    if not records:
        raise CliError(EXIT_LABELS, f"{args.labels}: label set is empty")
    if args.probs_from_csv:
        table = _load_stub_probs(args.probs_from_csv)
        base = Path(args.labels).parent
        preds = []
        for rec in records:
            key = rec.path.relative_to(base).as_posix()
            if key not in table:
                raise CliError(EXIT_WEIGHTS, f"{args.probs_from_csv}: no row for {key}")
            preds.append(table[key])
    else:
        if not args.weights:
            raise CliError(EXIT_WEIGHTS, "eval needs --weights or --probs-from-csv")
        net = _load_net(args.weights)
        preds = _predict_all(net, [r.path for r in records], args.resize, args.workers)
    report = eval_report(preds, records, remap_ptlr=args.remap_ptlr)
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if args.figures:
        from .plotting import plot_class_scores, plot_confusion

        plot_confusion(report, Path(args.figures) / "confusion.png")
        plot_class_scores(report, Path(args.figures) / "class_scores.png")
    return 0


def _parse_stream(path, frame_period):
    entries = []
    last_t = None
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CliError(EXIT_STREAM, f"cannot read stream {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            raise CliError(EXIT_STREAM, f"{where}: not valid JSON") from None
        if not isinstance(rec, dict):
            raise CliError(EXIT_STREAM, f"{where}: each line must be a JSON object")
        extra = set(rec) - {"t_ms", "image", "probs", "coords"}
        if extra:
            raise CliError(EXIT_STREAM, f"{where}: unknown keys {sorted(extra)}")
        if ("image" in rec) == ("probs" in rec):
            raise CliError(EXIT_STREAM, f"{where}: need exactly one of 'image' or 'probs'")
        t = rec.get("t_ms")
        if t is None:
            t = 0 if last_t is None else last_t + frame_period
        if isinstance(t, bool) or not isinstance(t, int):
            raise CliError(EXIT_STREAM, f"{where}: t_ms must be an integer")
        if last_t is not None and t <= last_t:
            raise CliError(EXIT_STREAM, f"{where}: t_ms {t} is not after {last_t}")
        last_t = t
        if "image" in rec:
            entries.append((lineno, t, Path(path).parent / rec["image"], None))
        else:
            if "coords" not in rec:
                raise CliError(EXIT_STREAM, f"{where}: 'probs' lines need 'coords'")
            entries.append((lineno, t, None, (rec["probs"], rec["coords"])))
    return entries


def cmd_replay(args, out, err):
    try:
        config = GuidanceConfig.load(args.config) if args.config else GuidanceConfig()
    except (OSError, LytNetError, TypeError) as exc:
        raise CliError(EXIT_STREAM, f"config: {exc}") from None
    entries = _parse_stream(args.stream, config.frame_period_ms)
    image_paths = [e[2] for e in entries if e[2] is not None]
    predictions = {}
    if image_paths:
        if not args.weights:
            raise CliError(EXIT_WEIGHTS, "stream contains images; --weights is required")
        net = _load_net(args.weights)
        preds = _predict_all(net, image_paths, args.resize, args.workers)
        predictions = dict(zip(image_paths, preds))
    session = GuidanceSession(config)
    h, w = build_default_spec().input_shape[1:]
    for lineno, t, image, stub in entries:
        if image is not None:
            pred = predictions[image]
            probs, coords = pred.probabilities, pred.coords
        else:
            probs, coords = stub
        try:
            obs = FrameObservation(t, probs, coords, width=w, height=h)
            session.feed(obs)
        except (LytNetError, TypeError) as exc:
            raise CliError(EXIT_STREAM, f"{args.stream}:{lineno}: {exc}") from None
    log = "".join(ev.to_json() + "\n" for ev in session.events)
    if args.out:
        Path(args.out).write_text(log, encoding="utf-8")
    else:
        out.write(log)
    counts = Counter(ev.kind for ev in session.events)
    summary = " ".join(f"{k.value}={counts.get(k, 0)}" for k in Kind)
    err.write(f"summary: frames={len(entries)} events={len(session.events)} {summary}\n")
    return 0


def _fmt_shape(shape):
    return "x".join(str(d) for d in shape)


def cmd_inspect(args, out):
    spec = build_default_spec()
    cost = count_params_and_macs(spec)
    show_spec = args.spec or not (args.macs or args.params or args.bench)
    if args.json:
        doc = {"input_shape": list(spec.input_shape), **cost.to_dict()}
        doc["spec"] = [
            {"row": r.row, "kind": r.layer.kind, "k": r.layer.k, "e": r.layer.e,
             "c": r.layer.c, "se": r.layer.use_se, "nl": r.layer.nl, "s": r.layer.s}
            for r in spec.resolved
        ]
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        if show_spec:
            out.write("row\tinput\toperator\tk\te\tc\tSE\tNL\ts\toutput\n")
            for r in spec.resolved:
                L = r.layer
                cells = [r.row, _fmt_shape(r.input_shape), L.kind, L.k or "-", L.e or "-",
                         L.c or ("5,4" if L.kind == "fc" else "-"), "yes" if L.use_se else "-",
                         L.nl or "-", L.s if L.kind != "avgpool" else "-",
                         _fmt_shape(r.output_shape)]
                out.write("\t".join(str(c) for c in cells) + "\n")
        if args.params or args.macs:
            out.write("row\tkind\toutput\tparams\tmacs\tstandard_macs\tratio\n")
            for l in cost.layers:
                std = "-" if l.standard_macs is None else str(l.standard_macs)
                ratio = "-" if l.ratio is None else f"{l.ratio:.4f}"
                out.write(f"{l.row}\t{l.kind}\t{_fmt_shape(l.output_shape)}\t{l.params}"
                          f"\t{l.macs}\t{std}\t{ratio}\n")
            out.write(f"total\t-\t-\t{cost.total_params}\t{cost.total_macs}\t-\t-\n")
    if args.bench:
        net = LytNet(random_weights(spec, seed=args.seed))
        x = np.random.default_rng(args.seed).random(spec.input_shape, dtype=np.float32)
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            net.forward(x)
            times.append(time.perf_counter() - t0)
        ms = 1000 * float(np.median(times))
        out.write(f"bench\tforward_ms={ms:.1f}\tfps={1000 / ms:.2f}\trepeat={args.repeat}\n")
    if args.figures:
        from .plotting import plot_layer_costs

        plot_layer_costs(cost, Path(args.figures) / "layer_costs.png")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="lytnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def workers(sp):
        sp.add_argument("--workers", type=int, default=1, help="parallel image workers")
        sp.add_argument("--resize", action="store_true",
                        help="bilinearly resize nonconforming images to 768x576")

    s = sub.add_parser("infer", help="classify images")
    s.add_argument("weights")
    s.add_argument("images", nargs="+")
    s.add_argument("--json", action="store_true", help="JSON Lines output")
    workers(s)

    s = sub.add_parser("eval", help="score a labelled set")
    s.add_argument("labels", help="label CSV (path,class,xs,ys,xe,ye)")
    s.add_argument("--weights")
    s.add_argument("--probs-from-csv", help="use stored predictions instead of a network")
    s.add_argument("--remap-ptlr", action="store_true",
                   help="score countdown predictions as 'none'")
    s.add_argument("--out")
    s.add_argument("--figures", help="directory for report figures")
    workers(s)

    s = sub.add_parser("replay", help="run guidance over an observation stream")
    s.add_argument("stream")
    s.add_argument("--config")
    s.add_argument("--weights")
    s.add_argument("--out")
    workers(s)

    s = sub.add_parser("inspect", help="architecture and cost tables")
    s.add_argument("--spec", action="store_true")
    s.add_argument("--macs", action="store_true")
    s.add_argument("--params", action="store_true")
    s.add_argument("--bench", action="store_true", help="time one forward pass")
    s.add_argument("--repeat", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", action="store_true")
    s.add_argument("--figures", help="directory for report figures")
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.command == "infer":
            return cmd_infer(args, out)
        if args.command == "eval":
            return cmd_eval(args, out)
        if args.command == "replay":
            return cmd_replay(args, out, err)
        return cmd_inspect(args, out)
    except CliError as exc:
        msg = str(exc).replace("\n", " ")
        err.write(f"error: {msg}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
