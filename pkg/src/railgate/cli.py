"""Operator CLI: fit models, train the detector, calibrate, attack, evaluate, serve.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage/config errors
(missing files, schema mismatches, bad flags).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .adversarial import fgsm, fit_adv_detector, load_detector, save_detector
from .config import load_config
from .core import CalibrationError, ConfigError, ModelFormatError, RailgateError, softmax
from .data import load_dataset, save_dataset
from .evaluate import EvalReport, auroc, fpr_at, tpr_at, write_reports
from .models import fit_logistic, load_model, save_model
from .ood import (
    DEFAULT_BINS,
    DEFAULT_DRIFT_THRESHOLD,
    DEFAULT_TARGET_TPR,
    DEFAULT_WINDOW,
    DETECTOR_NAMES,
    ReferenceStats,
    fit_reference_stats,
)

logger = logging.getLogger(__name__)


def _detector_scores(model, X: np.ndarray, temperature: float) -> dict[str, np.ndarray]:
    logits = model.logits_batch(X)
    probs = softmax(logits, temperature)
    z = logits / temperature
    zmax = z.max(axis=1, keepdims=True)
    energy = temperature * (zmax.ravel() + np.log(np.exp(z - zmax).sum(axis=1)))
    return {"msp": probs.max(axis=1), "max_logit": logits.max(axis=1), "energy": energy}


def cmd_fit(args: argparse.Namespace) -> int:
    X, y = load_dataset(args.data)
    model = fit_logistic(
        X, y, learning_rate=args.lr, epochs=args.epochs, seed=args.seed
    )
    acc = float((np.argmax(model.logits_batch(X), axis=1) == y).mean())
    save_model(model, args.out)
    print(f"fit logistic model on {len(X)} rows: train accuracy {acc:.4f} -> {args.out}")
    return 0


def cmd_train_detector(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    X, y = load_dataset(args.data)
    clip = tuple(args.clip) if args.clip else None
    detector = fit_adv_detector(
        model,
        X,
        y,
        epsilon=args.epsilon,
        tau=args.tau,
        seed=args.seed,
        learning_rate=args.lr,
        epochs=args.epochs,
        clip=clip,
    )
    save_detector(detector, args.out)
    print(f"trained adversarial detector (epsilon={args.epsilon}, tau={args.tau}) -> {args.out}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    X, y = load_dataset(args.data)
    stats = fit_reference_stats(
        X,
        model.logits_batch(X),
        temperature=args.temperature,
        num_bins=args.bins,
        window_size=args.window,
        target_tpr=args.target_tpr,
        drift_threshold=args.drift_threshold,
        policy=args.policy,
        enabled=tuple(args.detectors.split(",")),
        background_size=args.background_size,
        seed=args.seed,
    )
    stats.save(args.out)
    achieved = {
        name: float((stats.calibration_scores[name] >= stats.thresholds.threshold_for(name)).mean())
        for name in stats.thresholds.enabled
    }
    print(
        f"calibrated {len(stats.thresholds.enabled)} detectors at target TPR "
        f"{args.target_tpr}: achieved {achieved} -> {args.out}"
    )
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    X, y = load_dataset(args.data)
    clip = tuple(args.clip) if args.clip else None
    adv = np.vstack([fgsm(model, X[i], int(y[i]), args.epsilon, clip) for i in range(len(X))])
    save_dataset(args.out, adv, y)
    linf = float(np.max(np.abs(adv - X))) if len(X) else 0.0
    print(f"wrote {len(adv)} FGSM rows (epsilon={args.epsilon}, max |dx|={linf:.4f}) -> {args.out}")
    return 0


def _eval_ood(args: argparse.Namespace) -> list[EvalReport]:
    model = load_model(args.model)
    X_id, _ = load_dataset(args.data)
    X_ood, _ = load_dataset(args.ood_data)
    stats: Optional[ReferenceStats] = (
        ReferenceStats.load(args.refstats) if args.refstats else None
    )
    temperature = stats.temperature if stats is not None else args.temperature
    id_scores = _detector_scores(model, X_id, temperature)
    ood_scores = _detector_scores(model, X_ood, temperature)

    reports = []
    for name in DETECTOR_NAMES:
        if stats is not None and name in stats.thresholds.enabled:
            thr = stats.thresholds.threshold_for(name)
        else:
            srt = np.sort(id_scores[name])
            thr = float(srt[int(np.floor((1 - args.target_tpr) * len(srt)))])
        reports.append(
            EvalReport(
                detector=name,
                auroc=auroc(id_scores[name], ood_scores[name]),
                threshold=float(thr),
                tpr_at_threshold=tpr_at(id_scores[name], thr),
                fpr_at_threshold=fpr_at(ood_scores[name], thr),
                n_pos=len(X_id),
                n_neg=len(X_ood),
            )
        )
    _write_eval_outputs(args.out, reports, id_scores, ood_scores, kind="ood")
    return reports


def _eval_adversarial(args: argparse.Namespace) -> list[EvalReport]:
    detector = load_detector(args.detector)
    X_clean, _ = load_dataset(args.data)
    X_adv, _ = load_dataset(args.adv_data)
    clean = np.array([detector.score(x) for x in X_clean])
    adv = np.array([detector.score(x) for x in X_adv])
    report = EvalReport(
        detector="adversarial",
        auroc=auroc(adv, clean),
        threshold=detector.tau,
        tpr_at_threshold=tpr_at(adv, detector.tau),
        fpr_at_threshold=fpr_at(clean, detector.tau),
        n_pos=len(adv),
        n_neg=len(clean),
    )
    _write_eval_outputs(
        args.out, [report], {"adversarial": adv}, {"adversarial": clean}, kind="adversarial"
    )
    return [report]


def _write_eval_outputs(out_dir, reports, pos_scores, neg_scores, kind: str) -> None:
    """report.json + scores.csv + one ROC and one histogram per detector."""
    from .plots import save_roc_curve, save_score_histogram

    os.makedirs(out_dir, exist_ok=True)
    write_reports(os.path.join(out_dir, "report.json"), reports)

    names = list(pos_scores)
    with open(os.path.join(out_dir, "scores.csv"), "w", encoding="utf-8") as fh:
        fh.write("detector,side,score\n")
        for name in names:
            for v in pos_scores[name]:
                fh.write(f"{name},pos,{float(v)!r}\n")
            for v in neg_scores[name]:
                fh.write(f"{name},neg,{float(v)!r}\n")
    pos_label, neg_label = ("in-distribution", "ood") if kind == "ood" else ("perturbed", "clean")
    for name in names:
        save_roc_curve(
            pos_scores[name],
            neg_scores[name],
            os.path.join(out_dir, f"roc_{name}.png"),
            title=f"{name} ROC",
        )
        save_score_histogram(
            pos_scores[name],
            neg_scores[name],
            os.path.join(out_dir, f"hist_{name}.png"),
            title=f"{name} scores",
            pos_label=pos_label,
            neg_label=neg_label,
        )


def cmd_evaluate(args: argparse.Namespace) -> int:
    if bool(args.ood_data) == bool(args.adv_data):
        raise ConfigError("evaluate needs exactly one of --ood-data or --adv-data")
    if args.ood_data:
        if not args.model:
            raise ConfigError("--model is required with --ood-data")
        reports = _eval_ood(args)
    else:
        if not args.detector:
            raise ConfigError("--detector is required with --adv-data")
        reports = _eval_adversarial(args)
    for r in reports:
        print(
            f"{r.detector}: AUROC {r.auroc:.4f}, TPR@thr {r.tpr_at_threshold:.4f}, "
            f"FPR@thr {r.fpr_at_threshold:.4f} (n={r.n_pos}/{r.n_neg})"
        )
    print(f"report written to {os.path.join(args.out, 'report.json')}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import Gateway, create_app

    config = load_config(args.config)
    host = args.host if args.host else config.host
    port = args.port if args.port else config.port
    gateway = Gateway(config)
    app = create_app(gateway)
    print(f"serving {len(config.models)} model(s) on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railgate",
        description="Guarded ML inference gateway and its operator tooling.",
    )
    parser.add_argument("--version", action="version", version=f"railgate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a logistic model on a labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("train-detector", help="build an FGSM set and fit the adversarial detector")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.6)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_train_detector)

    p = sub.add_parser("calibrate", help="compute reference stats and detector thresholds")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target-tpr", type=float, default=DEFAULT_TARGET_TPR, dest="target_tpr")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--drift-threshold", type=float, default=DEFAULT_DRIFT_THRESHOLD, dest="drift_threshold")
    p.add_argument("--policy", choices=("any", "majority", "all"), default="any")
    p.add_argument("--detectors", default=",".join(DETECTOR_NAMES))
    p.add_argument("--background-size", type=int, default=50, dest="background_size")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("attack", help="write an FGSM-perturbed copy of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="score detector quality, write report + figures")
    p.add_argument("--model")
    p.add_argument("--data", required=True, help="clean / in-distribution CSV")
    p.add_argument("--ood-data", dest="ood_data")
    p.add_argument("--adv-data", dest="adv_data")
    p.add_argument("--detector")
    p.add_argument("--refstats")
    p.add_argument("--target-tpr", type=float, default=DEFAULT_TARGET_TPR, dest="target_tpr")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the gateway")
    p.add_argument("--config", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("RAILGATE_LOG_LEVEL", "INFO"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelFormatError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RailgateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
