"""Batch pipeline: generate, train, evaluate, simulate, report.

Every stage reads a YAML run config and writes its artifacts under the
configured output directory::

    data/<patient>/{ecg,ieeg}_{train,eval}.szn
    models/<patient>/{ecg,ieeg}.sznm, {ecg,ieeg}_curve.csv
    eval/<patient>/metrics.{csv,json}, {ecg,ieeg}_probs.npy
    sim/trace.txt, sim/report.json, sim/decisions.csv
    report/comparison.csv

Files are written to a temporary name and renamed into place, so an
interrupted stage never leaves a half-written artifact behind.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError, DependencyError
from .metrics import (
    ConfusionMatrix,
    confusion_from_decisions,
    macro_average,
    metrics_csv,
    pooled_summary,
    summarize,
)
from .netsim import confusion_from_trace, parse_trace_line, run_simulation, scenario_from_dict
from .netsim.scenario import StreamClassifier
from .nn import FocalLossConfig, ModelSpec, TrainConfig, load_checkpoint, predict_proba, save_checkpoint, train
from .nn.model import ConvBlock
from .predictor import FusionConfig, ModalityRule, ecg_decide, fuse_streams, ieeg_decide
from .recording_io import load_recording, save_recording
from .signals import (
    WINDOW_S,
    BackgroundSpectrum,
    DatasetSplit,
    GeneratorConfig,
    Label,
    PreictalShift,
    SampleWindow,
    duration_for_ratio,
    generate_recording,
    preprocess,
    split_indices,
    standardize,
    window_labels,
)

log = logging.getLogger(__name__)

MODALITIES = ("ecg", "ieeg")
STAGES = ("generate", "train", "evaluate", "simulate", "report")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: Path = Path("runs/default")
    patients: tuple = ("p1",)
    generator: dict = field(default_factory=dict)
    ieeg_channels: int = 3
    preprocess: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    loss: dict = field(default_factory=dict)
    fusion: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "patients", tuple(str(p) for p in self.patients))
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        if not self.patients:
            raise ConfigurationError("at least one patient is required")
        if len(set(self.patients)) != len(self.patients):
            raise ConfigurationError("patient ids must be unique")
        if self.ieeg_channels < 1:
            raise ConfigurationError("ieeg_channels must be positive")
        # Parse every block once so bad configs fail before any stage runs.
        self.fusion_config()
        self.train_config()
        self.focal_config()
        self.generator_config("_")
        self.model_spec("ecg")
        self._check_preprocess()

    def _check_preprocess(self):
        unknown = set(self.preprocess) - {"ecg", "ieeg"}
        if unknown:
            raise ConfigurationError(f"preprocess: unknown modalities {sorted(unknown)}")
        fs = int(self.generator.get("sample_rate_hz", 256))
        probe = SampleWindow(0.0, np.zeros((1, WINDOW_S * fs)), Label.INTERICTAL, fs)
        for modality, block in self.preprocess.items():
            pp = dict(block or {})
            pp.pop("standardize", None)
            try:
                preprocess(probe, **pp)
            except TypeError as exc:
                raise ConfigurationError(f"preprocess.{modality}: {exc}") from None

    # -- parsed blocks ------------------------------------------------------
    def patient_seed(self, patient: str, salt: int = 0) -> int:
        ss = np.random.SeedSequence([int(self.seed), zlib.crc32(patient.encode()), salt])
        return int(ss.generate_state(1, np.uint64)[0])

    def generator_config(self, patient: str, salt: int = 0) -> GeneratorConfig:
        g = {k: v for k, v in self.generator.items() if k not in ("duration_s", "eval_duration_s")}
        shift = g.pop("preictal_shift", "separable")
        shift = PreictalShift.preset(shift) if isinstance(shift, str) else PreictalShift(**shift)
        spectrum = BackgroundSpectrum(**g.pop("background_spectrum", {}))
        try:
            return GeneratorConfig(seed=self.patient_seed(patient, salt), preictal_shift=shift,
                                   background_spectrum=spectrum, **g)
        except TypeError as exc:
            raise ConfigurationError(f"generator: {exc}") from None

    def durations(self, gen: GeneratorConfig) -> tuple[float, float]:
        base = duration_for_ratio(gen)
        train_d = self.generator.get("duration_s") or base
        return float(train_d), float(self.generator.get("eval_duration_s") or train_d)

    def model_spec(self, modality: str) -> ModelSpec:
        m = dict(self.model)
        fs = int(self.generator.get("sample_rate_hz", 256))
        kw = {"input_channels": 1, "input_length": WINDOW_S * fs}
        if "conv_blocks" in m:
            kw["conv_blocks"] = tuple(ConvBlock(*b) if isinstance(b, (list, tuple)) else ConvBlock(**b)
                                      for b in m.pop("conv_blocks"))
        if "dense_widths" in m:
            kw["dense_widths"] = tuple(m.pop("dense_widths"))
        try:
            return ModelSpec(**kw, **m)
        except TypeError as exc:
            raise ConfigurationError(f"model: {exc}") from None

    def train_config(self) -> TrainConfig:
        t = dict(self.training)
        t.setdefault("seed", int(self.seed) % 2**32)
        try:
            return TrainConfig(**t)
        except TypeError as exc:
            raise ConfigurationError(f"training: {exc}") from None

    def focal_config(self) -> FocalLossConfig:
        try:
            return FocalLossConfig(**self.loss)
        except TypeError as exc:
            raise ConfigurationError(f"loss: {exc}") from None

    def fusion_config(self) -> FusionConfig:
        try:
            return FusionConfig(**self.fusion)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"fusion: {exc}") from None

    # -- paths --------------------------------------------------------------
    def recording_path(self, patient, modality, part):
        return self.out / "data" / patient / f"{modality}_{part}.szn"

    def checkpoint_path(self, patient, modality):
        return self.out / "models" / patient / f"{modality}.sznm"

    def eval_dir(self, patient):
        return self.out / "eval" / patient


_KNOWN = {f.name for f in fields(RunConfig)}


def config_from_dict(d: dict, seed=None, out=None, patients=None, fusion=None) -> RunConfig:
    d = dict(d or {})
    unknown = set(d) - _KNOWN
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if seed is not None:
        d["seed"] = seed
    if out is not None:
        d["out"] = out
    if patients is not None:
        d["patients"] = patients
    if fusion is not None:
        d["fusion"] = {**d.get("fusion", {}), "modality_rule": fusion}
    return RunConfig(**d)


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return config_from_dict(data or {}, **overrides)


# --------------------------------------------------------------------------
# artifact helpers
# --------------------------------------------------------------------------

def write_atomic(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data.encode() if isinstance(data, str) else data)
    os.replace(tmp, path)


def _npy_bytes(arr) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr), allow_pickle=False)
    return buf.getvalue()


def _require(path, stage):
    if not Path(path).exists():
        raise DependencyError(stage, path)
    return path


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _all_windows(rec, cfg: RunConfig, gen: GeneratorConfig, modality: str):
    """Every consecutive window of a recording as (x, labels), x shaped (n, C, L)."""
    fs = rec.sample_rate_hz
    starts, labels = window_labels(rec.duration_s, rec.seizure_onsets, gen.horizon_s, gen.exclusion_s)
    span = WINDOW_S * fs
    n = starts.size
    x = rec.samples[:, :n * span].reshape(rec.channel_count, n, span).transpose(1, 0, 2)
    pp = dict(cfg.preprocess.get(modality) or {})
    do_standardize = pp.pop("standardize", True)
    if pp:
        x = np.stack([preprocess(SampleWindow(float(s), w, Label.INTERICTAL, fs), **pp).channels
                      for s, w in zip(starts, x)])
    if do_standardize:
        x = standardize(x)
    return np.ascontiguousarray(x), labels


def _per_channel(x: np.ndarray, y: np.ndarray):
    """Flatten (n, C, L) windows into (n*C, 1, L) single-channel samples."""
    n, c, length = x.shape
    return x.reshape(n * c, 1, length), np.repeat(y, c)


def _as_windows(x, y, fs):
    return [SampleWindow(0.0, xi, Label(int(yi)), fs) for xi, yi in zip(x, y)]


def _training_split(cfg: RunConfig, patient: str, modality: str):
    gen = cfg.generator_config(patient)
    rec = load_recording(_require(cfg.recording_path(patient, modality, "train"), "generate"), patient)
    x, labels = _all_windows(rec, cfg, gen, modality)
    keep = labels >= 0
    x, y = x[keep], labels[keep]
    parts = split_indices(y, cfg.patient_seed(patient, 2))
    split = [_per_channel(x[idx], y[idx]) for idx in parts]
    return rec.sample_rate_hz, split


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> list[Path]:
    """Write a training and a held-out evaluation recording per patient and modality."""
    written = []
    for patient in cfg.patients:
        for part, salt in (("train", 0), ("eval", 1)):
            gen = cfg.generator_config(patient, salt)
            duration = cfg.durations(gen)[0 if part == "train" else 1]
            for modality in MODALITIES:
                channels = 1 if modality == "ecg" else cfg.ieeg_channels
                # Both modalities share gen.seed and therefore the onset layout.
                rec = generate_recording(gen, modality, channels, duration, patient_id=patient)
                path = cfg.recording_path(patient, modality, part)
                save_recording(rec, path)
                written.append(path)
                log.info("generated %s (%d x %d samples)", path, rec.channel_count, rec.sample_count)
    return written


def cmd_train(cfg: RunConfig) -> list[Path]:
    """Train one model per patient and modality; iEEG models see one channel at a time."""
    tc, fl = cfg.train_config(), cfg.focal_config()
    written = []
    for patient in cfg.patients:
        for modality in MODALITIES:
            fs, ((xtr, ytr), (xva, yva), _) = _training_split(cfg, patient, modality)
            split = DatasetSplit(_as_windows(xtr, ytr, fs), _as_windows(xva, yva, fs), [])
            result = train(cfg.model_spec(modality), split, fl, tc)
            ck = cfg.checkpoint_path(patient, modality)
            save_checkpoint(result.params, ck)
            curve = ck.with_name(f"{modality}_curve.csv")
            write_atomic(curve, result.curve_csv())
            written += [ck, curve]
            log.info("trained %s %s: best epoch %s", patient, modality, result.best_epoch)
    return written


def _score_for(rule: ModalityRule, ecg_p, ieeg_p):
    return {ModalityRule.AND: np.minimum(ecg_p, ieeg_p), ModalityRule.OR: np.maximum(ecg_p, ieeg_p),
            ModalityRule.ECG_ONLY: ecg_p, ModalityRule.IEEG_ONLY: ieeg_p}[rule]


def _row(patient, modality, fusion, summary):
    return {"patient": patient, "modality": modality, "fusion": fusion, **summary}


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    """Window-level test AUC plus voted stream metrics on the held-out recording."""
    fusion = cfg.fusion_config()
    rule = fusion.modality_rule
    written = []
    for patient in cfg.patients:
        params = {m: load_checkpoint(_require(cfg.checkpoint_path(patient, m), "train")) for m in MODALITIES}
        rows, window_auc, probs = [], {}, {}
        for m in MODALITIES:
            _, (_, _, (xte, yte)) = _training_split(cfg, patient, m)
            p = predict_proba(params[m], xte)
            window_auc[m] = summarize(confusion_from_decisions((p >= fusion.threshold).astype(int), yte), p, yte)
            rows.append(_row(patient, m, "window", window_auc[m]))

        gen = cfg.generator_config(patient, 1)
        labels = None
        for m in MODALITIES:
            rec = load_recording(_require(cfg.recording_path(patient, m, "eval"), "generate"), patient)
            x, labels = _all_windows(rec, cfg, gen, m)
            n, c, _ = x.shape
            flat, _ = _per_channel(x, labels)
            probs[m] = predict_proba(params[m], flat).reshape(n, c).T  # (channels, steps)

        decisions = {"ecg": ecg_decide(probs["ecg"][0], fusion), "ieeg": ieeg_decide(probs["ieeg"], fusion)}
        scores = {"ecg": probs["ecg"][0], "ieeg": probs["ieeg"].mean(axis=0)}
        decisions["combined"] = fuse_streams(decisions["ecg"], decisions["ieeg"], rule)
        scores["combined"] = _score_for(rule, scores["ecg"], scores["ieeg"])
        keep = labels >= 0
        stream = {}
        for m in ("ecg", "ieeg", "combined"):
            cm = confusion_from_decisions(decisions[m][keep], labels[keep])
            stream[m] = summarize(cm, scores[m][keep], labels[keep])
            rows.append(_row(patient, m, rule.value if m == "combined" else "stream", stream[m]))

        out = cfg.eval_dir(patient)
        write_atomic(out / "metrics.csv", metrics_csv(rows))
        write_atomic(out / "metrics.json", _json({"patient": patient, "fusion": rule.value,
                                                   "window": window_auc, "stream": stream}))
        for m in MODALITIES:
            write_atomic(out / f"{m}_probs.npy", _npy_bytes(probs[m]))
        written += [out / "metrics.csv", out / "metrics.json"]
    return written


def build_scenario(cfg: RunConfig):
    """Scenario from the ``simulation`` block; ``type: model`` classifiers replay evaluated streams."""
    sim = dict(cfg.simulation)
    patient = str(sim.pop("patient", cfg.patients[0]))
    sim.setdefault("seed", int(cfg.seed))
    sim.setdefault("fusion", cfg.fusion)
    if cfg.fusion.get("modality_rule") is not None:
        sim["fusion"] = {**sim["fusion"], "modality_rule": cfg.fusion["modality_rule"]}
    classifiers = dict(sim.get("classifiers") or {"ecg": {"type": "model"}, "ieeg": {"type": "model"}})
    streams = {}
    for m, c in list(classifiers.items()):
        if (c or {}).get("type") == "model":
            path = _require(cfg.eval_dir(patient) / f"{m}_probs.npy", "evaluate")
            streams[m] = StreamClassifier(np.load(path))
            del classifiers[m]
    sim["classifiers"] = classifiers
    if streams:
        gen = cfg.generator_config(patient, 1)
        rec = load_recording(_require(cfg.recording_path(patient, "ecg", "eval"), "generate"), patient)
        sim.setdefault("duration_s", rec.duration_s)
        sim.setdefault("labels", {"onsets": [float(o) for o in rec.seizure_onsets],
                                  "horizon_s": gen.horizon_s, "exclusion_s": gen.exclusion_s})
    scenario = scenario_from_dict(sim)
    if streams:
        scenario = replace(scenario, classifiers={**scenario.classifiers, **streams})
    return scenario


def decisions_csv(trace_lines) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "label", "ecg", "ieeg", "fused", "held"])
    for line in trace_lines:
        t, kind, _, _, d = parse_trace_line(line)
        if kind == "fuse":
            w.writerow([d["step"], d["label"], d["ecg"], d["ieeg"], d["fused"], d.get("held", "")])
    return buf.getvalue()


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    report = run_simulation(build_scenario(cfg))
    out = cfg.out / "sim"
    write_atomic(out / "trace.txt", report.trace_text())
    write_atomic(out / "report.json", report.to_json() + "\n")
    write_atomic(out / "decisions.csv", decisions_csv(report.trace))
    recount = confusion_from_trace(report.trace)
    if recount != report.fused_cm:
        raise RuntimeError(f"trace recount {recount} disagrees with report {report.fused_cm}")
    return [out / "trace.txt", out / "report.json", out / "decisions.csv"]


def cmd_report(cfg: RunConfig) -> list[Path]:
    """ECG vs iEEG vs combined, one row per patient plus macro and pooled rows."""
    rows, by_mod = [], {"ecg": [], "ieeg": [], "combined": []}
    for patient in cfg.patients:
        path = _require(cfg.eval_dir(patient) / "metrics.json", "evaluate")
        data = json.loads(Path(path).read_text())
        fusion = data["fusion"]
        for m in by_mod:
            s = data["stream"][m]
            by_mod[m].append(s)
            rows.append(_row(patient, m, fusion if m == "combined" else "stream", s))
    for m, summaries in by_mod.items():
        fusion = cfg.fusion_config().modality_rule.value if m == "combined" else "stream"
        rows.append(_row("macro", m, fusion, macro_average(summaries)))
        cms = [ConfusionMatrix(s["tp"], s["tn"], s["fp"], s["fn"]) for s in summaries]
        rows.append(_row("pooled", m, fusion, pooled_summary(cms)))
    out = cfg.out / "report" / "comparison.csv"
    write_atomic(out, metrics_csv(rows))
    return [out]


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "simulate": cmd_simulate, "report": cmd_report}


def run_all(cfg: RunConfig) -> None:
    for stage in STAGES:
        COMMANDS[stage](cfg)
