"""Temporal emotion classifier over fused frame features.

Two stacked LSTM layers (512 then 256 hidden units in the standard
configuration) followed by a linear head and softmax over the 7 classes.
The network, backprop-through-time, and the Adam optimizer are implemented
directly on numpy in float64: runs are bit-reproducible for a fixed seed,
which the pipeline-level determinism guarantees rely on.

Supports the fused 596-d input as well as a face-only 512-d mode; face-only
checkpoints accept fused features by slicing off the face block.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ClipRecord, LabelSource
from .features import FACE_DIM, FUSED_DIM, FrameFeatureSequence, feature_path, load_features
from .labels import LABEL_INDEX, LABEL_ORDER, N_CLASSES, EmotionLabel

log = logging.getLogger(__name__)

_DIST_TOL = 1e-6


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the epoch and step where it happened."""


@dataclass
class ModelConfig:
    input_dim: int = FUSED_DIM  # 596 fused, 512 face-only
    hidden1: int = 512
    hidden2: int = 256
    n_classes: int = N_CLASSES
    max_seq_len: int = 300
    class_weights: np.ndarray | None = None  # (7,), None = unweighted

    def __post_init__(self) -> None:
        if self.input_dim <= 0 or self.hidden1 <= 0 or self.hidden2 <= 0:
            raise ValueError("input_dim and hidden sizes must be positive")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes is fixed at {N_CLASSES}")
        if self.max_seq_len < 1:
            raise ValueError("max_seq_len must be >= 1")
        if self.class_weights is not None:
            self.class_weights = np.asarray(self.class_weights, dtype=np.float64)
            if self.class_weights.shape != (N_CLASSES,):
                raise ValueError(f"class_weights must have shape ({N_CLASSES},)")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden1": self.hidden1,
            "hidden2": self.hidden2,
            "n_classes": self.n_classes,
            "max_seq_len": self.max_seq_len,
            "class_weights": None if self.class_weights is None else self.class_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ModelConfig":
        return cls(
            input_dim=obj["input_dim"],
            hidden1=obj["hidden1"],
            hidden2=obj["hidden2"],
            n_classes=obj["n_classes"],
            max_seq_len=obj["max_seq_len"],
            class_weights=obj.get("class_weights"),
        )


@dataclass
class ModelCheckpoint:
    config: ModelConfig
    parameters: dict[str, np.ndarray]
    training_meta: dict


@dataclass
class Prediction:
    clip_id: str
    distribution: np.ndarray  # (7,)
    label: EmotionLabel

    def __post_init__(self) -> None:
        self.distribution = np.asarray(self.distribution, dtype=np.float64)
        if self.distribution.shape != (N_CLASSES,):
            raise ValueError(f"distribution must have shape ({N_CLASSES},)")
        if np.any(self.distribution < 0) or abs(float(self.distribution.sum()) - 1.0) > _DIST_TOL:
            raise ValueError("distribution must be non-negative and sum to 1")
        if self.label is not LABEL_ORDER[int(np.argmax(self.distribution))]:
            raise ValueError("label must be the distribution argmax")


@dataclass
class Hyper:
    lr: float = 1e-4
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0


# ---------------------------------------------------------------------------
# Parameters

_PARAM_LAYOUT = ("lstm1.w_x", "lstm1.w_h", "lstm1.b", "lstm2.w_x", "lstm2.w_h", "lstm2.b", "head.w", "head.b")


def _param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, h1, h2, k = config.input_dim, config.hidden1, config.hidden2, config.n_classes
    return {
        "lstm1.w_x": (d, 4 * h1),
        "lstm1.w_h": (h1, 4 * h1),
        "lstm1.b": (4 * h1,),
        "lstm2.w_x": (h1, 4 * h2),
        "lstm2.w_h": (h2, 4 * h2),
        "lstm2.b": (4 * h2,),
        "head.w": (h2, k),
        "head.b": (k,),
    }


def init_parameters(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Seeded uniform init (scale 1/sqrt(hidden)); forget-gate biases start at 1."""
    rng = np.random.default_rng(seed)
    shapes = _param_shapes(config)
    params: dict[str, np.ndarray] = {}
    scales = {
        "lstm1": 1.0 / np.sqrt(config.hidden1),
        "lstm2": 1.0 / np.sqrt(config.hidden2),
        "head": 1.0 / np.sqrt(config.hidden2),
    }
    for name in _PARAM_LAYOUT:
        scale = scales[name.split(".")[0]]
        params[name] = rng.uniform(-scale, scale, size=shapes[name])
    params["lstm1.b"][config.hidden1 : 2 * config.hidden1] += 1.0
    params["lstm2.b"][config.hidden2 : 2 * config.hidden2] += 1.0
    return params


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# LSTM forward/backward (batch-first, masked)

def _lstm_forward(
    w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray, x: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray, list]:
    """Run one LSTM layer over x (B, T, D) with mask (B, T).

    Masked steps leave hidden and cell state untouched, so trailing padding
    never alters the final state. Returns (final h, all h, cache for backprop).
    """
    bsz, t_len, _ = x.shape
    h_dim = w_h.shape[0]
    h = np.zeros((bsz, h_dim))
    c = np.zeros((bsz, h_dim))
    hs = np.zeros((bsz, t_len, h_dim))
    cache = []
    for t in range(t_len):
        m = mask[:, t : t + 1]
        a = x[:, t] @ w_x + h @ w_h + b
        ai, af, ag, ao = np.split(a, 4, axis=1)
        gi, gf, go = _sigmoid(ai), _sigmoid(af), _sigmoid(ao)
        gg = np.tanh(ag)
        c_new = gf * c + gi * gg
        tanh_c = np.tanh(c_new)
        h_new = go * tanh_c
        cache.append((x[:, t], h, c, gi, gf, gg, go, tanh_c, m))
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        hs[:, t] = h
    return h, hs, cache


def _lstm_backward(
    w_x: np.ndarray,
    w_h: np.ndarray,
    cache: list,
    d_hs: np.ndarray | None,
    d_h_final: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backprop through time for one layer.

    d_hs carries per-step gradients from the layer above (None for the top
    layer) and d_h_final the gradient into the final hidden state.
    """
    t_len = len(cache)
    bsz, in_dim = cache[0][0].shape
    dh = d_h_final.copy()
    dc = np.zeros_like(dh)
    d_wx = np.zeros_like(w_x)
    d_wh = np.zeros_like(w_h)
    d_b = np.zeros(w_x.shape[1])
    dx = np.zeros((bsz, t_len, in_dim))
    for t in reversed(range(t_len)):
        x_t, h_prev, c_prev, gi, gf, gg, go, tanh_c, m = cache[t]
        if d_hs is not None:
            dh = dh + d_hs[:, t]
        dh_new = m * dh
        dh_skip = (1.0 - m) * dh
        dc_new = m * dc
        dc_skip = (1.0 - m) * dc
        d_go = dh_new * tanh_c
        dc_new = dc_new + dh_new * go * (1.0 - tanh_c**2)
        d_gi = dc_new * gg
        d_gf = dc_new * c_prev
        d_gg = dc_new * gi
        dc = dc_new * gf + dc_skip
        da = np.concatenate(
            [
                d_gi * gi * (1.0 - gi),
                d_gf * gf * (1.0 - gf),
                d_gg * (1.0 - gg**2),
                d_go * go * (1.0 - go),
            ],
            axis=1,
        )
        d_wx += x_t.T @ da
        d_wh += h_prev.T @ da
        d_b += da.sum(axis=0)
        dx[:, t] = da @ w_x.T
        dh = da @ w_h.T + dh_skip
    return dx, d_wx, d_wh, d_b


def _forward_batch(
    params: dict[str, np.ndarray], x: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Probabilities (B, 7) for a padded batch, plus caches for backprop."""
    h1_final, h1_all, cache1 = _lstm_forward(params["lstm1.w_x"], params["lstm1.w_h"], params["lstm1.b"], x, mask)
    h2_final, _, cache2 = _lstm_forward(params["lstm2.w_x"], params["lstm2.w_h"], params["lstm2.b"], h1_all, mask)
    logits = h2_final @ params["head.w"] + params["head.b"]
    probs = _softmax(logits)
    return probs, {"cache1": cache1, "cache2": cache2, "h2_final": h2_final}


def loss_and_grads(
    params: dict[str, np.ndarray],
    x: np.ndarray,
    mask: np.ndarray,
    y: np.ndarray,
    class_weights: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted cross-entropy loss and analytic gradients for one batch.

    The loss is sum(w_i * nll_i) / sum(w_i) with w_i the weight of sample i's
    gold class (all ones when unweighted).
    """
    bsz = x.shape[0]
    probs, ctx = _forward_batch(params, x, mask)
    w = np.ones(bsz) if class_weights is None else class_weights[y]
    w_total = float(w.sum())
    if w_total <= 0:
        raise ValueError("all samples have zero class weight")
    nll = -np.log(np.maximum(probs[np.arange(bsz), y], 1e-300))
    loss = float((w * nll).sum() / w_total)

    d_logits = probs.copy()
    d_logits[np.arange(bsz), y] -= 1.0
    d_logits *= (w / w_total)[:, None]

    grads: dict[str, np.ndarray] = {}
    grads["head.w"] = ctx["h2_final"].T @ d_logits
    grads["head.b"] = d_logits.sum(axis=0)
    d_h2_final = d_logits @ params["head.w"].T
    d_h1_all, grads["lstm2.w_x"], grads["lstm2.w_h"], grads["lstm2.b"] = _lstm_backward(
        params["lstm2.w_x"], params["lstm2.w_h"], ctx["cache2"], None, d_h2_final
    )
    _, grads["lstm1.w_x"], grads["lstm1.w_h"], grads["lstm1.b"] = _lstm_backward(
        params["lstm1.w_x"], params["lstm1.w_h"], ctx["cache1"], d_h1_all, np.zeros_like(d_h1_all[:, 0])
    )
    return loss, grads


# ---------------------------------------------------------------------------
# Sequence plumbing

def center_truncate(frames: np.ndarray, max_len: int) -> np.ndarray:
    """Keep the centered max_len window of an over-long sequence."""
    t = frames.shape[0]
    if t <= max_len:
        return frames
    start = (t - max_len) // 2
    return frames[start : start + max_len]


def _adapt_input(frames: np.ndarray, config: ModelConfig) -> np.ndarray:
    dim = frames.shape[1]
    if dim == config.input_dim:
        return frames
    if config.input_dim == FACE_DIM and dim == FUSED_DIM:
        return frames[:, :FACE_DIM]  # face-only checkpoints read the face block
    raise ValueError(f"feature dimension mismatch: expected {config.input_dim}, got {dim}")


def _collate(
    sequences: Sequence[np.ndarray], config: ModelConfig
) -> tuple[np.ndarray, np.ndarray]:
    seqs = [center_truncate(np.asarray(s, dtype=np.float64), config.max_seq_len) for s in sequences]
    seqs = [_adapt_input(s, config) for s in seqs]
    t_max = max(s.shape[0] for s in seqs)
    x = np.zeros((len(seqs), t_max, config.input_dim))
    mask = np.zeros((len(seqs), t_max))
    for i, s in enumerate(seqs):
        x[i, : s.shape[0]] = s
        mask[i, : s.shape[0]] = 1.0
    return x, mask


def forward(
    features: FrameFeatureSequence | np.ndarray,
    checkpoint: ModelCheckpoint,
    clip_id: str = "",
) -> Prediction:
    """Classify one clip. Long sequences are center-truncated; deterministic."""
    frames = features.frames if isinstance(features, FrameFeatureSequence) else np.asarray(features)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("features must be a non-empty (T, dim) array")
    x, mask = _collate([frames], checkpoint.config)
    probs, _ = _forward_batch(checkpoint.parameters, x, mask)
    dist = probs[0]
    return Prediction(clip_id=clip_id, distribution=dist, label=LABEL_ORDER[int(np.argmax(dist))])


# ---------------------------------------------------------------------------
# Label resolution and class weights

# Trust order when one clip carries several label layers.
_RESOLUTION_PRIORITY = (
    LabelSource.CONSENSUS,
    LabelSource.ANNOTATOR,
    LabelSource.GOLD_ACTED,
    LabelSource.TER_WEAK,
)


def resolve_training_label(rec: ClipRecord) -> EmotionLabel:
    """Pick one training label by provenance priority; predictions never count."""
    for source in _RESOLUTION_PRIORITY:
        values = {label for label, prov in rec.labels if prov.source is source}
        if len(values) == 1:
            return values.pop()
        if len(values) > 1:
            raise ValueError(
                f"clip {rec.clip_id!r} has conflicting {source} labels: "
                + ", ".join(sorted(v.value for v in values))
            )
    raise ValueError(f"clip {rec.clip_id!r} has no resolvable training label")


def inverse_frequency_weights(labels: Iterable[EmotionLabel]) -> np.ndarray:
    """1/frequency per class, normalized to mean 1 over the classes present."""
    counts = np.zeros(N_CLASSES)
    for label in labels:
        counts[LABEL_INDEX[label]] += 1
    present = counts > 0
    if not present.any():
        raise ValueError("no labels given")
    weights = np.zeros(N_CLASSES)
    weights[present] = 1.0 / counts[present]
    weights[present] /= weights[present].mean()
    return weights


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainingHistory:
    epoch_losses: list[float] = field(default_factory=list)


def _adam_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict,
    trainable: set[str],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state["t"] += 1
    t = state["t"]
    for name in trainable:
        g = grads[name]
        state["m"][name] = beta1 * state["m"][name] + (1 - beta1) * g
        state["v"][name] = beta2 * state["v"][name] + (1 - beta2) * g * g
        m_hat = state["m"][name] / (1 - beta1**t)
        v_hat = state["v"][name] / (1 - beta2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def train_on_arrays(
    sequences: Sequence[np.ndarray],
    labels: Sequence[EmotionLabel],
    config: ModelConfig,
    hyper: Hyper,
    init: dict[str, np.ndarray] | None = None,
    trainable: set[str] | None = None,
) -> tuple[dict[str, np.ndarray], TrainingHistory]:
    """Seed-deterministic minibatch training loop over in-memory sequences."""
    if len(sequences) == 0:
        raise ValueError("no training sequences")
    if len(sequences) != len(labels):
        raise ValueError("sequences and labels must align")
    params = (
        {k: v.astype(np.float64).copy() for k, v in init.items()}
        if init is not None
        else init_parameters(config, hyper.seed)
    )
    if trainable is None:
        trainable = set(params)
    history = TrainingHistory()
    if hyper.epochs == 0 or not trainable:
        return params, history

    y = np.array([LABEL_INDEX[lab] for lab in labels])
    state = {"t": 0, "m": {k: np.zeros_like(v) for k, v in params.items()},
             "v": {k: np.zeros_like(v) for k, v in params.items()}}
    rng = np.random.default_rng(hyper.seed)
    order = np.arange(len(sequences))
    for epoch in range(hyper.epochs):
        rng.shuffle(order)
        loss_sum = 0.0
        weight_sum = 0
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            x, mask = _collate([sequences[i] for i in batch], config)
            loss, grads = loss_and_grads(params, x, mask, y[batch], config.class_weights)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, step {start // hyper.batch_size}")
            _adam_update(params, grads, state, trainable, hyper.lr)
            loss_sum += loss * len(batch)
            weight_sum += len(batch)
        history.epoch_losses.append(loss_sum / weight_sum)
    return params, history


def _load_training_set(
    records: Sequence[ClipRecord], features_dir: str | Path
) -> tuple[list[np.ndarray], list[EmotionLabel]]:
    sequences: list[np.ndarray] = []
    labels: list[EmotionLabel] = []
    for rec in records:
        label = resolve_training_label(rec)
        path = feature_path(features_dir, rec.clip_id)
        if not path.exists():
            raise FileNotFoundError(f"clip {rec.clip_id!r}: missing feature file {path}")
        _, seq = load_features(path)
        sequences.append(seq.frames)
        labels.append(label)
    return sequences, labels


def train(
    records: Sequence[ClipRecord],
    features_dir: str | Path,
    config: ModelConfig,
    hyper: Hyper,
    source_manifests: Sequence[str] = (),
) -> tuple[ModelCheckpoint, TrainingHistory]:
    """Train from a fresh seeded init on a manifest's resolvable labels."""
    if len(records) == 0:
        raise ValueError("no training clips")
    sequences, labels = _load_training_set(records, features_dir)
    params, history = train_on_arrays(sequences, labels, config, hyper)
    meta = {"epochs": hyper.epochs, "seed": hyper.seed, "source_manifests": list(source_manifests)}
    return ModelCheckpoint(config=config, parameters=params, training_meta=meta), history


def finetune(
    base: ModelCheckpoint,
    records: Sequence[ClipRecord],
    features_dir: str | Path,
    hyper: Hyper,
    freeze_all: bool = False,
    class_weighting: str = "inverse_frequency",
    source_manifests: Sequence[str] = (),
) -> tuple[ModelCheckpoint, TrainingHistory]:
    """Continue training from a base checkpoint.

    All temporal and head parameters are trainable by default (the feature
    backbone lives outside this module); freeze_all returns the base
    parameters untouched. Weak-label fine-tuning defaults to inverse-frequency
    class weights because weak label distributions are heavily neutral.
    """
    if len(records) == 0:
        raise ValueError("no fine-tuning clips")
    sequences, labels = _load_training_set(records, features_dir)
    config = base.config
    if config.class_weights is None and class_weighting == "inverse_frequency":
        config = ModelConfig(
            input_dim=config.input_dim,
            hidden1=config.hidden1,
            hidden2=config.hidden2,
            n_classes=config.n_classes,
            max_seq_len=config.max_seq_len,
            class_weights=inverse_frequency_weights(labels),
        )
    trainable: set[str] | None = set() if freeze_all else None
    params, history = train_on_arrays(
        sequences, labels, config, hyper, init=base.parameters, trainable=trainable
    )
    meta = {"epochs": hyper.epochs, "seed": hyper.seed, "source_manifests": list(source_manifests)}
    return ModelCheckpoint(config=config, parameters=params, training_meta=meta), history


def predict_manifest(
    records: Sequence[ClipRecord],
    features_dir: str | Path,
    checkpoint: ModelCheckpoint,
    fail_fast: bool = False,
) -> tuple[list[Prediction], list[str]]:
    """One prediction per clip with features, in manifest order.

    Clips whose feature file is missing are reported and skipped unless
    fail_fast is set.
    """
    predictions: list[Prediction] = []
    skipped: list[str] = []
    for rec in records:
        path = feature_path(features_dir, rec.clip_id)
        if not path.exists():
            if fail_fast:
                raise FileNotFoundError(f"clip {rec.clip_id!r}: missing feature file {path}")
            skipped.append(rec.clip_id)
            log.warning("skipping %s: no feature file at %s", rec.clip_id, path)
            continue
        _, seq = load_features(path)
        predictions.append(forward(seq, checkpoint, clip_id=rec.clip_id))
    return predictions, skipped


# ---------------------------------------------------------------------------
# Checkpoint and prediction files

_CKPT_FORMAT = "signemo-checkpoint"


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [n for n in _PARAM_LAYOUT if n in ckpt.parameters]
    header = {
        "format": _CKPT_FORMAT,
        "version": 1,
        "config": ckpt.config.to_dict(),
        "training_meta": ckpt.training_meta,
        "params": [{"name": n, "shape": list(ckpt.parameters[n].shape)} for n in names],
    }
    with path.open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for name in names:
            fh.write(ckpt.parameters[name].astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a checkpoint file ({exc})") from None
        if header.get("format") != _CKPT_FORMAT:
            raise ValueError(f"{path}: not a checkpoint file (format={header.get('format')!r})")
        blob = fh.read()
    config = ModelConfig.from_dict(header["config"])
    expected = _param_shapes(config)
    params: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["params"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in expected or expected[name] != shape:
            raise ValueError(f"{path}: parameter {name!r} has shape {shape}, config implies {expected.get(name)}")
        size = int(np.prod(shape)) * 8
        params[name] = np.frombuffer(blob, dtype="<f8", count=int(np.prod(shape)), offset=offset).reshape(shape).copy()
        offset += size
    missing = set(expected) - set(params)
    if missing:
        raise ValueError(f"{path}: checkpoint missing parameters: {sorted(missing)}")
    return ModelCheckpoint(config=config, parameters=params, training_meta=header["training_meta"])


def save_predictions(predictions: Sequence[Prediction], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pred in predictions:
            obj = {
                "clip_id": pred.clip_id,
                "label": pred.label.value,
                "distribution": [float(p) for p in pred.distribution],
            }
            fh.write(json.dumps(obj))
            fh.write("\n")


def load_predictions(path: str | Path) -> list[Prediction]:
    out: list[Prediction] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                Prediction(
                    clip_id=obj["clip_id"],
                    distribution=np.array(obj["distribution"]),
                    label=EmotionLabel(obj["label"]),
                )
            )
    return out
