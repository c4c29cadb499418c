"""Numerical reference for the relation-augmented feature projector.

Per object, two feature views are L2-normalized, concatenated, and pushed
through an MLP; a separate MLP lifts the position embedding and the two
branch outputs are summed. Everything here is plain numpy in double
precision so tests can pin exact tolerances. No training, no real encoder
checkpoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

from .errors import ProjectorError
from .rngs import derive_rng

# desk-scale stand-in dims; real encoder widths are not part of the contract
D_UNI = 32
D_MASK = 32
D_POS = 16
D_HIDDEN = 64

MAX_OBJECTS = 150

_SQRT_2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu(x: np.ndarray, approximate: bool = False) -> np.ndarray:
    """Gaussian-error linear unit.

    Exact form by default: 0.5 * x * (1 + erf(x / sqrt(2))). The tanh
    variant is kept for parity experiments only.
    """
    x = np.asarray(x, dtype=np.float64)
    if approximate:
        inner = _SQRT_2_OVER_PI * (x + 0.044715 * x**3)
        return 0.5 * x * (1.0 + np.tanh(inner))
    return 0.5 * x * (1.0 + erf(x / _SQRT_2))


def l2_normalize_rows(m: np.ndarray, epsilon: float | None = None) -> np.ndarray:
    """Scale each row to unit Euclidean norm.

    A zero row is an error unless an epsilon guard is supplied, in which
    case epsilon is added to every norm.
    """
    m = _finite_matrix(m, "matrix")
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if epsilon is None:
        zero_rows = np.flatnonzero(norms[:, 0] == 0.0)
        if zero_rows.size:
            raise ProjectorError(
                f"zero row at index {int(zero_rows[0])} cannot be normalized"
            )
        return m / norms
    if epsilon <= 0:
        raise ProjectorError("epsilon guard must be positive")
    return m / (norms + epsilon)


def _finite_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ProjectorError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ProjectorError(f"{name} contains non-finite entries")
    return arr


def _finite_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise ProjectorError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ProjectorError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MlpParams:
    """Dense layers with GELU between them (none after the last)."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.weights or len(self.weights) != len(self.biases):
            raise ProjectorError("weights and biases must pair up, one per layer")
        weights = tuple(
            _finite_matrix(w, f"weights[{i}]") for i, w in enumerate(self.weights)
        )
        biases = tuple(
            _finite_vector(b, f"biases[{i}]") for i, b in enumerate(self.biases)
        )
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape[1] != b.shape[0]:
                raise ProjectorError(
                    f"layer {i}: bias width {b.shape[0]} != weight cols {w.shape[1]}"
                )
            if i and weights[i - 1].shape[1] != w.shape[0]:
                raise ProjectorError(
                    f"layer {i}: input dim {w.shape[0]} does not chain from "
                    f"previous output {weights[i - 1].shape[1]}"
                )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = _finite_matrix(x, "input")
        if x.shape[1] != self.in_dim:
            raise ProjectorError(
                f"input width {x.shape[1]} != first-layer dim {self.in_dim}"
            )
        out = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = out @ w + b
            if i != last:
                out = gelu(out)
        return out

    @classmethod
    def seeded(cls, dims: tuple[int, ...], seed: int, scale: float = 0.1,
               tag: str = "mlp") -> "MlpParams":
        """Uniform(-scale, scale) parameters from a named derived stream."""
        if len(dims) < 2:
            raise ProjectorError("dims must name at least input and output")
        rng = derive_rng(seed, "projector", tag, *[int(d) for d in dims])
        weights, biases = [], []
        for d_in, d_out in zip(dims, dims[1:]):
            weights.append(rng.uniform(-scale, scale, size=(d_in, d_out)))
            biases.append(rng.uniform(-scale, scale, size=d_out))
        return cls(tuple(weights), tuple(biases))

    def to_json(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MlpParams":
        try:
            weights = tuple(np.asarray(w, dtype=np.float64) for w in obj["weights"])
            biases = tuple(np.asarray(b, dtype=np.float64) for b in obj["biases"])
        except (KeyError, TypeError, ValueError) as err:
            raise ProjectorError(f"malformed MLP fixture: {err}") from err
        return cls(weights, biases)


@dataclass(frozen=True)
class FeatureBatch:
    """Per-object feature rows: unified 3D, scene-level 3D, and position."""

    x_uni3d: np.ndarray
    x_mask3d: np.ndarray
    x_pos: np.ndarray

    def __post_init__(self):
        uni = _finite_matrix(self.x_uni3d, "x_uni3d")
        mask = _finite_matrix(self.x_mask3d, "x_mask3d")
        pos = _finite_matrix(self.x_pos, "x_pos")
        if not uni.shape[0] == mask.shape[0] == pos.shape[0]:
            raise ProjectorError(
                "row counts disagree: "
                f"{uni.shape[0]}, {mask.shape[0]}, {pos.shape[0]}"
            )
        if uni.shape[0] > MAX_OBJECTS:
            raise ProjectorError(f"batch exceeds {MAX_OBJECTS} objects")
        object.__setattr__(self, "x_uni3d", uni)
        object.__setattr__(self, "x_mask3d", mask)
        object.__setattr__(self, "x_pos", pos)

    @property
    def n(self) -> int:
        return self.x_uni3d.shape[0]

    def to_json(self) -> dict:
        return {
            "x_uni3d": self.x_uni3d.tolist(),
            "x_mask3d": self.x_mask3d.tolist(),
            "x_pos": self.x_pos.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureBatch":
        try:
            return cls(
                np.asarray(obj["x_uni3d"], dtype=np.float64),
                np.asarray(obj["x_mask3d"], dtype=np.float64),
                np.asarray(obj["x_pos"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ProjectorError(f"malformed feature fixture: {err}") from err


def rap_forward(
    batch: FeatureBatch,
    mlp_main: MlpParams,
    mlp_pos: MlpParams,
    epsilon: float | None = None,
) -> np.ndarray:
    """Projected rows: MLP(concat of normalized views) + MLP(position)."""
    d_u = batch.x_uni3d.shape[1]
    d_m = batch.x_mask3d.shape[1]
    if mlp_main.in_dim != d_u + d_m:
        raise ProjectorError(
            f"main MLP expects {mlp_main.in_dim} inputs, batch provides {d_u + d_m}"
        )
    if mlp_pos.in_dim != batch.x_pos.shape[1]:
        raise ProjectorError(
            f"position MLP expects {mlp_pos.in_dim} inputs, "
            f"batch provides {batch.x_pos.shape[1]}"
        )
    if mlp_main.out_dim != mlp_pos.out_dim:
        raise ProjectorError(
            f"branch output dims disagree: {mlp_main.out_dim} vs {mlp_pos.out_dim}"
        )
    combined = np.concatenate(
        (
            l2_normalize_rows(batch.x_uni3d, epsilon),
            l2_normalize_rows(batch.x_mask3d, epsilon),
        ),
        axis=1,
    )
    return mlp_main.apply(combined) + mlp_pos.apply(batch.x_pos)


def default_mlps(seed: int = 0) -> tuple[MlpParams, MlpParams]:
    """Two-layer branches at the documented fixture dims."""
    main = MlpParams.seeded((D_UNI + D_MASK, D_HIDDEN, D_HIDDEN), seed, tag="main")
    pos = MlpParams.seeded((D_POS, D_HIDDEN, D_HIDDEN), seed, tag="pos")
    return main, pos


def random_batch(n: int, seed: int = 0) -> FeatureBatch:
    """Gaussian feature rows for fixtures and property checks."""
    if not 1 <= n <= MAX_OBJECTS:
        raise ProjectorError(f"n must be in [1, {MAX_OBJECTS}]")
    rng = derive_rng(seed, "projector", "batch", n)
    return FeatureBatch(
        rng.normal(size=(n, D_UNI)),
        rng.normal(size=(n, D_MASK)),
        rng.normal(size=(n, D_POS)),
    )


def write_fixture(path: str | Path, batch: FeatureBatch,
                  mlp_main: MlpParams, mlp_pos: MlpParams):
    payload = {
        "batch": batch.to_json(),
        "mlp_main": mlp_main.to_json(),
        "mlp_pos": mlp_pos.to_json(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_fixture(path: str | Path) -> tuple[FeatureBatch, MlpParams, MlpParams]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ProjectorError(f"cannot read fixture {path}: {err}") from err
    if not isinstance(payload, dict):
        raise ProjectorError("fixture must be a JSON object")
    try:
        batch = FeatureBatch.from_json(payload["batch"])
        mlp_main = MlpParams.from_json(payload["mlp_main"])
        mlp_pos = MlpParams.from_json(payload["mlp_pos"])
    except KeyError as err:
        raise ProjectorError(f"fixture missing section {err}") from err
    return batch, mlp_main, mlp_pos


def property_report(
    batch: FeatureBatch,
    mlp_main: MlpParams,
    mlp_pos: MlpParams,
    seed: int = 0,
) -> dict:
    """Measured deviations for the documented projector invariants.

    Keys map to floats (max abs deviation) so callers can compare against
    their own tolerances; `rows` and `cols` describe the output.
    """
    rng = derive_rng(seed, "projector", "report")
    out = rap_forward(batch, mlp_main, mlp_pos)

    norm_u = l2_normalize_rows(batch.x_uni3d)
    norm_m = l2_normalize_rows(batch.x_mask3d)
    norm_dev = max(
        np.abs(np.linalg.norm(norm_u, axis=1) - 1.0).max(),
        np.abs(np.linalg.norm(norm_m, axis=1) - 1.0).max(),
    )

    perm = rng.permutation(batch.n)
    permuted = FeatureBatch(
        batch.x_uni3d[perm], batch.x_mask3d[perm], batch.x_pos[perm]
    )
    perm_dev = np.abs(rap_forward(permuted, mlp_main, mlp_pos) - out[perm]).max()

    scales = rng.uniform(0.5, 2.0, size=batch.n)
    scaled = FeatureBatch(
        batch.x_uni3d * scales[:, None], batch.x_mask3d, batch.x_pos
    )
    scale_dev = np.abs(rap_forward(scaled, mlp_main, mlp_pos) - out).max()

    rows = [
        rap_forward(
            FeatureBatch(
                batch.x_uni3d[i:i + 1], batch.x_mask3d[i:i + 1], batch.x_pos[i:i + 1]
            ),
            mlp_main, mlp_pos,
        )[0]
        for i in range(batch.n)
    ]
    rowwise_dev = np.abs(np.stack(rows) - out).max()

    points = rng.normal(size=1000) * 3.0
    step = 1e-5
    analytic = gelu_grad(points)
    numeric = (gelu(points + step) - gelu(points - step)) / (2 * step)
    fd_dev = np.abs(analytic - numeric).max()

    return {
        "rows": int(out.shape[0]),
        "cols": int(out.shape[1]),
        "row_norm_dev": float(norm_dev),
        "permutation_dev": float(perm_dev),
        "scale_invariance_dev": float(scale_dev),
        "rowwise_dev": float(rowwise_dev),
        "gelu_fd_dev": float(fd_dev),
    }


def gelu_grad(x: np.ndarray) -> np.ndarray:
    """Closed-form derivative of the exact GELU."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf
