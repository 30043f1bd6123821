"""SIRIUS: per-slot self-supervised channel estimation.

For each received slot a fresh coordinate network is fitted online to
reconstruct the received samples through the tri-diagonal interference
model. Training data are the true pilots plus pseudo-pilots harvested
from confident hard decisions; a sparsity penalty on the adjacent taps
keeps the interference branch from absorbing noise. No state survives
from one slot to the next.
"""

from dataclasses import dataclass, field

import numpy as np

from . import net as nt
from .baseline import ls_estimate, stabilized_divide
from .channel import ChannelTapGrid
from .grid import ResourceGrid, SlotConfig, normalize_coordinates, qpsk_hard_decision

QPSK_ADMISSION_BOUND = np.sqrt(2.0) / 2.0  # half the minimum QPSK distance


@dataclass(frozen=True)
class SiriusConfig:
    """Estimator hyperparameters (network, loss, and outer loop).

    warm_start_harvest merges confident hard decisions from the
    LS-equalized warm start into the active set before the first
    training round (the closed-loop framework reading); with it off,
    the first round trains on true pilots only (the literal pseudocode
    reading, which measurably underperforms at every SNR).
    prediction_tail averages the network outputs of the last few
    training steps for the final tap prediction to damp optimizer
    jitter.
    """

    i_max: int = 2
    steps_per_iter: tuple = (150, 50)
    tau_th: float = 0.5
    sparsity_weight: float = 1.0
    w_p: float = 2.0
    w_d: float = 0.5
    epsilon: float = 1e-8
    learning_rate: float = 5e-4
    mapping_size: int = nt.DEFAULT_MAPPING_SIZE
    rff_scale: float = nt.DEFAULT_RFF_SCALE
    hidden_dim: int = nt.DEFAULT_HIDDEN_DIM
    hidden_layers: int = nt.DEFAULT_HIDDEN_LAYERS
    omega_first: float = nt.DEFAULT_OMEGA
    omega_hidden: float = nt.DEFAULT_OMEGA
    warm_start_harvest: bool = True
    prediction_tail: int = 10
    seed: int = 0

    def __post_init__(self):
        if len(self.steps_per_iter) != self.i_max:
            raise ValueError("steps_per_iter length must equal i_max")
        if not 0.0 < self.tau_th <= QPSK_ADMISSION_BOUND + 1e-12:
            raise ValueError(
                f"tau_th must lie in (0, {QPSK_ADMISSION_BOUND:.4f}] for QPSK"
            )
        if self.prediction_tail < 1:
            raise ValueError("prediction_tail must be >= 1")

    @classmethod
    def with_outer_iterations(cls, i_max: int, seed: int = 0, **kwargs) -> "SiriusConfig":
        """Default step schedule extended to i_max iterations (150, 50, 50, ...)."""
        steps = tuple([150] + [50] * (i_max - 1))
        return cls(i_max=i_max, steps_per_iter=steps, seed=seed, **kwargs)


@dataclass
class ActiveSet:
    """Supervision positions with weights and reconstruction symbols.

    x_at / x_left / x_right hold the symbols at (k, n), (k-1, n) and
    (k+1, n); band-edge neighbors are zero, matching the zeroed edge
    entries of the interference taps.
    """

    k: np.ndarray
    n: np.ndarray
    flat: np.ndarray  # k * N + n, row-major coordinate index
    weight: np.ndarray
    x_at: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray

    def __len__(self) -> int:
        return len(self.flat)


def _known_symbol_grid(
    tx_pilots: np.ndarray, pilot_mask: np.ndarray, decisions: np.ndarray
) -> np.ndarray:
    """True pilot symbols where known, current hard decisions elsewhere."""
    return np.where(pilot_mask, tx_pilots, decisions)


def _build_active_set(
    kk: np.ndarray,
    nn: np.ndarray,
    weight: np.ndarray,
    known: np.ndarray,
) -> ActiveSet:
    K, N = known.shape
    x_at = known[kk, nn]
    x_left = np.where(kk > 0, known[np.maximum(kk - 1, 0), nn], 0.0 + 0.0j)
    x_right = np.where(kk < K - 1, known[np.minimum(kk + 1, K - 1), nn], 0.0 + 0.0j)
    return ActiveSet(
        k=kk, n=nn, flat=kk * N + nn, weight=weight,
        x_at=x_at, x_left=x_left, x_right=x_right,
    )


def warm_start(rx: ResourceGrid, tx_pilots: np.ndarray, cfg: SiriusConfig):
    """LS + interpolation, grid-wide hard decisions, pilot-only active set.

    Returns (initial tap grid, decision grid, active set).
    """
    init = ls_estimate(rx, tx_pilots)
    equalized = stabilized_divide(rx.symbols, init.h0)
    decisions, _ = qpsk_hard_decision(equalized)
    known = _known_symbol_grid(tx_pilots, rx.pilot_mask, decisions)
    kk, nn = np.nonzero(rx.pilot_mask)
    weight = np.full(len(kk), cfg.w_p)
    return init, decisions, _build_active_set(kk, nn, weight, known)


def harvest_pseudo_pilots(
    equalized: np.ndarray,
    rx: ResourceGrid,
    tx_pilots: np.ndarray,
    tau_th: float,
    w_p: float = 2.0,
    w_d: float = 0.5,
):
    """Rebuild the active set from the latest equalization pass.

    Pilots are always kept at weight w_p with their true symbols; every
    non-pilot position whose hard decision lies within tau_th of the
    equalized sample joins at weight w_d. Previous pseudo-pilots are
    discarded first, so the set never contains duplicates or stale
    decisions.
    """
    decisions, distance = qpsk_hard_decision(equalized)
    known = _known_symbol_grid(tx_pilots, rx.pilot_mask, decisions)
    admitted = (~rx.pilot_mask) & (distance < tau_th)
    kk_p, nn_p = np.nonzero(rx.pilot_mask)
    kk_d, nn_d = np.nonzero(admitted)
    kk = np.concatenate([kk_p, kk_d])
    nn = np.concatenate([nn_p, nn_d])
    weight = np.concatenate([
        np.full(len(kk_p), w_p), np.full(len(kk_d), w_d)
    ])
    return _build_active_set(kk, nn, weight, known), decisions


def output_to_taps(out: np.ndarray, K: int, N: int) -> ChannelTapGrid:
    """Assemble the six real network outputs into complex tap grids."""
    h0 = (out[:, 0] + 1j * out[:, 1]).reshape(K, N)
    hm1 = (out[:, 2] + 1j * out[:, 3]).reshape(K, N)
    hp1 = (out[:, 4] + 1j * out[:, 5]).reshape(K, N)
    return ChannelTapGrid(h0=h0, hm1=hm1, hp1=hp1)


def reconstruction_loss(
    pred: np.ndarray,
    active: ActiveSet,
    rx_symbols: np.ndarray,
    sparsity_weight: float,
    grad_out: np.ndarray = None,
):
    """Weighted reception-reconstruction loss plus adjacent-tap penalty.

    pred is the (K*N, 6) network output over the full coordinate grid in
    row-major (k, n) order. Returns (loss, dloss/dpred); pass a
    preallocated grad_out of pred's shape to avoid reallocation.
    """
    B = pred.shape[0]
    if grad_out is None:
        grad_out = np.empty_like(pred)
    n_active = len(active)
    rows = active.flat
    h0 = pred[rows, 0] + 1j * pred[rows, 1]
    hm1 = pred[rows, 2] + 1j * pred[rows, 3]
    hp1 = pred[rows, 4] + 1j * pred[rows, 5]
    resid = rx_symbols[active.k, active.n] - (
        h0 * active.x_at + hm1 * active.x_left + hp1 * active.x_right
    )
    data_loss = float(np.sum(active.weight * np.abs(resid) ** 2)) / n_active
    reg_scale = sparsity_weight / B
    ici = pred[:, 2:6]
    reg_loss = reg_scale * float(np.sum(ici * ici))

    # regularizer gradient over the whole grid, data term on active rows
    grad_out[:, 0:2] = 0.0
    np.multiply(ici, 2.0 * reg_scale, out=grad_out[:, 2:6])
    wr = (2.0 / n_active) * active.weight * np.conj(resid)
    for j, x in enumerate((active.x_at, active.x_left, active.x_right)):
        t = x * wr
        grad_out[rows, 2 * j] += -t.real
        grad_out[rows, 2 * j + 1] += t.imag
    return data_loss + reg_loss, grad_out


def estimate_slot(
    rx: ResourceGrid,
    tx_pilots: np.ndarray,
    slot_cfg: SlotConfig,
    cfg: SiriusConfig = None,
    return_history: bool = False,
) -> ChannelTapGrid:
    """Run the full warm-start / train / harvest / retrain loop on one slot.

    Deterministic for a given cfg.seed. With return_history, also returns
    the per-step training losses (one list per outer iteration).
    """
    if cfg is None:
        cfg = SiriusConfig()
    K, N = rx.shape
    rng = np.random.default_rng(cfg.seed)
    fm = nt.FourierMapping.sample(cfg.mapping_size, cfg.rff_scale, rng)
    dims = [2 * cfg.mapping_size] + [cfg.hidden_dim] * cfg.hidden_layers + [nt.OUTPUT_DIM]
    network = nt.SirenNetwork(dims, cfg.omega_first, cfg.omega_hidden)
    nt.siren_init(network, rng)
    params = network.parameters()
    adam = nt.AdamState.for_params(params, learning_rate=cfg.learning_rate)

    coords = normalize_coordinates(slot_cfg).reshape(-1, 2)
    features = nt.rff_map(coords, fm)
    ws = nt.Workspace(network, features.shape[0])
    grad_out = np.empty((features.shape[0], nt.OUTPUT_DIM))

    init, decisions, active = warm_start(rx, tx_pilots, cfg)
    if cfg.warm_start_harvest:
        equalized = stabilized_divide(rx.symbols, init.h0)
        active, decisions = harvest_pseudo_pilots(
            equalized, rx, tx_pilots, cfg.tau_th, cfg.w_p, cfg.w_d
        )

    total_steps = sum(cfg.steps_per_iter)
    tail_from = total_steps - min(cfg.prediction_tail - 1, total_steps - 1)
    tail_acc = np.zeros((features.shape[0], nt.OUTPUT_DIM))
    tail_count = 0
    history = []
    step_no = 0
    for i in range(cfg.i_max):
        losses = []
        for _ in range(cfg.steps_per_iter[i]):
            step_no += 1
            out, cache = nt.forward(network, features, want_cache=True, workspace=ws)
            if step_no >= tail_from:
                # pre-update output enters the tail average
                tail_acc += out
                tail_count += 1
            loss, grad_out = reconstruction_loss(
                out, active, rx.symbols, cfg.sparsity_weight, grad_out
            )
            grads = nt.backward(network, cache, grad_out, workspace=ws)
            nt.adam_step(adam, params, grads)
            losses.append(loss)
        history.append(losses)
        if i < cfg.i_max - 1:
            out = nt.forward(network, features, workspace=ws)
            h0 = (out[:, 0] + 1j * out[:, 1]).reshape(K, N)
            equalized = stabilized_divide(rx.symbols, h0)
            active, decisions = harvest_pseudo_pilots(
                equalized, rx, tx_pilots, cfg.tau_th, cfg.w_p, cfg.w_d
            )

    tail_acc += nt.forward(network, features, workspace=ws)
    tail_count += 1
    taps = output_to_taps(tail_acc / tail_count, K, N)
    if return_history:
        return taps, history
    return taps
