"""
Rotation-invariant k-NN classification of planar ring mixtures.

Points are canonicalized by rotating them about the origin to a minimizer of a Gaussian KDE negative
log-likelihood fitted on the training data.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ._constants import get_default
from .energy import kde_nll
from .groups import Se2Element
from .jets import so2_act_point
from .optim import CanonResult, GroupAction, OptimConfig, alg1_global_retraction, multi_init_canonicalize

__all__ = [
    'LabeledPoints2D',
    'sample_ring_mixture',
    'knn_classify',
    'default_bandwidth',
    'so2_canonicalize',
    'canonicalize_points',
    'canonicalize_training',
    'grid_starts',
    'decision_boundary_grid',
    'rotation_accuracy',
]

logger = logging.getLogger(__name__)

ANGLE_GRID = 256
GRID_STARTS = 2


@dataclass(frozen=True, eq=False)
class LabeledPoints2D:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels, dtype=int)
        if points.shape[1] != 2 or points.shape[0] != labels.size:
            raise ValueError('points must be (n, 2) with one label per point')
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return self.labels.size


def sample_ring_mixture(n_per_ring: int, radii: Sequence[float] = (1.0, 2.0), noise_std: float = 0.05,
                        seed: int = 0, n_modes: int = 3, angular_std: float = 0.25) -> LabeledPoints2D:
    """
    Samples each ring as a mixture of n_modes Gaussian lobes at equispaced angles

    Args:
        n_per_ring: points per ring
        radii: distinct positive ring radii; the label of a point is the index of its ring
        noise_std: radial noise
        seed: seed for numpy's default_rng
        n_modes: lobes per ring
        angular_std: angular spread of each lobe (radians)

    Returns:
        LabeledPoints2D
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or len(set(radii)) != len(radii):
        raise ValueError('Ring radii must be distinct and positive')
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for label, r in enumerate(radii):
        lobes = rng.integers(0, n_modes, n_per_ring)
        angle = 2 * math.pi * lobes / n_modes + rng.normal(0.0, angular_std, n_per_ring)
        radius = r + rng.normal(0.0, noise_std, n_per_ring) if noise_std > 0 else np.full(n_per_ring, r)
        points.append(np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]))
        labels.append(np.full(n_per_ring, label))
    return LabeledPoints2D(np.concatenate(points), np.concatenate(labels))


def knn_classify(train: LabeledPoints2D, k: int, query: np.ndarray):
    """
    Majority label among the k Euclidean-nearest training points; ties go to the smaller label

    Args:
        train: labeled training points
        k: neighbours, 1 <= k <= len(train)
        query: a (2,) point or an (m, 2) batch

    Returns:
        int for a single point, np.ndarray of labels for a batch
    """
    if not 1 <= k <= len(train):
        raise ValueError(f'k must lie in 1..{len(train)}')
    query = np.asarray(query, dtype=float)
    batch = np.atleast_2d(query)
    _, idx = cKDTree(train.points).query(batch, k=k)
    idx = np.asarray(idx).reshape(batch.shape[0], k)
    n_labels = int(train.labels.max()) + 1
    labels = np.array([np.bincount(train.labels[row], minlength=n_labels).argmax() for row in idx])
    return int(labels[0]) if query.ndim == 1 else labels


def default_bandwidth(samples: np.ndarray) -> float:
    scale = float(np.max(np.linalg.norm(np.atleast_2d(samples), axis=1)))
    return get_default('kde_bandwidth_factor') * (scale if scale > 0 else 1.0)


def _default_config(samples: np.ndarray, h: float, point: np.ndarray) -> OptimConfig:
    lipschitz = float(np.linalg.norm(point)) * float(np.max(np.linalg.norm(samples, axis=1)))
    step = 0.5 * h ** 2 / lipschitz if lipschitz > 0 else 1.0
    return OptimConfig(n_steps=100, step_size=step, num_inits=GRID_STARTS, tol=1e-12)


def grid_starts(samples: np.ndarray, h: float, point: np.ndarray, n_angles: int = ANGLE_GRID,
                n_starts: int = GRID_STARTS) -> np.ndarray:
    """
    Rotation angles of the n_starts lowest local minima of the KDE energy over n_angles equispaced angles

    The energy of every grid rotation is evaluated in one batched kde_nll call. Equal energies keep grid order,
    so a rotationally symmetric energy starts at angle 0.
    """
    angles = 2 * math.pi * np.arange(n_angles) / n_angles
    rotated = np.array([so2_act_point(Se2Element(theta), point) for theta in angles])
    energy = np.atleast_1d(kde_nll(samples, h, rotated))
    minima = np.flatnonzero((energy <= np.roll(energy, 1)) & (energy <= np.roll(energy, -1)))
    best = minima[np.argsort(energy[minima], kind='stable')][:n_starts]
    return np.where(angles[best] > math.pi, angles[best] - 2 * math.pi, angles[best])


def so2_canonicalize(train_samples: np.ndarray, h: float, point: np.ndarray, cfg: OptimConfig = None) -> CanonResult:
    """
    Rotates a point about the origin to a minimizer of the KDE negative log-likelihood on its circle

    Gradient descent on the rotation angle from several initial angles; the lowest energy wins. Without a cfg the
    descents start from grid_starts, otherwise from initial_coeffs(cfg).

    Args:
        train_samples: (N, 2) kernel centres
        h: bandwidth
        point: the (2,) point
        cfg: optimizer settings

    Returns:
        CanonResult whose canonical is the rotated point
    """
    if h <= 0:
        raise ValueError('KDE bandwidth must be positive')
    samples = np.atleast_2d(np.asarray(train_samples, dtype=float))
    point = np.asarray(point, dtype=float)
    action = GroupAction('so2', so2_act_point)
    starts = None
    if cfg is None:
        cfg = _default_config(samples, h, point)
        starts = [[theta] for theta in grid_starts(samples, h, point)]
    return multi_init_canonicalize(alg1_global_retraction, lambda p: kde_nll(samples, h, p), point, cfg, action,
                                   starts=starts)


def canonicalize_points(train_samples: np.ndarray, h: float, points: np.ndarray, cfg: OptimConfig = None,
                        threads: int = 1) -> np.ndarray:
    """Canonical positions of a batch of points, canonicalized independently on a thread pool"""
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def canon(p):
        return so2_canonicalize(train_samples, h, p, cfg).canonical

    if threads == 1:
        return np.array([canon(p) for p in points]).reshape(-1, 2)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return np.array(list(executor.map(canon, points))).reshape(-1, 2)


def _rotate(points: np.ndarray, theta: float) -> np.ndarray:
    return so2_act_point(Se2Element(theta), points)


def canonicalize_training(train: LabeledPoints2D, canonicalize: Callable[[np.ndarray], np.ndarray]) -> LabeledPoints2D:
    """Training set of the canonicalized classifier"""
    return LabeledPoints2D(canonicalize(train.points), train.labels)


def decision_boundary_grid(train: LabeledPoints2D, k: int, lattice: Tuple[np.ndarray, np.ndarray],
                           canonicalize: Callable[[np.ndarray], np.ndarray],
                           canon_train: LabeledPoints2D = None) -> pd.DataFrame:
    """
    Raw and canonicalized k-NN labels over a lattice of query points

    The canonicalized classifier is trained on the canonicalized training points.

    Args:
        train: labeled training points
        k: neighbours
        lattice: x and y coordinates of the lattice axes
        canonicalize: maps an (m, 2) batch to canonical positions
        canon_train: the canonicalized training points, computed with canonicalize when None

    Returns:
        pandas DataFrame with columns x, y, label_raw, label_canon
    """
    xs, ys = (np.asarray(a, dtype=float) for a in lattice)
    xx, yy = np.meshgrid(xs, ys)
    queries = np.column_stack([xx.ravel(), yy.ravel()])
    canon_train = canonicalize_training(train, canonicalize) if canon_train is None else canon_train
    return pd.DataFrame({
        'x': queries[:, 0],
        'y': queries[:, 1],
        'label_raw': knn_classify(train, k, queries),
        'label_canon': knn_classify(canon_train, k, canonicalize(queries)),
    })


def rotation_accuracy(train: LabeledPoints2D, test: LabeledPoints2D, k: int, angles: Sequence[float],
                      canonicalize: Callable[[np.ndarray], np.ndarray],
                      canon_train: LabeledPoints2D = None) -> pd.DataFrame:
    """
    Accuracy of the raw and the canonicalized classifier on rotated copies of the test set

    Returns:
        pandas DataFrame indexed by angle with columns accuracy_raw, accuracy_canon, agreement_canon, where
        agreement_canon is the share of test points whose canonicalized prediction matches the unrotated one.
        canon_train, when given, is used instead of canonicalizing the training points again.
    """
    canon_train = canonicalize_training(train, canonicalize) if canon_train is None else canon_train
    reference = knn_classify(canon_train, k, canonicalize(test.points))
    rows = []
    for theta in angles:
        rotated = _rotate(test.points, theta)
        raw = knn_classify(train, k, rotated)
        canon = knn_classify(canon_train, k, canonicalize(rotated))
        rows.append({
            'angle': float(theta),
            'accuracy_raw': float(np.mean(raw == test.labels)),
            'accuracy_canon': float(np.mean(canon == test.labels)),
            'agreement_canon': float(np.mean(canon == reference)),
        })
        logger.info(f'rotation {theta:.4f}: raw {rows[-1]["accuracy_raw"]:.3f}, canon {rows[-1]["accuracy_canon"]:.3f}')
    return pd.DataFrame(rows).set_index('angle')
