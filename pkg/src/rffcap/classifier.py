"""Fisher discriminant classifier for empirical error-rate cross-checks.

Fits a supervised linear projection (between-class vs. ridge-regularized
within-class scatter), then assigns identities by Mahalanobis distance to the
projected class means under the pooled within-class covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .fingerprint import FingerprintDataset, PipelineConfig, build_dataset
from .signal_model import DeviceProfile


@dataclass
class LdaModel:
    projection: np.ndarray       # (n_bins, k) discriminant directions
    class_means: np.ndarray      # (C, k) projected means
    pooled_cov_inv: np.ndarray   # (k, k) inverse regularized pooled covariance
    class_ids: np.ndarray        # (C,) original device ids, ascending


@dataclass
class ClassificationReport:
    """Per-sample assignments plus aggregate error statistics.

    per_class_errors counts errors among test samples of each trained class;
    samples whose true label was never trained are always errors and are
    collected in unseen_labels.
    """

    pe: float
    per_class_errors: np.ndarray
    min_distance_scores: np.ndarray
    confusion: np.ndarray
    assigned_ids: np.ndarray
    true_ids: np.ndarray
    class_ids: np.ndarray
    unseen_labels: list = field(default_factory=list)

    @property
    def n_test(self) -> int:
        return self.true_ids.size


def fit_lda(train: FingerprintDataset, kappa: int = 150,
            ridge: float | None = None) -> LdaModel:
    """Fit the discriminant projection and Mahalanobis scoring model.

    Solves the symmetric generalized eigenproblem between-class scatter vs.
    within-class scatter + ridge*I and keeps the top kappa_eff eigenvectors,
    where kappa_eff = min(kappa, C-1, rank of the between-class scatter).
    ridge=None selects 1e-6 * trace(within)/n_bins; an explicit ridge of 0 is
    rejected when the within-class scatter is singular.
    """
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1: {kappa}")
    classes, y = np.unique(train.labels, return_inverse=True)
    n_classes = classes.size
    if n_classes < 3:
        raise ValueError(f"need at least 3 classes: {n_classes}")
    counts = np.bincount(y, minlength=n_classes)
    if counts.min() < 2:
        raise ValueError("every class needs at least 2 training samples")

    x = train.features
    n, m = x.shape
    mean_all = x.mean(axis=0)
    means = np.vstack([x[y == c].mean(axis=0) for c in range(n_classes)])

    within = x - means[y]
    sw = within.T @ within
    centered_means = means - mean_all
    sb = (centered_means * counts[:, None]).T @ centered_means

    if ridge is None:
        scale = np.trace(sw) / m
        if scale <= 0:
            scale = np.trace(sb) / m
        if scale <= 0:
            raise ValueError("training features are all identical")
        ridge = 1e-6 * scale
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if ridge == 0:
        try:
            np.linalg.cholesky(sw)
        except np.linalg.LinAlgError:
            raise ValueError(
                "within-class scatter is singular; rerun with a positive ridge")
    sw_reg = sw + ridge * np.eye(m)

    try:
        eigvals, eigvecs = scipy.linalg.eigh(sb, sw_reg)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(
            "within-class scatter is numerically singular; increase ridge") from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    rank = int(np.sum(eigvals > max(eigvals[0], 0.0) * 1e-9)) if eigvals[0] > 0 else 0
    if rank == 0:
        raise ValueError("between-class scatter has no usable directions")
    kappa_eff = min(kappa, n_classes - 1, rank)
    projection = eigvecs[:, order[:kappa_eff]]

    z = x @ projection
    z_means = np.vstack([z[y == c].mean(axis=0) for c in range(n_classes)])
    zw = z - z_means[y]
    pooled = zw.T @ zw / max(n - n_classes, 1)
    pooled += (1e-9 * max(np.trace(pooled), ridge) / kappa_eff) * np.eye(kappa_eff)
    return LdaModel(projection=projection, class_means=z_means,
                    pooled_cov_inv=np.linalg.inv(pooled),
                    class_ids=classes.astype(np.int64))


def classify(model: LdaModel, test: FingerprintDataset) -> ClassificationReport:
    """Assign each test sample to the Mahalanobis-nearest projected class mean.

    Distance ties break toward the smaller class id. Test samples with labels
    absent from training always count as errors and are flagged.
    """
    if test.n_bins != model.projection.shape[0]:
        raise ValueError("test feature length does not match the fitted model")
    z = test.features @ model.projection
    n_classes = model.class_means.shape[0]
    dist2 = np.empty((z.shape[0], n_classes))
    for c in range(n_classes):
        dz = z - model.class_means[c]
        dist2[:, c] = np.einsum("ij,jk,ik->i", dz, model.pooled_cov_inv, dz)
    assigned_idx = np.argmin(dist2, axis=1)  # first minimum = smallest class id
    min_dist = np.sqrt(np.maximum(dist2[np.arange(z.shape[0]), assigned_idx], 0.0))
    assigned_ids = model.class_ids[assigned_idx]

    true_ids = test.labels.astype(np.int64)
    id_to_idx = {int(cid): i for i, cid in enumerate(model.class_ids)}
    errors = assigned_ids != true_ids
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    per_class_errors = np.zeros(n_classes, dtype=np.int64)
    unseen = sorted({int(t) for t in true_ids if int(t) not in id_to_idx})
    for t, a, err in zip(true_ids, assigned_idx, errors):
        ti = id_to_idx.get(int(t))
        if ti is None:
            continue
        confusion[ti, a] += 1
        per_class_errors[ti] += int(err)
    return ClassificationReport(
        pe=float(np.mean(errors)), per_class_errors=per_class_errors,
        min_distance_scores=min_dist, confusion=confusion,
        assigned_ids=assigned_ids, true_ids=true_ids,
        class_ids=model.class_ids, unseen_labels=unseen)


def _experiment_datasets(profiles: Sequence[DeviceProfile], n_classes: int,
                         pipeline: PipelineConfig, train_per_class: int,
                         test_per_class: int, master_seed: int):
    selected = sorted(profiles, key=lambda p: p.device_id)[:n_classes]
    root = np.random.SeedSequence(master_seed)
    train_seq, test_seq, shuffle_seq = root.spawn(3)
    train = build_dataset(selected, train_per_class, pipeline,
                          int(train_seq.generate_state(1, np.uint64)[0]))
    test = build_dataset(selected, test_per_class, pipeline,
                         int(test_seq.generate_state(1, np.uint64)[0]))
    return train, test, shuffle_seq


def error_rate_experiment(profiles: Sequence[DeviceProfile], n_classes: int,
                          pipeline: PipelineConfig, train_per_class: int = 200,
                          test_per_class: int = 200, kappa: int = 150,
                          ridge: float | None = None, master_seed: int = 0,
                          shuffle_train_labels: bool = False,
                          return_datasets: bool = False):
    """Generate disjoint train/test datasets, fit, classify, and report.

    Train and test noise realizations are drawn from independent streams
    derived from master_seed, so the experiment is reproducible end to end.
    shuffle_train_labels destroys the feature/identity association (seeded)
    to measure chance-level behavior.
    """
    if n_classes < 3:
        raise ValueError(f"n_classes must be >= 3: {n_classes}")
    if n_classes > len(profiles):
        raise ValueError(f"only {len(profiles)} profiles for n_classes={n_classes}")
    train, test, shuffle_seq = _experiment_datasets(
        profiles, n_classes, pipeline, train_per_class, test_per_class, master_seed)
    if shuffle_train_labels:
        rng = np.random.default_rng(shuffle_seq)
        train = FingerprintDataset(train.features, rng.permutation(train.labels),
                                   train.meta)
    model = fit_lda(train, kappa=kappa, ridge=ridge)
    report = classify(model, test)
    if return_datasets:
        return report, train, test
    return report


def classification_report_to_csv(report: ClassificationReport, path) -> None:
    """CSV rows: sample index, best Mahalanobis distance, assigned id, true id."""
    with open(path, "w", newline="") as fh:
        fh.write("sample_index,min_distance,assigned_id,true_id\n")
        for i in range(report.n_test):
            fh.write(f"{i},{float(report.min_distance_scores[i])!r},"
                     f"{int(report.assigned_ids[i])},{int(report.true_ids[i])}\n")
