"""Synthetic Gaussian-mixture diffusion signals and their ground-truth ODFs.

Diffusivities are in mm^2/s and b-values in s/mm^2. The default white-matter
eigenvalues are 1.7e-3 and 0.2e-3 mm^2/s.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

FIBER_EIGENVALUES = (1.7e-3, 0.2e-3, 0.2e-3)


@dataclass(frozen=True)
class Compartment:
    fraction: float
    eigenvalues: tuple
    rotation: np.ndarray  # columns are eigenvectors; column 0 is the fibre axis

    @property
    def tensor(self):
        R = self.rotation
        return R @ np.diag(self.eigenvalues) @ R.T

    @property
    def axis(self):
        return self.rotation[:, 0]


@dataclass(frozen=True)
class GaussianMixtureModel:
    components: tuple

    def __post_init__(self):
        f = np.array([c.fraction for c in self.components])
        if np.any(f <= 0) or abs(f.sum() - 1.0) > 1e-12:
            raise ValueError(f"fractions must be positive and sum to 1, got {f}")
        for c in self.components:
            if np.any(np.asarray(c.eigenvalues) <= 0):
                raise ValueError("eigenvalues must be positive")

    @property
    def axes(self):
        return [c.axis for c in self.components]

    def rotated(self, R):
        R = np.asarray(R, dtype=float)
        return GaussianMixtureModel(tuple(
            Compartment(c.fraction, c.eigenvalues, R @ c.rotation) for c in self.components))

    def to_json(self):
        return json.dumps({"components": [
            {"fraction": c.fraction, "eigenvalues": list(c.eigenvalues),
             "euler_zyz": Rotation.from_matrix(c.rotation).as_euler("ZYZ").tolist()}
            for c in self.components]})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, (str, bytes)) else text
        return cls(tuple(
            Compartment(float(c["fraction"]), tuple(float(x) for x in c["eigenvalues"]),
                        Rotation.from_euler("ZYZ", c.get("euler_zyz", [0, 0, 0])).as_matrix())
            for c in d["components"]))


def _frame_from_axis(axis):
    """Rotation whose first column is ``axis`` (z-roll fixed by the choice of helper)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    b = np.cross(a, helper)
    b /= np.linalg.norm(b)
    return np.column_stack([a, b, np.cross(a, b)])


def single_fiber(axis=(1.0, 0.0, 0.0), eigenvalues=FIBER_EIGENVALUES):
    return GaussianMixtureModel((Compartment(1.0, tuple(eigenvalues), _frame_from_axis(axis)),))


def crossing_fibers(angle_deg, eigenvalues=FIBER_EIGENVALUES, fractions=(0.5, 0.5)):
    """Two fibres: first along x, second rotated about z by ``angle_deg``."""
    t = np.radians(angle_deg)
    axes = [(1.0, 0.0, 0.0), (np.cos(t), np.sin(t), 0.0)]
    return GaussianMixtureModel(tuple(
        Compartment(f, tuple(eigenvalues), _frame_from_axis(a)) for f, a in zip(fractions, axes)))


def isotropic(diffusivity=0.7e-3):
    return GaussianMixtureModel((Compartment(1.0, (diffusivity,) * 3, np.eye(3)),))


def eval_signal(model, b, directions):
    """Normalised attenuation sum_j f_j exp(-b u^T D_j u)."""
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    b = np.broadcast_to(np.asarray(b, dtype=float), (u.shape[0],))
    if np.any(b < 0):
        raise ValueError("b must be nonnegative")
    out = np.zeros(u.shape[0])
    for c in model.components:
        out += c.fraction * np.exp(-b * np.einsum("ij,jk,ik->i", u, c.tensor, u))
    return out if np.ndim(directions) > 1 else float(out[0])


def eval_signal_q(model, qvecs):
    """Signal at q-space vectors with ``b = |q|^2``."""
    qvecs = np.atleast_2d(np.asarray(qvecs, dtype=float))
    out = np.zeros(qvecs.shape[0])
    for c in model.components:
        out += c.fraction * np.exp(-np.einsum("ij,jk,ik->i", qvecs, c.tensor, qvecs))
    return out


def ground_truth_odf(model, directions):
    """Marginal (r^2-weighted) ODF of the Gaussian mixture, per steradian."""
    v = np.atleast_2d(np.asarray(directions, dtype=float))
    out = np.zeros(v.shape[0])
    for c in model.components:
        D = c.tensor
        Dinv = np.linalg.inv(D)
        quad = np.einsum("ij,jk,ik->i", v, Dinv, v)
        out += c.fraction / (4.0 * np.pi * np.sqrt(np.linalg.det(D))) * quad ** -1.5
    return out if np.ndim(directions) > 1 else float(out[0])


def sample_model(model, scheme):
    """Per-shell signal samples of ``model`` on a quadrature or gEEM scheme."""
    dirs = scheme.directions() if callable(scheme.directions) else scheme.directions
    return [eval_signal(model, b, d) for b, d in zip(scheme.b_values(), dirs)]


def random_rotation(seed):
    """Uniform random rotation matrix from a normalised Gaussian quaternion."""
    q = np.random.default_rng(seed).standard_normal(4)
    return Rotation.from_quat(q / np.linalg.norm(q)).as_matrix()
