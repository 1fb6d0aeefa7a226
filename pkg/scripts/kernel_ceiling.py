"""How close can a degree-limited expansion get to the analytic fibre ODF?

Projects the analytic single-fibre ODF onto even harmonics below L with a
dense Gauss-Legendre x trapezoid rule, then reports the worst pointwise
relative error at random directions next to that of the fitted kernel ODF.
"""
import argparse

import numpy as np
from scipy.special import roots_legendre

from spfq import experiments as ex
from spfq.config import Config
from spfq.math_core import cart_to_sph, sh_matrix
from spfq.models import ground_truth_odf, sample_model, single_fiber
from spfq.odf import odf_from_spf, odf_kernel
from spfq.transforms import spf_forward


def projection_error(model, L, v, n_theta=200, n_phi=400):
    x, w = roots_legendre(n_theta)
    T, P = np.meshgrid(np.arccos(x), np.linspace(0, 2 * np.pi, n_phi, endpoint=False), indexing="ij")
    W = np.repeat(w, n_phi) * 2 * np.pi / n_phi
    d = np.column_stack([np.sin(T).ravel() * np.cos(P).ravel(), np.sin(T).ravel() * np.sin(P).ravel(),
                         np.cos(T).ravel()])
    c = sh_matrix(L, T.ravel(), P.ravel()).T @ (W * ground_truth_odf(model, d))
    truth = ground_truth_odf(model, v)
    return np.max(np.abs(sh_matrix(L, *cart_to_sph(v)) @ c - truth) / truth)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=8)
    a = p.parse_args()
    v = np.random.default_rng(a.seed).standard_normal((100, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    model = single_fiber()
    cfg = Config()
    scheme, _ = ex.build_schemes(cfg)
    odf = odf_from_spf(spf_forward(scheme, sample_model(model, scheme)),
                       odf_kernel(scheme.N, scheme.L, scheme.zeta, ex.kernel_settings(cfg)))
    truth = ground_truth_odf(model, v)
    print(f"fitted kernel ODF      max rel error {np.max(np.abs(odf(v) - truth) / truth):.4f}  "
          f"integral {odf.integral:.4f}")
    for L in (11, 21, 41):
        print(f"best projection L={L:<3d} max rel error {projection_error(model, L, v):.3g}")
