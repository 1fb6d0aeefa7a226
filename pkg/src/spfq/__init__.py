"""Multi-shell q-space sampling with exact spherical polar Fourier transforms."""

from .math_core import (RadialQuadrature, laguerre_half, laguerre_roots, radial_function,
                        radial_weights, real_sph_harm, sph_bessel)
from .models import (GaussianMixtureModel, crossing_fibers, eval_signal, ground_truth_odf,
                     isotropic, random_rotation, sample_model, single_fiber)
from .odf import OdfSH, angular_error, find_peaks, icosphere, odf_from_spf, odf_kernel
from .sampling import (GeemScheme, MultiShellScheme, ShellGrid, design_scheme,
                       design_shell_grid, export_scheme, generate_geem, import_scheme)
from .transforms import (SpfCoefficients, forward_sht, inverse_sht, regularized_ls_fit,
                         spf_forward, spf_synthesize)

__version__ = "0.1.0"
