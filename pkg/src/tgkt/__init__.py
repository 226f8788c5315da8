"""Weighted tensor Golub-Kahan-Tikhonov regularization under the t-product.

Dense t-product tensor algebra (:mod:`tgkt.tensor`), SPD weight machinery
(:mod:`tgkt.linalg`), weighted bidiagonalization processes
(:mod:`tgkt.bidiag`), discrepancy-principle Tikhonov solvers
(:mod:`tgkt.solvers`), deblurring experiment construction
(:mod:`tgkt.problems`), and file formats plus a CLI
(:mod:`tgkt.formats`, :mod:`tgkt.cli`).
"""

from .bidiag import (
    BreakdownError,
    ScalarBidiagResult,
    TensorBidiagResult,
    extend,
    wg_tgkb,
    wgg_tgkb,
    wtgkb,
)
from .linalg import (
    SpdOperator,
    TensorBidiagonal,
    ZeroSliceError,
    normalize,
    solve_tensor_tikhonov,
    tensor_cholesky,
    tsvd_oracle,
)
from .problems import (
    BlurSpec,
    NoiseSpec,
    build_blur,
    build_covariance_m,
    build_reg_d,
    gen_noise,
    metrics,
    multi_squeeze,
    multi_twist,
    squeeze,
    twist,
)
from .solvers import (
    BracketError,
    DiscrepancyConfig,
    DiscrepancyNotMet,
    SolveReport,
    bisect_mu,
    phi_k,
    psi_k,
    wg_tgkt,
    wg_tgkt_p,
    wgg_tgkt,
    wtgkt,
    wtgkt_p,
)
from .tensor import (
    bcirc,
    bcirc_oracle_prod,
    circledast,
    e1_lateral,
    e1_tube,
    fft_mode3,
    fold,
    fro_norm,
    identity_tensor,
    ifft_mode3,
    tdiamond,
    tprod,
    ttranspose,
    unfold,
    weighted_norm,
)

__version__ = "0.1.0"

__all__ = [
    "BlurSpec", "BracketError", "BreakdownError", "DiscrepancyConfig",
    "DiscrepancyNotMet", "NoiseSpec", "ScalarBidiagResult", "SolveReport",
    "SpdOperator", "TensorBidiagResult", "TensorBidiagonal", "ZeroSliceError",
    "bcirc", "bcirc_oracle_prod", "bisect_mu", "build_blur",
    "build_covariance_m", "build_reg_d", "circledast", "e1_lateral", "e1_tube",
    "extend", "fft_mode3", "fold", "fro_norm", "gen_noise", "identity_tensor",
    "ifft_mode3", "metrics", "multi_squeeze", "multi_twist", "normalize",
    "phi_k", "psi_k", "solve_tensor_tikhonov", "squeeze", "tdiamond",
    "tensor_cholesky", "tprod", "tsvd_oracle", "ttranspose", "twist", "unfold",
    "weighted_norm", "wg_tgkb", "wg_tgkt", "wg_tgkt_p", "wgg_tgkb", "wgg_tgkt",
    "wtgkb", "wtgkt", "wtgkt_p",
]
