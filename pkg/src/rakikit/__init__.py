"""Scan-specific parallel MRI reconstruction toolkit.

Linear k-space interpolation (GRAPPA and its iterative variant), an
optimized complex-valued interpolation network (RAKI) with an iterative
training scheme (iRAKI), virtual-conjugate-coil phase constraints, a
synthetic multi-coil phantom with an exactness oracle, and masked image
quality metrics.
"""

from .backend import BACKEND
from .core import (
    SamplingPattern,
    extract_central_lines,
    fft2c,
    ifft2c,
    load_image,
    load_ksp,
    reinsert_lines,
    rss_combine,
    save_image,
    save_ksp,
    zero_fill,
)
from .grappa import (
    GrappaKernel,
    KernelGeometry,
    assemble_calibration,
    calibrate,
    grappa_reconstruct,
    igrappa_reconstruct,
    interpolate,
)
from .iraki import IrakiResult, IrakiSchedule, build_schedule, iraki_reconstruct
from .metrics import MetricReport, evaluate, make_mask, nmse, psnr, ssim
from .phantom import (
    CoilModel,
    Ellipse,
    PhantomSpec,
    default_head_phantom,
    make_2d_harmonic_array,
    make_harmonic_array,
    render_phantom,
    simulate_kspace,
)
from .raki import (
    AdamState,
    NetworkConfig,
    RakiWeights,
    TrainReport,
    adam_step,
    cleaky_relu,
    forward,
    gradients,
    init_weights,
    load_weights,
    mse_loss,
    raki_interpolate,
    raki_reconstruct,
    save_weights,
    train,
)
from .vcc import VccStack, augment_vcc, vcc_reconstruct

__version__ = "0.1.0"
