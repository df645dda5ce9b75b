"""Spatial-frequency-domain tissue optics toolkit.

Modelling and recovery of absorption and reduced scattering from
structured-illumination reflectance images: a Monte Carlo reflectance
table builder, six-image and single-snapshot processing pipelines, a
ground-truth-paired synthetic scene renderer, and dataset/metrics tools.
"""

__version__ = "0.1.0"

from .errors import SfdOpticsError
from .images import (
    CalibrationSet,
    ImageKind,
    OpticalPropertyMap,
    ScalarImage,
    compute_diffuse_reflectance,
    load_image,
    mean_of_images,
    save_image,
)
from .mc import (
    RadialReflectance,
    TransportConfig,
    radial_to_frequency,
    rescale_absorption,
    simulate_white_mc,
)
from .lut import (
    LookupTable,
    build_lut,
    diffusion_rd,
    load_lut,
    lut_forward,
    lut_invert,
    save_lut,
)
from .sfdi import (
    FrameSet,
    HeightCalibration,
    HeightMap,
    calibrate_from_phantom,
    demodulate_ac,
    demodulate_dc,
    process_sfdi,
    process_sfdi_profile_corrected,
    profilometry_phase,
    unwrap_and_height,
)
from .ssop import (
    ComplexSpectrum,
    SsopFilterConfig,
    extract_ac,
    extract_dc,
    fft2_forward,
    fft2_inverse,
    process_ssop,
)
from .synth import (
    CameraModel,
    IlluminationSpec,
    Scene,
    SceneKind,
    make_scene,
    render_frame,
    render_frameset,
    render_profilometry,
)
from .evalkit import (
    ComparisonReport,
    PatchMode,
    PatchPair,
    StridePolicy,
    compare_report,
    export_patches,
    import_prediction,
    nmae,
    roi_stats,
    write_report_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
