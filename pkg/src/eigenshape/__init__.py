"""Shape analysis and recovery from Laplace-Beltrami spectra."""

from .geometry import (
    Contour,
    GeometryError,
    Mesh,
    PointCloud,
    ShapeFamily,
    decimate,
    generate_blob,
    generate_contour,
    icosphere,
    load_shape,
    sample_pointcloud,
    save_shape,
    unit_square_grid,
)
from .laplacian import (
    AssemblyError,
    LaplacianPair,
    assemble,
    assemble_contour_fem,
    assemble_cubic_fem,
    assemble_linear_fem,
    export_triplets,
)
from .eigensolve import (
    EigenPairs,
    EigensolveError,
    Spectrum,
    SpectrumCache,
    smallest_k,
    spectrum_of,
)
from .neural import Adam, Net, chamfer
from .spectral_ae import (
    ModelBundle,
    TrainConfig,
    TrainingDiverged,
    build_dense_model,
    build_pointcloud_model,
    cloud_dataset,
    compute_loss,
    dense_dataset,
    load_bundle,
    save_bundle,
    train_model,
    write_history_csv,
)
from .apps import (
    Correspondence,
    IcpResult,
    NearestIndex,
    StyleTransferConfig,
    StyleTransferResult,
    band_modify,
    estimate_spectrum,
    icp_rigid,
    interpolate_latent,
    interpolate_spectra,
    match_shapes,
    nn_baseline,
    shape_from_spectrum,
    style_transfer,
    super_resolve,
)

__version__ = "0.1.0"
