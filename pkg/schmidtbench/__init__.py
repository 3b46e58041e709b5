from schmidtbench.calibration import (
    GainCalibration,
    calibrate_gain,
    calibrate_kernel,
)
from schmidtbench.coherence import (
    ApertureSpec,
    coherence_matrix,
    filtered_g2,
)
from schmidtbench.config import ScenarioConfig, load_config, parse_config
from schmidtbench.hbt import (
    SamplerConfig,
    estimate_g2,
    sample_single_beam,
    sample_twin_beams,
)
from schmidtbench.kernel import (
    GridSpec,
    KernelParams,
    build_kernel,
    decompose,
    reconstruct,
)
from schmidtbench.propagation import OpticalLayout, propagate
from schmidtbench.scenarios import (
    ScanResult,
    emit,
    read_scan,
    run_aperture_scan,
    run_gain_scan,
    run_hbt_point,
    run_position_scan,
)
from schmidtbench.spectrum import (
    SchmidtSpectrum,
    g2_auto,
    g2_cross,
    gain_transform,
    normalize,
    schmidt_number,
    tensor_spectrum,
)
