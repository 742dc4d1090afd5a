"""segguard: reliability tooling for segmentation models.

Spectral-signature OOD detection, an MC-dropout entropy baseline,
calibration metrics (ECE/MCE), spacing-aware segmentation metrics
(DSC/HD95/ASSD), detection evaluation, multi-dataset sampling plans and
sliding-window tiling. Everything operates on plain numpy arrays /
NPY files, independent of any training framework.
"""

__version__ = "0.1.0"

from segguard._edt import KERNEL as EDT_KERNEL
from segguard.calibration import ReliabilityBins, bin_predictions, ece, mce
from segguard.detect import DetectionReport, LabeledScores, confusion_at, roc_auc
from segguard.sampling_tiling import (
    DatasetCatalog,
    SamplingPlan,
    TilingPlan,
    assemble_blocks,
    sample_dataset,
    sampling_plan,
    tiling_origins,
)
from segguard.segmetrics import assd, hard_dice, hd95, soft_dice
from segguard.spectral import (
    BankConfig,
    OODVerdict,
    SignatureBank,
    SpectralSignature,
    bank_build,
    classify,
    compute_spectrum,
    load_bank,
    oodm,
    save_bank,
    signature_from_feature_map,
    threshold_tau,
)
from segguard.tensor_core import Tensor, load_tensor, normalize_ct, normalize_mr, save_tensor
from segguard.uncertainty import (
    classify_uncertainty,
    entropy_map,
    image_uncertainty,
    mean_prob_map,
    uncertainty_threshold,
)
