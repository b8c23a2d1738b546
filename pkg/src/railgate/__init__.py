"""railgate: a model-safeguarding inference gateway.

Every prediction request passes an ordered pipeline of safeguards (input
validation, adversarial detection, drift monitoring, OOD detection,
explainability) and receives a structured response envelope with HTTP-style
status codes, so an ML component can never fail silently.
"""

__version__ = "0.1.0"

from .core import (
    BackendError,
    BackendFailure,
    CalibrationError,
    ConfigError,
    ErrorCode,
    GuardFailure,
    GuardName,
    GuardReport,
    InternalFailure,
    ModelContract,
    ModelFormatError,
    NumericDomainError,
    Prediction,
    RailgateError,
    ResponseEnvelope,
    Success,
    UnsupportedOperationError,
    Verdict,
    build_envelope,
    softmax,
)
from .models import (
    LogisticModel,
    Mlp2Model,
    RemoteBackend,
    fit_logistic,
    load_model,
    loss_gradient,
    predict,
    remote_infer,
    save_model,
)
from .validation import ValidationFinding, validate
from .adversarial import AdvDetector, build_adv_training_set, detect, fgsm, fit_adv_detector
from .ood import (
    DriftWindow,
    OodThresholds,
    ReferenceStats,
    calibrate,
    drift_check,
    energy_score,
    fit_reference_stats,
    hellinger,
    max_logit_score,
    msp_score,
    ood_verdict,
)
from .explain import Explanation, coalition_value, exact_shapley, kernel_shap, shap_kernel_weight
from .evaluate import EvalReport, auroc
from .config import GatewayConfig, ModelConfig, load_config
from .gateway import Gateway, Metrics, create_app
