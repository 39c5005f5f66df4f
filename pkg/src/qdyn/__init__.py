"""qdyn: simulated 8-bit post-training quantization and layerwise
distributional profiling for small convolutional networks."""

__version__ = "0.1.0"

from .builders import (  # noqa: F401
    ARCHITECTURES,
    build_architecture,
    build_mobilenet_v1_cifar,
    build_resnet34_cifar,
    build_toynet,
)
from .calibrate import calibrate  # noqa: F401
from .config import ExperimentConfig, resolve_config  # noqa: F401
from .datasets import Dataset, read_cifar10_binary, synthetic_dataset  # noqa: F401
from .engine import forward_fp32, forward_quant  # noqa: F401
from .experiment import QuantReport, run_trials  # noqa: F401
from .graph import ModelGraph  # noqa: F401
from .metrics import average_precision, layer_stats, output_metrics, qmse  # noqa: F401
from .model_io import load_model, save_model  # noqa: F401
from .quantize import (  # noqa: F401
    QuantParams,
    QTensor,
    RangeRecord,
    bn_fold,
    dequantize,
    percentile_range,
    quant_params_from_range,
    quantize,
)
from .tensor import Tensor, WeightTensor  # noqa: F401
