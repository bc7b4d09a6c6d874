from .blocks import BottleneckBlock, SqueezeExcite, bottleneck_forward, squeeze_excite
from .cost import (
    CostReport,
    LayerCost,
    count_params_and_macs,
    separable_conv_macs,
    separable_ratio,
    standard_conv_macs,
)
from .network import LytNet, Prediction, forward, preprocess
from .spec import (
    CLASSES,
    INPUT_SHAPE,
    LayerShape,
    LayerSpec,
    NetworkSpec,
    build_default_spec,
)
from .weights import (
    ValidationReport,
    Weights,
    dumps_weights,
    load_weights,
    loads_weights,
    random_weights,
    save_weights,
    validate_weights,
    weight_slots,
)
