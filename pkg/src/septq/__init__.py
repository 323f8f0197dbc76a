"""Layer-wise low-bit weight quantization that keeps the most important weights in full precision."""

__version__ = "0.1.0"

from .engine import EngineConfig, QuantResult, dequantize, layer_error, run_gptq, run_septq
from .grid import QuantGrid, grid_search
from .importance import StrategyConfig, score_all, select_mask

__all__ = [
    "EngineConfig",
    "QuantGrid",
    "QuantResult",
    "StrategyConfig",
    "dequantize",
    "grid_search",
    "layer_error",
    "run_gptq",
    "run_septq",
    "score_all",
    "select_mask",
]
