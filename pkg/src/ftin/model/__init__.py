from .backbone import BasicBlock1d, ResNet1d
from .checkpoint import load_checkpoint, save_checkpoint
from .config import VARIANTS, BackboneConfig, FtinConfig, SlstmConfig, desk_config
from .network import ComplexMLP, Ftin, FrequencyDomainLearning, Head, build_model, ftin_forward
from .slstm import SLSTM, slstm_scan
from .spectral import HalfSpectrum, complex_mlp, dft_half, expand_full, idft_half, token_embed

__all__ = [
    "BackboneConfig",
    "BasicBlock1d",
    "ComplexMLP",
    "FrequencyDomainLearning",
    "Ftin",
    "FtinConfig",
    "HalfSpectrum",
    "Head",
    "ResNet1d",
    "SLSTM",
    "SlstmConfig",
    "VARIANTS",
    "build_model",
    "complex_mlp",
    "desk_config",
    "dft_half",
    "expand_full",
    "ftin_forward",
    "idft_half",
    "load_checkpoint",
    "save_checkpoint",
    "slstm_scan",
    "token_embed",
]
