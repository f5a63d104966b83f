"""nbwatch: narrowband interference detection in wideband OFDM channels.

Synthesizes complex-baseband RF scenes (OFDM bursts, narrowband interferers,
AWGN), builds balanced labeled IQ-window datasets, trains a small 1D CNN
classifier with a from-scratch numpy engine, and localizes interference to
one of N spectrum portions.  An energy-detector baseline and an experiment
runner round out the toolkit.
"""

from nbwatch.signalgen import (
    SpectrumConfig,
    OfdmParams,
    InterfererSpec,
    SceneSpec,
    Waveform,
    Modulation,
    portion_center_freq,
    synth_ofdm_burst,
    synth_narrowband_interferer,
    synth_ofdm_pulse_interferer,
    compose_scene,
    load_scene_spec,
    save_scene_spec,
    read_iq,
    write_iq,
)
from nbwatch.dataset import (
    LabeledDataset,
    class_name,
    num_classes,
    generate_dataset,
    split_dataset,
    save_dataset,
    load_dataset,
    DatasetFormatError,
)
from nbwatch.neuralnet import (
    Model,
    ModelConfig,
    TrainConfig,
    TrainReport,
    train,
    save_model,
    load_model,
    peek_model_config,
)
from nbwatch.iqmirror import IqMirror, MirrorConfig, MirrorStats
from nbwatch.detector import (
    DetectionReport,
    EnergyDetectorConfig,
    classify,
    detect_multi,
    energy_detect,
    evaluate,
    bench_latency,
)

__version__ = "0.1.0"

__all__ = [
    "SpectrumConfig",
    "OfdmParams",
    "InterfererSpec",
    "SceneSpec",
    "Waveform",
    "Modulation",
    "portion_center_freq",
    "synth_ofdm_burst",
    "synth_narrowband_interferer",
    "synth_ofdm_pulse_interferer",
    "compose_scene",
    "load_scene_spec",
    "save_scene_spec",
    "read_iq",
    "write_iq",
    "LabeledDataset",
    "class_name",
    "num_classes",
    "generate_dataset",
    "split_dataset",
    "save_dataset",
    "load_dataset",
    "DatasetFormatError",
    "Model",
    "ModelConfig",
    "TrainConfig",
    "TrainReport",
    "train",
    "save_model",
    "load_model",
    "peek_model_config",
    "IqMirror",
    "MirrorConfig",
    "MirrorStats",
    "DetectionReport",
    "EnergyDetectorConfig",
    "classify",
    "detect_multi",
    "energy_detect",
    "evaluate",
    "bench_latency",
]
