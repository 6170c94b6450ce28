import numpy as np
import pytest
import torch

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def mini_bundle():
    """A small (untrained) s4d bundle matching the default synth montage,
    for pipeline-mechanics tests that do not need decoding accuracy."""
    from mindloop.classify import S4dConfig, bundle_from_model, s4d_init
    from mindloop.config import FeatureSettings, MontageSettings
    from mindloop.features import csp_fit
    from mindloop.signal_core import EpochSet, NormStats

    montage = MontageSettings()  # 8 channels, 250 Hz
    n_channels = len(montage.channel_names)
    features = FeatureSettings()
    class_names = ("left", "rest", "right")

    rng = np.random.default_rng(0)
    epochs = rng.standard_normal((12, n_channels, 500))
    epochs[0::3, 2] *= 2.0
    epochs[1::3, 4] *= 2.0
    es = EpochSet(
        epochs=epochs, labels=np.arange(12) % 3, class_names=class_names,
        sample_rate_hz=250.0, channel_names=tuple(montage.channel_names),
        tmin=0.0, tmax=2.0)
    csp = csp_fit(es, n_components=features.csp_components)

    d_input = n_channels * len(features.freqs_hz) + len(class_names) * features.csp_components
    model = s4d_init(S4dConfig(d_input=d_input, d_hidden=8, d_state=4,
                               n_layers=1, n_classes=3, dropout=0.1), seed=0)
    norm = NormStats(mean=np.zeros(n_channels), std=np.ones(n_channels))
    return bundle_from_model(model, csp, norm, features, montage, class_names)
