import numpy as np
import pytest

from mcsep.features import assemble_input
from mcsep.neural.model import TrainConfig, make_targets
from mcsep.signal_core import StftConfig, stft
from mcsep.spatializer import (
    ArrayGeometry,
    RoomSpec,
    SceneSpec,
    build_scene,
    linear_array,
    sample_source_positions,
    synth_source,
)


def desk_scene(duration=0.184, seed=0, snr_db=1.5):
    """A 4-mic scene; 0.184 s gives T = 20 frames at the default STFT."""
    room = RoomSpec()
    array = ArrayGeometry(linear_array((3.0, 2.5, 1.5)))
    pos = sample_source_positions(array, room, np.random.default_rng(seed))
    sigs = [
        synth_source("harmonic", 140.0, duration, seed + 1),
        synth_source("chirp", 320.0, duration, seed + 2),
    ]
    return build_scene(SceneSpec(room, array, pos, sigs, snr_db=snr_db, seed=seed))


def desk_example(config: TrainConfig, duration=0.184, seed=0):
    scene = desk_scene(duration, seed)
    cfg = StftConfig()
    features = assemble_input(scene.mixture, cfg, 0, config.log_magnitude, config.standardize)
    src_refs = [stft(img.channel(0), cfg) for img in scene.images]
    targets = make_targets(features.mixture_specs[0], src_refs, config)
    return features, targets, src_refs


@pytest.fixture(scope="session")
def desk_config():
    return TrainConfig()


@pytest.fixture(scope="session")
def desk_data(desk_config):
    return desk_example(desk_config)


ACCEPTANCE_LINES: dict = {}


class CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.line = number, title, None

    def report(self, ok: bool, detail: str) -> bool:
        self.line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}: {detail}"
        ACCEPTANCE_LINES[self.number] = self.line
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    rec = CriterionRecorder(*marker.args)
    yield rec
    if rec.line is None:
        rec.report(False, "raised before producing a result")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion under test")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
