import numpy as np
import pandas as pd
import pytest

from src import __version__
from src.bounds.presets import measured
from src.calibration.efficiency import forward_rates
from src.protocols.artifacts import (
    ArtifactHeader,
    ArtifactKind,
    axes_frame,
    load_axes,
    load_counts,
    load_probes,
    load_rates,
    rates_frame,
    read_table,
    render_artifact,
    write_artifact,
)
from src.protocols.plots import plot_purity_curves
from src.utils.errors import ArtifactError, InvalidArgumentError


def test_header_records_version_kind_seed_and_config():
    text = render_artifact(pd.DataFrame({"x": [1.0]}), ArtifactHeader(ArtifactKind.BOUNDS, {"b": 1, "a": [1, 2]}, 7))
    lines = text.splitlines()
    assert lines[0] == f"# steering-bounds {__version__}"
    assert lines[1] == "# kind: bounds"
    assert lines[2] == "# seed: 7"
    assert lines[3] == '# config: {"a": [1, 2], "b": 1}'
    assert lines[4:] == ["x", "1"]


def test_rendering_is_deterministic():
    frame = axes_frame(measured())
    header = ArtifactHeader(ArtifactKind.TOMOGRAPHY, {"axes": np.eye(3)})
    assert render_artifact(frame, header) == render_artifact(frame.copy(), header)


def test_axes_survive_a_file(tmp_path):
    path = write_artifact(tmp_path / "axes.csv", axes_frame(measured()), ArtifactHeader(ArtifactKind.TOMOGRAPHY))
    loaded = load_axes(path)
    assert np.allclose(loaded.axes, measured().axes, atol=1e-11)
    assert np.allclose(loaded.sigmas, measured().sigmas)


def test_probe_table(tmp_path):
    path = tmp_path / "probes.csv"
    path.write_text(
        "# probe table\n"
        "probe,label,setting,counts,trials\n"
        "1,H,1,10,100\n1,H,2,50,100\n"
        "2,D,1,55,100\n2,D,2,90,100\n"
    )
    probes = load_probes(path)
    assert [p.label for p in probes] == ["H", "D"]
    assert probes[1].counts.tolist() == [55.0, 90.0]
    assert np.allclose(probes[1].input_state, [1, 0, 0])


def test_rates_table(tmp_path):
    tables = [forward_rates([[0.8, 0.7]], [[0.75, 0.7]], [[[[0.1, 0.4], [0.4, 0.1]]]], rate)
              for rate in (1e4, 2e4)]
    path = tmp_path / "rates.csv"
    rates_frame(tables).to_csv(path, index=False)
    loaded = load_rates(path)
    assert len(loaded) == 2
    assert np.allclose(loaded[1].coincidences, tables[1].coincidences)
    assert np.allclose(loaded[0].bob_singles, tables[0].bob_singles)


def test_missing_file_and_columns(tmp_path):
    with pytest.raises(ArtifactError) as missing:
        read_table(tmp_path / "absent.csv")
    assert missing.value.code == "artifact"
    assert isinstance(missing.value, InvalidArgumentError)
    path = tmp_path / "counts.csv"
    path.write_text("k,j,a,N\n1,1,1,5\n")
    with pytest.raises(ArtifactError):
        load_counts(path)


def test_unknown_rate_kind(tmp_path):
    path = tmp_path / "rates.csv"
    path.write_text("kind,k,j,a,b,rate\nsingles,1,1,+,,3.0\n")
    with pytest.raises(ArtifactError):
        load_rates(path)


def test_curve_plot(tmp_path):
    rows = [{"eta": eta, "mu_min": 1.0 - eta / 2} for eta in (0.5, 0.75, 1.0)]
    path = plot_purity_curves({"d=1": rows}, tmp_path / "plots" / "curve.png")
    assert path.exists() and path.stat().st_size > 0
