import pytest


@pytest.mark.asyncio
async def test_campaign_without_simulation(tmp_path):
    from src.graph.campaign_graph import CampaignGraph
    from src.utils.config import CampaignConfig

    config = CampaignConfig.model_validate({
        "measurement": {"preset": "measured"},
        "curve_points": 6,
        "output_dir": str(tmp_path / "out"),
    })
    state = await CampaignGraph().run(config)

    assert not state["errors"]
    assert state["step"] == "optimized"
    assert set(state["optima"]) == {1, 2}
    assert state["optima"][1]["r"] == pytest.approx(0.4046, abs=1e-3)
    assert state["optima"][2]["r"] == pytest.approx(0.5930, abs=1e-3)
    assert "analysis" not in state or not state["analysis"]
    names = {p.split("/")[-1] for p in state["artifacts"]}
    assert {"measurement_axes.csv", "conservative_d1.csv", "conservative_d2.csv",
            "optimum_d1.csv", "optimum_d2.csv", "purity_curves.png"} <= names
    assert (tmp_path / "out" / "purity_curves.png").exists()


@pytest.mark.asyncio
async def test_campaign_with_simulation(tmp_path):
    from src.graph.campaign_graph import CampaignGraph
    from src.utils.config import CampaignConfig

    config = CampaignConfig.model_validate({
        "measurement": {"preset": "octahedral"},
        "d_values": [1],
        "conservative": False,
        "eta": 0.8,
        "curve_points": 4,
        "simulation": {"mu": 0.98, "alice_efficiency": 0.8, "trials": 200_000},
        "seed": 3,
        "output_dir": str(tmp_path),
    })
    state = await CampaignGraph().run(config)

    assert state["step"] == "analyzed"
    assert state["analysis"][1]["residual"] > 0
    header = (tmp_path / "counts.csv").read_text().splitlines()[:3]
    assert header[1] == "# kind: counts"
    assert header[2] == "# seed: 3"


@pytest.mark.asyncio
async def test_campaign_stops_on_stage_failure(tmp_path):
    from src.graph.campaign_graph import CampaignGraph
    from src.utils.config import CampaignConfig

    config = CampaignConfig.model_validate({
        "measurement": {"axes_csv": str(tmp_path / "missing.csv")},
        "output_dir": str(tmp_path),
    })
    state = await CampaignGraph().run(config)

    assert state["step"] == "measure_failed"
    assert state["errors"]["measure"]["exit_code"] == 2
    assert "optima" not in state
