from .campaign_graph import CampaignGraph, CampaignState

__all__ = ["CampaignGraph", "CampaignState"]
