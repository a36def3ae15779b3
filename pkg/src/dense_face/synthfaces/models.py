"""Pydantic models for the on-disk sprite dataset."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class DatasetEntry(BaseModel):
    """One manifest line: the sprite's spec and the relative paths of its files."""

    index: int = Field(ge=0, description="Sample index; also the file stem")
    identity: int = Field(ge=0, description="Identity index shared across its poses")
    split: Literal["train", "heldout"] = Field(description="Split by identity")
    id_params: list[float] = Field(description="Eight identity parameters in [0, 1]")
    pose: list[float] = Field(description="Yaw, pitch, roll in degrees")
    background: int = Field(ge=0, description="Background palette index")
    seed: int = Field(ge=0, description="Per-sample seed derived from the dataset seed")
    caption: str = Field(description="Templated caption")
    image: str = Field(description="RGB image path (PPM), relative to the dataset root")
    mask: str = Field(description="Face mask path (PGM)")
    depth: str = Field(description="Depth map path (PGM)")
    landmarks: str = Field(description="Landmark text file path")
    caption_file: str = Field(description="Caption text file path")


class DatasetSummary(BaseModel):
    """Result of a dataset generation run."""

    root: str = Field(description="Dataset directory")
    n: int = Field(ge=1, description="Number of samples written")
    seed: int = Field(description="Master seed")
    poses_per_identity: int = Field(ge=1, description="Samples per identity")
    identities: int = Field(ge=1, description="Number of identities")
    heldout_identities: list[int] = Field(
        default_factory=list, description="Identity indices reserved for evaluation"
    )
    manifest: str = Field(description="Path of manifest.jsonl")
