# mmlio/pipeline/params.py
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

MODES = ("hvi", "vi", "hi")


class PipelineParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["hvi", "vi", "hi"] = "hvi"
    serial: bool = False
    queue_size: int = Field(4, ge=1, description="frames buffered between stages")
    static_duration: Optional[float] = Field(None, ge=0, description="s, None: from manifest")
    eval_max_dt: float = Field(0.01, gt=0, description="trajectory association window, s")
