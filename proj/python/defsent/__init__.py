# Copyright 2026 The DefSent Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""DefSent sentence encoder: checkpoints, embeddings and metrics."""

from . import _core
from ._core import (
    CheckpointError,
    Encoder,
    InsufficientData,
    InvalidArgument,
    cosine_similarity,
    random_ranking_mrr,
    rank_metrics,
    rank_of_target,
    run_cli,
    spearman_rho,
)

__all__ = [
    "CheckpointError",
    "Encoder",
    "InsufficientData",
    "InvalidArgument",
    "cosine_similarity",
    "random_ranking_mrr",
    "rank_metrics",
    "rank_of_target",
    "run_cli",
    "spearman_rho",
]
__version__ = "0.1.0"
