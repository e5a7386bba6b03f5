"""Wire-protocol inference server over pretrained NLI, generation, and
embedding checkpoints."""

from nli_shim.app import create_app
from nli_shim.config import ShimConfig

__all__ = ["ShimConfig", "create_app"]
