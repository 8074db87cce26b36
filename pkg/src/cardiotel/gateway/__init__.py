from .client import EventStream, GatewayClient  # noqa: F401
from .config import GatewayConfig  # noqa: F401
from .server import GatewayServer  # noqa: F401
from .store import PathStore  # noqa: F401
