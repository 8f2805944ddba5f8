"""Reference HTTP logits server for the extraction-audit wire protocol."""

from .models import FileTableModel, ServedModel
from .server import create_server, serve

__version__ = "0.1.0"
