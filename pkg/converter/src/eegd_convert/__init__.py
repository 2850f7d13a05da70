from .container import ContainerFormatError, read_container, write_container
from .convert import SourceLayoutError, convert, verify

__version__ = "0.1.0"
