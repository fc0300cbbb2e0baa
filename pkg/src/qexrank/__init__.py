__version__ = "0.1.0"
__codename__ = "Doha"

from .commands.base import Command, register
from .console import Output
