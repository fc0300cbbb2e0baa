from .base import Command, register, COMMAND_REGISTRY
