"""
Base classes for CLI commands.
"""
import os
import re
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from ..config import FLAG_KEYS, RunConfig, load_config
from ..errors import ConfigError
from ..session import Session

# Accepted by every command, on top of its own signature.
GLOBAL_OPTIONS = ("config",)
GLOBAL_FLAGS = ("offline", "json")


class CommandContext:
    """Context passed to commands"""

    def __init__(self, environ: Optional[Mapping[str, str]] = None):
        self.project_root = Path.cwd()
        self.environ = dict(os.environ if environ is None else environ)


class Command(ABC):
    """Base command class"""
    signature: str = ""
    description: str = ""
    help: str = ""  # Optional extended help text with examples
    # Run-config flags (keys of config.FLAG_KEYS) this command accepts.
    config_flags: Tuple[str, ...] = ()

    def __init__(self, args: List[str], context: Optional[CommandContext] = None):
        self.args = list(args)
        self.context = context or CommandContext()
        self._session: Optional[Session] = None

        # Auto-intercept --help / -h
        if "--help" in self.args or "-h" in self.args:
            self.show_help()
            self._help_shown = True
        else:
            self._help_shown = False

    @abstractmethod
    def handle(self):
        """Execute the command"""
        pass

    # ── Arguments ────────────────────────────────────────────────────

    @classmethod
    def _value_options(cls) -> set:
        _, _, options, _ = cls.parse_signature()
        return {o["name"] for o in options} | set(GLOBAL_OPTIONS) | set(cls.config_flags)

    def positionals(self) -> List[str]:
        """Positional tokens, skipping flags and the values of ``--opt value`` pairs."""
        value_options = self._value_options()
        out = []
        skip = False
        for arg in self.args:
            if skip:
                skip = False
                continue
            if arg.startswith("-"):
                if arg.startswith("--") and "=" not in arg and arg[2:] in value_options:
                    skip = True
                continue
            out.append(arg)
        return out

    def argument(self, index: int, default: Optional[str] = None) -> Optional[str]:
        """Get positional argument"""
        try:
            return self.positionals()[index]
        except IndexError:
            return default

    def option(self, name: str, default: Optional[str] = None) -> Optional[str]:
        """Get named option (--name=value or --name value)"""
        prefix = f"--{name}="
        flag = f"--{name}"

        for i, arg in enumerate(self.args):
            # Handle --name=value format
            if arg.startswith(prefix):
                return arg[len(prefix):]
            # Handle --name value format
            if arg == flag and i + 1 < len(self.args):
                next_arg = self.args[i + 1]
                # Make sure next arg is not another flag
                if not next_arg.startswith("-"):
                    return next_arg
        return default

    def flag(self, name: str) -> bool:
        """Check if flag is present (--flag)"""
        return f"--{name}" in self.args

    def int_option(self, name: str, default: Optional[int] = None) -> Optional[int]:
        raw = self.option(name)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"--{name} must be an integer, got {raw!r}") from None

    @property
    def as_json(self) -> bool:
        return self.flag("json")

    # ── Run configuration ────────────────────────────────────────────

    def run_config(self) -> RunConfig:
        """Defaults < config file < QEXRANK_KB_ENDPOINT < this command's flags."""
        flags: Dict[str, str] = {}
        for name in self.config_flags:
            value = self.option(name)
            if value is not None:
                flags[name] = value
        return load_config(
            config_path=Path(self.option("config")) if self.option("config") else None,
            flags=flags,
            offline=self.flag("offline"),
            environ=self.context.environ,
        )

    @property
    def session(self) -> Session:
        if self._session is None:
            self._session = Session(self.run_config())
        return self._session

    def close(self) -> None:
        if self._session is not None:
            self._session.close()

    # ── Help System ──────────────────────────────────────────────────

    @classmethod
    def parse_signature(cls) -> Tuple[str, List[dict], List[dict], List[dict]]:
        """
        Parse the signature DSL into structured components.

        Returns:
            (command_name, arguments, options, flags)

        Signature DSL:
            {name}          → positional argument (required)
            {name?}         → positional argument (optional)
            {name*}         → any number of positional arguments
            {--option=}     → option (no default)
            {--option=val}  → option with default
            {--flag}        → boolean flag
        """
        sig = cls.signature
        if not sig:
            return cls.__name__, [], [], []

        parts = sig.split()
        command_name = parts[0] if parts else cls.__name__

        arguments = []
        options = []
        flags = []

        for part in parts[1:]:
            match = re.match(r'\{(.+)\}', part)
            if not match:
                continue

            inner = match.group(1)

            if inner.startswith("--"):
                inner = inner[2:]
                if "=" in inner:
                    name, default = inner.split("=", 1)
                    options.append({
                        "name": name,
                        "default": default if default else None,
                    })
                else:
                    flags.append({"name": inner})
            else:
                arguments.append({
                    "name": inner.rstrip("?*"),
                    "optional": inner.endswith("?") or inner.endswith("*"),
                    "many": inner.endswith("*"),
                })

        return command_name, arguments, options, flags

    def show_help(self):
        """Display formatted help for this command."""
        from ..console import Output, Style

        command_name, arguments, options, flags = self.parse_signature()
        options = options + [{"name": n, "default": None} for n in self.config_flags]

        Output.new_line()
        print(f"{Style.BOLD}{Style.CYAN}Usage:{Style.RESET}")

        usage_parts = [f"  qexrank {command_name}"]
        for arg in arguments:
            name = f"{arg['name']}..." if arg["many"] else arg["name"]
            usage_parts.append(f"[{name}]" if arg["optional"] else f"<{name}>")
        usage_parts.append("[options]")
        print(" ".join(usage_parts))
        Output.new_line()

        print(f"{Style.BOLD}{Style.CYAN}Description:{Style.RESET}")
        print(f"  {self.description}")
        Output.new_line()

        if arguments:
            print(f"{Style.BOLD}{Style.CYAN}Arguments:{Style.RESET}")
            for arg in arguments:
                req = "optional" if arg["optional"] else "required"
                print(f"  {Style.GREEN}{arg['name']:20s}{Style.RESET} {req}")
            Output.new_line()

        print(f"{Style.BOLD}{Style.CYAN}Options:{Style.RESET}")
        for opt in options + [{"name": "config", "default": None}]:
            default_str = f" (default: {opt['default']})" if opt["default"] else ""
            print(f"  {Style.GREEN}--{opt['name'] + '=':18s}{Style.RESET}{default_str}")
        Output.new_line()

        print(f"{Style.BOLD}{Style.CYAN}Flags:{Style.RESET}")
        for name in [f["name"] for f in flags] + list(GLOBAL_FLAGS):
            print(f"  {Style.GREEN}--{name:18s}{Style.RESET}")
        print(f"  {Style.GREEN}--help, -h           {Style.RESET}Show this help message")
        Output.new_line()

        # The help block owns its own section headers ("Examples:", "Notes:").
        if self.help:
            for line in self.help.strip().split("\n"):
                print(f"  {line}")
            Output.new_line()


# Every run-config flag, for commands that need the whole pipeline.
ALL_CONFIG_FLAGS: Tuple[str, ...] = tuple(FLAG_KEYS)


# Command Registry
COMMAND_REGISTRY: Dict[str, type] = {}

def register(cls: type) -> type:
    """Decorator to register commands"""
    cmd_name = cls.signature.split()[0] if cls.signature else cls.__name__
    COMMAND_REGISTRY[cmd_name] = cls
    return cls
