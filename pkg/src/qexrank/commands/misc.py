"""
Miscellaneous commands (list, version).
"""
import importlib
import logging
import sys

from .. import __codename__, __version__
from ..console import HAS_RICH, Output, Style, console
from .base import COMMAND_REGISTRY, Command, register

logger = logging.getLogger('qexrank')

# Rendered top-to-bottom in this order.
CATEGORIES = {
    "Pipeline": ("index", "search", "eval", "tune"),
    "Expansion": ("expand", "stats"),
    "Knowledge base": ("fetch-kb",),
    "Data": ("dataset:",),
}


def category_of(name: str) -> str:
    for category, names in CATEGORIES.items():
        if any(name == n or (n.endswith(":") and name.startswith(n)) for n in names):
            return category
    return "Utilities"


@register
class ListCommand(Command):
    signature = "list"
    description = "Show all available commands"
    help = """
Examples:
  qexrank list       Show all commands grouped by category
  qexrank            Same as above (default when no args)
"""

    def handle(self):
        Output.banner(__version__, __codename__)

        if HAS_RICH:
            console.print("[yellow]Usage:[/yellow]")
            console.print("  command [options] [arguments]")
            console.print()
            console.print("[yellow]Global Options:[/yellow]")
            console.print("  [green]-h, --help[/green]            Display help for a command")
            console.print("  [green]-v, --version[/green]         Display application version")
            console.print("  [green]--config=PATH[/green]         Read settings from an INI file")
            console.print("  [green]--offline[/green]             Never touch the network; KB lookups use the cache")
            console.print("  [green]--json[/green]                Machine-readable output on stdout")
            console.print()
        else:
            print(f"{Style.YELLOW}Usage:{Style.RESET}")
            print("  command [options] [arguments]\n")
            print(f"{Style.YELLOW}Global Options:{Style.RESET}")
            print(f"  {Style.GREEN}-h, --help{Style.RESET}            Display help for a command")
            print(f"  {Style.GREEN}-v, --version{Style.RESET}         Display application version")
            print(f"  {Style.GREEN}--config=PATH{Style.RESET}         Read settings from an INI file")
            print(f"  {Style.GREEN}--offline{Style.RESET}             Never touch the network; KB lookups use the cache")
            print(f"  {Style.GREEN}--json{Style.RESET}                Machine-readable output on stdout\n")

        grouped: dict[str, list] = {name: [] for name in list(CATEGORIES) + ["Utilities"]}
        for name, cls in sorted(COMMAND_REGISTRY.items()):
            grouped[category_of(name)].append((name, cls.description))

        # One column width across categories keeps descriptions aligned.
        all_names = [cmd[0] for cmds in grouped.values() for cmd in cmds]
        column_width = max(len(n) for n in all_names) if all_names else 0

        if HAS_RICH:
            console.print("[yellow]Available commands:[/yellow]")
            console.print()
        else:
            print(f"{Style.YELLOW}Available commands:{Style.RESET}\n")

        for category, commands in grouped.items():
            if not commands:
                continue
            count = f"({len(commands)})"
            if HAS_RICH:
                console.print(f" [bold yellow]{category}[/bold yellow] [dim]{count}[/dim]")
            else:
                print(f" {Style.BOLD}{Style.YELLOW}{category}{Style.RESET} {Style.DIM}{count}{Style.RESET}")

            for cmd_name, description in commands:
                padding = " " * (column_width - len(cmd_name) + 2)
                if HAS_RICH:
                    console.print(f"  [green]{cmd_name}[/green]{padding}[dim]{description}[/dim]")
                else:
                    print(f"  {Style.GREEN}{cmd_name}{Style.RESET}{padding}{description}")
            print()


@register
class VersionCommand(Command):
    signature = "version {--json}"
    description = "Show qexrank version and optional components"
    help = """
Examples:
  qexrank version
  qexrank -v         Alias
"""

    OPTIONAL = ("rich", "pyfiglet", "nltk", "httpx", "pytrec_eval")

    def handle(self):
        py_version = f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}"
        components = {name: self._component_version(name) for name in self.OPTIONAL}

        if self.as_json:
            Output.json({
                "version": __version__,
                "codename": __codename__,
                "python": py_version,
                "components": components,
            })
            return

        Output.echo(f"qexrank v{__version__} ({__codename__})", Style.BOLD)
        Output.info("Query expansion for community question re-ranking")
        Output.echo(f"Python: {py_version}", Style.CYAN)
        for name, version in components.items():
            Output.echo(f"{name}: {version or 'not installed'}", Style.CYAN)

    @staticmethod
    def _component_version(name: str):
        try:
            module = importlib.import_module(name)
        except ImportError:
            return None
        return getattr(module, "__version__", "installed")
