"""
Console output and styling utilities for qexrank.

Human-readable output goes through :class:`Output`; machine-readable
output (``--json``) goes through :meth:`Output.json` and nothing else is
written to stdout. Log records go to stderr.
"""
import json
import logging
import os
import sys
from contextlib import contextmanager
from typing import Any, Callable, Iterator, List, Optional, Sequence

# Try to import optional dependencies
try:
    import pyfiglet
    HAS_PYFIGLET = True
except ImportError:
    HAS_PYFIGLET = False

try:
    from rich.box import ROUNDED
    from rich.console import Console
    from rich.markup import escape
    from rich.progress import Progress, SpinnerColumn, TextColumn, BarColumn, TaskProgressColumn
    from rich.rule import Rule
    from rich.table import Table
    from rich.text import Text
    from rich.theme import Theme
    HAS_RICH = True

    # Custom theme for qexrank
    qexrank_theme = Theme({
        "info": "cyan",
        "warning": "yellow",
        "danger": "red",
        "success": "green",
        "brand": "bright_cyan",
        "muted": "dim",
        "highlight": "bright_yellow",
    })
    console = Console(theme=qexrank_theme, highlight=False)
except ImportError:
    HAS_RICH = False
    console = None

    def escape(markup: str) -> str:
        return markup

LOG_LEVEL_ENV = "QEXRANK_LOG_LEVEL"

# Logging setup
logging.basicConfig(
    level=getattr(logging, os.environ.get(LOG_LEVEL_ENV, "WARNING").upper(), logging.WARNING),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger('qexrank')


class Style:
    """ANSI color codes for terminal output (fallback)"""
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    BRIGHT_GREEN = '\033[92;1m'
    BRIGHT_YELLOW = '\033[93;1m'
    BRIGHT_RED = '\033[91;1m'
    RESET = '\033[0m'
    BOLD = '\033[1m'
    DIM = '\033[2m'


class Icons:
    """ASCII icons for different message types"""
    SUCCESS = ">"
    ERROR = "x"
    WARNING = "!"
    INFO = ">"
    FILE = "*"


def _looks_numeric(cell: str) -> bool:
    text = cell.strip().lstrip("+-")
    return bool(text) and text.replace(".", "", 1).isdigit()


class Output:
    """
    CLI output handler with Rich support and an ANSI fallback.
    """

    @staticmethod
    def echo(msg: str, style: str = "", end: str = "\n"):
        """Basic echo with style. ``msg`` is printed literally."""
        if HAS_RICH and console:
            console.print(escape(msg), end=end)
        else:
            print(f"{style}{msg}{Style.RESET if style else ''}", end=end)

    @staticmethod
    def raw(text: str):
        """Write pre-rendered text (reports, dumps) exactly as given."""
        sys.stdout.write(text)
        sys.stdout.flush()

    @staticmethod
    def json(payload: Any):
        """The only thing a ``--json`` command writes to stdout."""
        print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))

    @staticmethod
    def new_line(count: int = 1):
        for _ in range(count):
            print()

    @staticmethod
    def success(msg: str):
        if HAS_RICH:
            console.print(f"[success]{Icons.SUCCESS} [/success]{escape(msg)}")
        else:
            print(f"{Style.BRIGHT_GREEN}{Icons.SUCCESS} {Style.RESET}{msg}")
        logger.info(msg)

    @staticmethod
    def info(msg: str, dim: bool = False):
        style = "muted" if dim else "info"
        if HAS_RICH:
            console.print(f"[{style}]{Icons.INFO} {escape(msg)}[/{style}]")
        else:
            print(f"{Style.BLUE}{Icons.INFO} {Style.RESET}{msg}")
        logger.info(msg)

    @staticmethod
    def warn(msg: str):
        if HAS_RICH:
            console.print(f"[warning]{Icons.WARNING} {escape(msg)}[/warning]")
        else:
            print(f"{Style.YELLOW}{Icons.WARNING} {Style.RESET}{msg}")
        logger.warning(msg)

    @staticmethod
    def error(msg: str):
        if HAS_RICH:
            console.print(f"[danger]{Icons.ERROR} {escape(msg)}[/danger]")
        else:
            print(f"{Style.BRIGHT_RED}{Icons.ERROR} {Style.RESET}{msg}")
        logger.error(msg)

    @staticmethod
    def section(title: str, description: str = ""):
        if HAS_RICH:
            text = Text()
            text.append(title, style="bold cyan")
            if description:
                text.append(f" - {description}", style="dim")
            console.print(Rule(text, style="cyan"))
        else:
            print()
            print(f"{Style.BOLD}{Style.CYAN}{title}{Style.RESET}")
            if description:
                print(f"  {Style.DIM}{description}{Style.RESET}")
            print()

    @staticmethod
    def file_written(path: str, description: str = ""):
        """Report an artifact written to disk"""
        desc = f" ({description})" if description else ""
        if HAS_RICH:
            console.print(f"  {Icons.FILE} [green]Wrote[/green] [highlight]{escape(str(path))}[/highlight]{escape(desc)}")
        else:
            print(f"  {Icons.FILE} Wrote {path}{desc}")

    @staticmethod
    def table(headers: List[str], rows: Sequence[Sequence[str]], title: Optional[str] = None):
        """
        Display score rows in a table.

        Columns whose cells are all numbers (MAP, AP, deltas, counts) are
        right-aligned so decimal points line up.
        """
        cells = [[str(cell) for cell in row] for row in rows]
        numeric = [
            bool(cells) and all(_looks_numeric(row[i]) or row[i] == "-" for row in cells)
            for i in range(len(headers))
        ]
        if HAS_RICH:
            table = Table(
                title=title,
                show_header=True,
                header_style="bold bright_cyan",
                box=ROUNDED,
                border_style="cyan",
            )
            for header, is_numeric in zip(headers, numeric):
                table.add_column(header, justify="right" if is_numeric else "left", overflow="fold")
            for row in cells:
                table.add_row(*(escape(cell) for cell in row))
            console.print(table)
            return

        widths = [max([len(h)] + [len(row[i]) for row in cells]) for i, h in enumerate(headers)]

        def fmt(row: Sequence[str]) -> str:
            return " | ".join(
                cell.rjust(w) if is_numeric else cell.ljust(w)
                for cell, w, is_numeric in zip(row, widths, numeric)
            )

        if title:
            print(f"\n{Style.BOLD}{title}{Style.RESET}")
        print(f"{Style.CYAN}{fmt(headers)}{Style.RESET}")
        print("-+-".join("-" * w for w in widths))
        for row in cells:
            print(fmt(row))

    @staticmethod
    @contextmanager
    def progress(description: str, total: int) -> Iterator[Callable[[], None]]:
        """
        Progress bar over ``total`` steps; yields an ``advance()`` callable.

        Usage:
            with Output.progress("Evaluating systems", total=18) as advance:
                for system in systems:
                    run(system)
                    advance()
        """
        if HAS_RICH and console.is_terminal:
            with Progress(
                SpinnerColumn(),
                TextColumn("[progress.description]{task.description}"),
                BarColumn(complete_style="green", finished_style="green"),
                TaskProgressColumn(),
                console=console,
                transient=True,
            ) as progress:
                task = progress.add_task(f"[cyan]{escape(description)}[/cyan]", total=total)
                yield lambda: progress.advance(task)
        else:
            yield lambda: None

    @staticmethod
    @contextmanager
    def spinner(text: str = "Loading") -> Iterator[None]:
        if HAS_RICH and console.is_terminal:
            with console.status(f"[cyan]{escape(text)}...[/cyan]", spinner="dots"):
                yield
        else:
            yield

    @staticmethod
    def banner(version: str, codename: str):
        """Application banner for ``qexrank list``."""
        banner_text = "qexrank\n"
        if HAS_PYFIGLET:
            for font in ("slant", "small", "standard"):
                try:
                    banner_text = pyfiglet.figlet_format("qexrank", font=font)
                    break
                except Exception:
                    continue

        tagline = f"v{version} ({codename}) - query expansion re-ranking toolkit"
        if HAS_RICH:
            console.print(f"[bold cyan]{escape(banner_text)}[/bold cyan]", end="")
            console.print(f"[dim]{escape(tagline)}[/dim]")
            console.print()
        else:
            print(Style.CYAN + banner_text + Style.RESET, end="")
            print(f"{Style.DIM}{tagline}{Style.RESET}")
            print()
