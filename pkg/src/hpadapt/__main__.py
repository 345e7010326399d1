"""Allow ``python -m hpadapt``."""
from .cli import main_exit

main_exit()
