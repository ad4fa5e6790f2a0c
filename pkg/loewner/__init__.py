from .enums import *
from .errors import *
from .reports import *
from .geometry import *
from .fields import *
from .flow import *
from .maps import *
from .chains import *
from .ranges import *
from .operators import *
from .shapes import *
from .cli import main, run, validate_spec, RunManifest


__version__ = '0.1.0'
__author__ = 'loewner-lab'
