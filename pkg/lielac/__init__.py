import lielac.groups
import lielac.jets
import lielac.fields
import lielac.energy
import lielac.solvers
import lielac.optim
import lielac.pipeline
import lielac.toy2d

from ._constants import set_default
from ._constants import get_default

__all__ = [
    'groups', 'jets', 'fields', 'energy', 'solvers', 'optim', 'pipeline', 'toy2d',
    'set_default', 'get_default'
]

__version__ = '0.1.0'
__author__ = 'LieLAC developers'
__license__ = 'BSD 3-Clause Clear License'
