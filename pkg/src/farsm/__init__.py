"""Link-level simulation of a MIMO downlink whose transmitter is a planar
fluid antenna surface: a dense grid of correlated ports from which a subset
is activated, with information carried jointly by a QAM symbol and the index
of the targeted receive antenna.

Subpackage layout:

* :mod:`farsm.correlation` -- port grid geometry and spatial correlation
* :mod:`farsm.channel` -- seeded random streams and channel sampling
* :mod:`farsm.modulation` -- square QAM and bit mapping
* :mod:`farsm.precoding` -- ZF / MMSE transmit precoding
* :mod:`farsm.selection` -- port (antenna) subset selection
* :mod:`farsm.detection` -- receive-side detectors
* :mod:`farsm.theory` -- closed-form capacity-loss and MSE metrics
* :mod:`farsm.simulate` -- Monte Carlo engine
* :mod:`farsm.cli` -- command line front end
"""

__version__ = "0.1.0"

from farsm.errors import ConfigError, NumericalError, SingularChannelError

__all__ = ["ConfigError", "NumericalError", "SingularChannelError", "__version__"]
