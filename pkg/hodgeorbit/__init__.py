'''
Numerical toolkit for the asymptotics of complex polarized variations of
Hodge structure near a normal crossing boundary.
'''
try:
    from importlib.metadata import PackageNotFoundError, version
except ImportError:  # Python < 3.8
    from pkg_resources import DistributionNotFound as PackageNotFoundError, get_distribution

    def version(name):
        return get_distribution(name).version

__packagename__ = 'HodgeOrbit'
__author__ = 'HodgeOrbit developers'
__description__ = 'Nilpotent orbit and Deligne extension checks for polarized variations of Hodge structure'

try:
    __version__ = version(__packagename__)
except PackageNotFoundError:
    __version__ = '0.1.0'
