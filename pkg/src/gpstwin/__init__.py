"""GPS L1 C/A signal twin: scenario truth, IF synthesis and a software receiver."""
__version__ = "0.1.0"
