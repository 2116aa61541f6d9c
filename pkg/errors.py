class PrepError(RuntimeError):
    """Base class for every data error raised while preparing or scoring a corpus."""
