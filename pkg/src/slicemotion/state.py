# Global state smells...
MAX_WORKERS: int = 1
