import platformdirs

_appname = "slicemotion"

APP_DIRS = platformdirs.PlatformDirs(
    appauthor="thegamecracks",
    appname=_appname,
    ensure_exists=False,
    opinion=True,
)
LOG_PATH = APP_DIRS.user_log_path / f"{APP_DIRS.appname}.jsonl"
