import os
import subprocess as sp

MAJOR = 0
MINOR = 1
MICRO = 0
ISRELEASED = False
VERSION = '%d.%d.%d' % (MAJOR, MINOR, MICRO)


def git_version(cwd=None):
    """
    current git revision of the checkout containing kirlab, "Unknown" outside git
    """
    # minimal, locale-free environment
    env = {k: os.environ[k] for k in ('SYSTEMROOT', 'PATH', 'HOME') if k in os.environ}
    env.update(LANGUAGE='C', LANG='C', LC_ALL='C')
    try:
        out = sp.run(['git', 'rev-parse', 'HEAD'], stdout=sp.PIPE, stderr=sp.DEVNULL, env=env, cwd=cwd,
                     check=False).stdout
        revision = out.strip().decode('ascii')
    except OSError:
        revision = ""
    return revision or "Unknown"


def get_version(build_version=False):
    if ISRELEASED:
        return VERSION

    if build_version:
        import datetime as dt
        return VERSION + ".dev" + dt.datetime.now().strftime("%Y%m%d%H%M%S")

    maindir = os.path.abspath(os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
    return VERSION + ".dev0+" + git_version(maindir)[:7]
