# Version information for kronlite.  Bumped by hand at release time,
# together with CHANGE_LOG.

version = "0.1.0"


def get_versions():
    return {"version": version, "full-revisionid": None,
            "dirty": None, "error": None}
